import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wastap.export import from_csv, from_json, read_table, to_csv, to_json, write_table

HEADER = {"scenario_hash": "ab" * 32, "seed": 7, "config": {"power": 10.0, "alpha": 0.0}}

floats = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10 ** 6), floats, floats), max_size=20))
def test_csv_roundtrip_bytes(records):
    rows = [{"k": k, "objective": a, "power": b} for k, a, b in records]
    text = to_csv(HEADER, rows, ["k", "objective", "power"])
    header, back = from_csv(text)
    assert header == HEADER and back == rows
    assert to_csv(header, back, ["k", "objective", "power"]) == text


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 100), floats), max_size=20))
def test_json_and_csv_agree(records):
    rows = [{"k": k, "objective": a} for k, a in records]
    cols = ["k", "objective"]
    h1, r1 = from_csv(to_csv(HEADER, rows, cols))
    h2, r2 = from_json(to_json(HEADER, rows, cols))
    assert h1 == h2 and r1 == r2


def test_empty_table_is_header_only(tmp_path):
    path = write_table(tmp_path / "t.csv", HEADER, [], "csv", ["k", "objective"])
    text = path.read_text()
    assert text.splitlines()[-1] == "k,objective"
    assert all(line.startswith("# ") for line in text.splitlines()[:-1])
    assert read_table(path) == (HEADER, [])


def test_special_values(tmp_path):
    rows = [{"k": 1, "objective": math.inf, "ok": True, "label": "random"}]
    path = write_table(tmp_path / "t.json", HEADER, rows, "json")
    assert read_table(path)[1] == rows
    path = write_table(tmp_path / "t.csv", HEADER, rows, "csv")
    assert read_table(path)[1] == rows
    with pytest.raises(ValueError):
        write_table(tmp_path / "t.xml", HEADER, rows, "xml")
