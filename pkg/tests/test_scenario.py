import json

import numpy as np
import pytest

from wastap.scenario import (ScenarioError, apply_defaults, build_model, bundled_scenario,
                             parse_scenario, ring_azimuths, scenario_hash, training_models)


def _doc(name="baseline"):
    return json.loads(bundled_scenario(name).read_text())


def test_baseline_scenario_echoes_values():
    scen, cfg = parse_scenario(bundled_scenario("baseline"))
    assert scen.geometry.num_elements == 5
    assert scen.pulses.num_pulses == 32 and scen.pulses.num_samples == 5
    assert scen.geometry.carrier == 1e9 and scen.pulses.bandwidth == 50e6
    assert scen.geometry.element_spacing == pytest.approx(scen.geometry.wavelength / 2)
    assert scen.dim == 800
    assert scen.normalized_doppler == pytest.approx(0.31)
    assert (cfg.kappa, cfg.power, cfg.max_iter) == (1.0, 10.0, 200)
    assert scen.document["noise"]["param"] == 0.005


def test_defaults_are_echoed():
    doc = _doc()
    del doc["array"]["f_o"]
    del doc["algo"]
    scen, cfg = parse_scenario(doc)
    assert scen.document["array"]["f_o"] == 1e9
    assert scen.document["algo"]["P_o"] == 10.0 and cfg.max_iter == 200
    assert scen.document["clutter"]["patches"][0]["azimuth_spread"] == 0.05


def test_missing_target_named():
    doc = _doc()
    del doc["target"]
    with pytest.raises(ScenarioError, match="target") as info:
        parse_scenario(doc)
    assert info.value.path == "target"


def test_unknown_key_rejected():
    doc = _doc()
    doc["array"]["spacing_mm"] = 150
    with pytest.raises(ScenarioError, match="spacing_mm"):
        parse_scenario(doc)


@pytest.mark.parametrize("path,value", [
    (("array", "M"), 0), (("array", "f_o"), -1.0), (("pulses", "T_p"), 0.0),
    (("target", "phi"), 2.0),
])
def test_physically_invalid_values(path, value):
    doc = _doc()
    doc[path[0]][path[1]] = value
    with pytest.raises(ScenarioError):
        parse_scenario(doc)


def test_ring_patch_count():
    step = 0.005 * np.pi / 2
    az = ring_azimuths(-np.pi / 2, np.pi / 2, step)
    assert az.size == 401 and az[-1] == pytest.approx(np.pi / 2)
    scen, _ = parse_scenario(bundled_scenario("ring"), desk=True)
    assert len(scen.clutter) == 401


def test_hash_is_canonical_and_pre_scaling(tmp_path):
    doc = _doc()
    scen, _ = parse_scenario(doc)
    desk, _ = parse_scenario(doc, desk=True)
    assert scen.digest == desk.digest == scenario_hash(apply_defaults(doc))
    shuffled = tmp_path / "s.json"
    shuffled.write_text(json.dumps(dict(reversed(list(doc.items()))), indent=4))
    assert parse_scenario(shuffled)[0].digest == scen.digest
    doc["target"]["theta"] = 0.71
    assert parse_scenario(doc)[0].digest != scen.digest


def test_desk_scale_dimensions():
    scen, _ = parse_scenario(bundled_scenario("baseline"), desk=True)
    model = build_model(scen)
    assert model.shape == (8, 4, 3) and model.dim == 96


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{ nope")
    with pytest.raises(ScenarioError, match="invalid JSON"):
        parse_scenario(bad)
    with pytest.raises(FileNotFoundError):
        parse_scenario(tmp_path / "absent.json")


def test_training_models():
    scen, _ = parse_scenario(bundled_scenario("rank_deficient"), desk=True)
    model = build_model(scen)
    loaded, raw = training_models(scen, model)
    np.testing.assert_allclose(loaded.interference_noise - raw.interference_noise,
                               100 * np.eye(model.dim), atol=1e-12)
    assert np.linalg.eigvalsh(loaded.interference_noise)[0] >= 100 - 1e-9
    with pytest.raises(ScenarioError):
        training_models(parse_scenario(bundled_scenario("baseline"))[0], model)
