import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wastap.scene import (SPEED_OF_LIGHT, ArrayGeometry, KinematicState, PulseTrain, Target,
                          block_replication, build_replication, composite_steering,
                          doppler_shift, element_delay, look_angles,
                          normalized_temporal_steering, spatial_steering, target_steering,
                          temporal_steering)

F0 = 1e9
LAM = SPEED_OF_LIGHT / F0


def test_broadside_steering_is_all_ones():
    geom = ArrayGeometry.half_wavelength(3, F0)
    for phi in (0.0, 0.4, np.pi / 2):
        np.testing.assert_allclose(spatial_steering(0.0, phi, geom), np.ones(3))


def test_endfire_half_wavelength_alternates():
    geom = ArrayGeometry.half_wavelength(2, F0)
    np.testing.assert_allclose(spatial_steering(np.pi / 2, np.pi / 2, geom), [1, -1], atol=1e-15)


def test_spatial_steering_matches_direct_formula():
    geom = ArrayGeometry.half_wavelength(5, F0)
    a = spatial_steering(0.7, np.pi / 4, geom)
    for m in range(5):
        expect = np.exp(-2j * np.pi * m * (LAM / 2) * np.sin(0.7) * np.sin(np.pi / 4) / LAM)
        assert abs(a[m] - expect) < 1e-14


def test_temporal_steering_cases():
    pulses = PulseTrain(4, 1e-3, 1e-7, 50e6, 5)
    np.testing.assert_allclose(temporal_steering(0.0, pulses), np.ones(4))
    np.testing.assert_allclose(normalized_temporal_steering(0.5, 2), [1, -1], atol=1e-15)
    v = normalized_temporal_steering(0.31, 32)
    expect = np.array([np.exp(-2j * np.pi * 0.31 * l) for l in range(32)])
    np.testing.assert_allclose(v, expect, rtol=0, atol=1e-13)
    # physical Doppler over the PRI gives the same vector
    np.testing.assert_allclose(temporal_steering(310.0, PulseTrain(32, 1e-3, 1e-7, 50e6, 5)),
                               v, atol=1e-12)


def test_doppler_zero_for_identical_motion():
    vel = np.array([10.0, -3.0, 1.0])
    r = KinematicState([0, 0, 1000.0], vel)
    t = KinematicState([500.0, 200.0, 0.0], vel)
    assert doppler_shift(r, t, F0) == 0.0


def test_doppler_collinear_speed():
    # the shift carries the sign of the range rate: opening positive, closing negative
    r = KinematicState([0, 0, 0], [0, 0, 0])
    opening = KinematicState([0, 1000.0, 0], [0, 30.0, 0])
    closing = KinematicState([0, 1000.0, 0], [0, -30.0, 0])
    expect = 2 * F0 * 30.0 / SPEED_OF_LIGHT
    assert doppler_shift(r, opening, F0) == pytest.approx(expect, rel=1e-12)
    assert doppler_shift(r, closing, F0) == pytest.approx(-expect, rel=1e-12)


def test_doppler_matches_finite_difference_of_delay():
    rng = np.random.default_rng(5)
    for _ in range(10):
        r = KinematicState(rng.normal(size=3) * 1e3, rng.normal(size=3) * 50)
        t = KinematicState(rng.normal(size=3) * 1e3 + 5e3, rng.normal(size=3) * 20)

        def delay(dt):
            return 2 * np.linalg.norm((r.position + dt * r.velocity)
                                      - (t.position + dt * t.velocity)) / SPEED_OF_LIGHT

        h = 1e-3
        fd = F0 * (delay(h) - delay(-h)) / (2 * h)
        assert doppler_shift(r, t, F0) == pytest.approx(fd, rel=1e-6)


def test_doppler_coincident_positions_rejected():
    s = KinematicState([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        doppler_shift(s, s, F0)


def test_look_angles_roundtrip():
    theta, phi, rng_ = 0.4, 1.1, 2500.0
    u = np.array([np.sin(phi) * np.sin(theta), np.sin(phi) * np.cos(theta), np.cos(phi)])
    radar = KinematicState(rng_ * u)
    th, ph = look_angles(radar, KinematicState())
    assert th == pytest.approx(theta) and ph == pytest.approx(phi)


def test_element_delay_cases():
    geom = ArrayGeometry.half_wavelength(4, F0)
    radar = KinematicState([0.0, 0.0, 0.0])
    tgt = KinematicState([0.0, 3000.0, -400.0])
    assert element_delay(0, radar, tgt, geom) == pytest.approx(
        2 * np.linalg.norm(tgt.position) / SPEED_OF_LIGHT, rel=1e-15)
    # broadside (θ=0): same delay on every element
    d = [element_delay(m, radar, tgt, geom) for m in range(4)]
    assert np.ptp(d) < 1e-20
    # θ = φ = π/2: line of sight along x
    tgt = KinematicState([-3000.0, 0.0, 0.0])
    for m in range(4):
        gap = element_delay(m, radar, tgt, geom) - element_delay(0, radar, tgt, geom)
        assert gap == pytest.approx(m * LAM / (2 * SPEED_OF_LIGHT), rel=1e-9)


def test_trivial_replication_is_identity():
    np.testing.assert_array_equal(build_replication([1.0], [1.0], 2).replication, np.eye(2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_replication_reproduces_kronecker(M, L, N, seed):
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry.half_wavelength(M, F0)
    a = spatial_steering(rng.uniform(-1.5, 1.5), rng.uniform(0, 1.5), geom)
    v = normalized_temporal_steering(rng.uniform(-0.5, 0.5), L)
    s = rng.normal(size=N) + 1j * rng.normal(size=N)
    steer = build_replication(a, v, N)
    assert np.max(np.abs(steer.replication @ s - np.kron(v, np.kron(s, a)))) <= 1e-12
    assert np.max(np.abs(block_replication(a, N) @ s - np.kron(s, a))) <= 1e-12
    np.testing.assert_allclose(np.abs(a), 1.0)
    np.testing.assert_allclose(np.abs(v), 1.0)
    g = composite_steering(v, s, a)
    assert np.linalg.norm(g) ** 2 == pytest.approx(
        np.linalg.norm(v) ** 2 * np.linalg.norm(s) ** 2 * np.linalg.norm(a) ** 2, rel=1e-12)
    np.testing.assert_allclose(g, steer.composite(s), atol=1e-12)


def test_block_replication_is_block_diagonal():
    a = np.array([1.0, 1j, -1.0])
    B = block_replication(a, 3)
    assert B.shape == (9, 3)
    for n in range(3):
        np.testing.assert_array_equal(B[3 * n:3 * n + 3, n], a)
        assert np.count_nonzero(B[:, n]) == 3


def test_composite_all_ones():
    np.testing.assert_array_equal(composite_steering(np.ones(2), np.ones(2), np.ones(2)),
                                  np.ones(8))


def test_target_steering_shapes():
    geom = ArrayGeometry.half_wavelength(5, F0)
    pulses = PulseTrain(32, 1e-3, 1e-7, 50e6, 5)
    steer = target_steering(geom, pulses, Target(0.7, np.pi / 4, 310.0))
    assert steer.replication.shape == (800, 5) and steer.num_samples == 5


@pytest.mark.parametrize("kwargs", [
    dict(num_elements=0, element_spacing=0.1, carrier=F0),
    dict(num_elements=3, element_spacing=0.0, carrier=F0),
    dict(num_elements=3, element_spacing=0.1, carrier=-1.0),
])
def test_geometry_validation(kwargs):
    with pytest.raises(ValueError):
        ArrayGeometry(**kwargs)


def test_pulse_and_target_validation():
    with pytest.raises(ValueError):
        PulseTrain(4, 1e-7, 1e-3, 50e6, 5)
    with pytest.raises(ValueError):
        Target(2.0, 0.1, 0.0)
    with pytest.raises(ValueError):
        Target(0.1, -0.1, 0.0)
    with pytest.raises(ValueError):
        KinematicState([np.nan, 0, 0])
