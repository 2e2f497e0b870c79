"""Array/pulse geometry, steering vectors and Kronecker replication matrices.

Flattening convention used across the package: a space-time-waveform
snapshot is indexed as ``(pulse l, fast-time sample n, element m)`` with the
element index varying fastest, i.e. vectors are ``v ⊗ s ⊗ a``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along the platform x axis."""

    num_elements: int
    element_spacing: float
    carrier: float

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if not self.element_spacing > 0:
            raise ValueError("element_spacing must be positive")
        if not self.carrier > 0:
            raise ValueError("carrier must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier

    @classmethod
    def half_wavelength(cls, num_elements: int, carrier: float) -> "ArrayGeometry":
        return cls(num_elements, 0.5 * SPEED_OF_LIGHT / carrier, carrier)


@dataclass(frozen=True)
class PulseTrain:
    """Coherent burst of ``num_pulses`` pulses, each sampled ``num_samples`` times."""

    num_pulses: int
    pri: float
    pulse_width: float
    bandwidth: float
    num_samples: int

    def __post_init__(self):
        if self.num_pulses < 1 or self.num_samples < 1:
            raise ValueError("num_pulses and num_samples must be >= 1")
        if not self.pri > self.pulse_width > 0:
            raise ValueError("need pri > pulse_width > 0")

    @property
    def prf(self) -> float:
        return 1.0 / self.pri


@dataclass(frozen=True)
class Target:
    azimuth: float
    elevation: float
    doppler: float
    reflectivity: complex = 1.0

    def __post_init__(self):
        if not -np.pi / 2 <= self.azimuth <= np.pi / 2:
            raise ValueError("azimuth must lie in [-pi/2, pi/2]")
        if not 0.0 <= self.elevation <= np.pi / 2:
            raise ValueError("elevation must lie in [0, pi/2]")


@dataclass(frozen=True)
class KinematicState:
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).reshape(3)
        vel = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
            raise ValueError("kinematic state must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "velocity", vel)


@dataclass(frozen=True)
class SteeringSet:
    """Steering vectors for one look direction plus the replication matrices.

    ``replication @ s`` equals ``np.kron(temporal, np.kron(s, spatial))``.
    """

    spatial: np.ndarray
    temporal: np.ndarray
    block: np.ndarray
    replication: np.ndarray

    @property
    def num_samples(self) -> int:
        return self.block.shape[1]

    def composite(self, s) -> np.ndarray:
        return composite_steering(self.temporal, s, self.spatial)


def spatial_frequency(azimuth, elevation, geom: ArrayGeometry):
    return geom.element_spacing * np.sin(azimuth) * np.sin(elevation) / geom.wavelength


def spatial_steering(azimuth: float, elevation: float, geom: ArrayGeometry) -> np.ndarray:
    """Array response ``a(θ, φ)``; element ``m`` is ``exp(-j2π m ϑ)``."""
    nu = spatial_frequency(azimuth, elevation, geom)
    return np.exp(-2j * np.pi * nu * np.arange(geom.num_elements))


def temporal_steering(doppler: float, pulses: PulseTrain) -> np.ndarray:
    """Slow-time response ``v(f_d)``; element ``l`` is ``exp(-j2π f_d l T_p)``."""
    return normalized_temporal_steering(doppler * pulses.pri, pulses.num_pulses)


def normalized_temporal_steering(normalized_doppler: float, num_pulses: int) -> np.ndarray:
    return np.exp(-2j * np.pi * normalized_doppler * np.arange(num_pulses))


def doppler_shift(radar: KinematicState, scatterer: KinematicState, carrier: float,
                  scatterer_moving: bool = True) -> float:
    """Two-way Doppler shift seen by the array phase centre.

    A stationary scatterer (``scatterer_moving=False``) ignores its velocity,
    which is the ground-clutter case.
    """
    los = radar.position - scatterer.position
    rng = np.linalg.norm(los)
    if rng == 0.0:
        raise ValueError("radar and scatterer positions coincide")
    rel_vel = radar.velocity - (scatterer.velocity if scatterer_moving else 0.0)
    return 2.0 * carrier * float(rel_vel @ los) / (SPEED_OF_LIGHT * rng)


def look_angles(radar: KinematicState, target: KinematicState) -> tuple[float, float]:
    """Azimuth and elevation of the unit line of sight ``(x_r - x_t)/||x_r - x_t||``.

    The unit vector is ``[sinφ sinθ, sinφ cosθ, cosφ]`` in platform coordinates.
    """
    los = radar.position - target.position
    rng = np.linalg.norm(los)
    if rng == 0.0:
        raise ValueError("radar and target positions coincide")
    u = los / rng
    return float(np.arctan2(u[0], u[1])), float(np.arccos(np.clip(u[2], -1.0, 1.0)))


def element_delay(m: int, radar: KinematicState, target: KinematicState,
                  geom: ArrayGeometry) -> float:
    """Round-trip delay to element ``m`` under the far-field approximation.

    Equals ``2R/c + m d sin(φ) sin(θ)/c`` with the angles taken from the
    line of sight.
    """
    if not 0 <= m < geom.num_elements:
        raise IndexError(f"element index {m} outside [0, {geom.num_elements})")
    los = radar.position - target.position
    rng = np.linalg.norm(los)
    if rng == 0.0:
        raise ValueError("radar and target positions coincide")
    return (2.0 * rng + m * geom.element_spacing * los[0] / rng) / SPEED_OF_LIGHT


def block_replication(a: np.ndarray, num_samples: int) -> np.ndarray:
    """``I_N ⊗ a`` (MN x N); maps ``s`` to ``s ⊗ a``."""
    a = np.asarray(a, dtype=complex).reshape(-1, 1)
    return np.kron(np.eye(num_samples), a)


def build_replication(a, v, num_samples: int) -> SteeringSet:
    a = np.asarray(a, dtype=complex)
    v = np.asarray(v, dtype=complex)
    block = block_replication(a, num_samples)
    return SteeringSet(spatial=a, temporal=v, block=block,
                       replication=np.kron(v.reshape(-1, 1), block))


def composite_steering(v, s, a) -> np.ndarray:
    return np.kron(np.asarray(v, dtype=complex),
                   np.kron(np.asarray(s, dtype=complex), np.asarray(a, dtype=complex)))


def target_steering(geom: ArrayGeometry, pulses: PulseTrain, target: Target) -> SteeringSet:
    a = spatial_steering(target.azimuth, target.elevation, geom)
    v = temporal_steering(target.doppler, pulses)
    return build_replication(a, v, pulses.num_samples)


def split_snapshot(x, num_pulses: int, num_samples: int, num_elements: int) -> np.ndarray:
    """View a flattened snapshot as a (L, N, M) cube."""
    return np.asarray(x).reshape(num_pulses, num_samples, num_elements)
