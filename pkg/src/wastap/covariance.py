"""Noise, interference and waveform-dependent clutter covariance models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .scene import (ArrayGeometry, composite_steering, normalized_temporal_steering,
                    spatial_steering)

PSD_TOL = 1e-10


class ModelConfigurationError(ValueError):
    """A configured covariance is not positive semidefinite."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class CorrelationLaw:
    """Stationary correlation sequence ``r(|n|)``.

    kind is one of ``"exponential"`` (``exp(-parameter |n|)``), ``"geometric"``
    (``parameter ** |n|``) or ``"custom"`` (explicit ``values``, zero-padded).
    """

    kind: str = "exponential"
    parameter: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("exponential", "geometric", "custom"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        if self.kind == "custom" and len(self.values) == 0:
            raise ValueError("custom correlation law needs values")

    def sequence(self, length: int) -> np.ndarray:
        lags = np.arange(length)
        if self.kind == "exponential":
            return np.exp(-abs(self.parameter) * lags)
        if self.kind == "geometric":
            return float(self.parameter) ** lags
        out = np.zeros(length, dtype=complex)
        vals = np.asarray(self.values, dtype=complex)[:length]
        out[: len(vals)] = vals
        return out if np.any(out.imag) else out.real

    @classmethod
    def delta(cls) -> "CorrelationLaw":
        return cls("custom", values=(1.0,))


def check_psd(matrix: np.ndarray, name: str = "matrix", tol: float = PSD_TOL) -> float:
    """Raise ``ModelConfigurationError`` unless ``matrix`` is PSD; return its min eigenvalue."""
    lam = np.linalg.eigvalsh(matrix)
    scale = max(1.0, abs(lam[-1]))
    if lam[0] < -tol * scale:
        raise ModelConfigurationError(
            f"{name} is not positive semidefinite (min eigenvalue {lam[0]:.3e})", lam[0])
    return float(lam[0])


def toeplitz_covariance(law: CorrelationLaw, size: int, validate: bool = True) -> np.ndarray:
    if size < 1:
        raise ValueError("size must be >= 1")
    r = law.sequence(size)
    mat = sla.toeplitz(np.conj(r), r) if np.iscomplexobj(r) else sla.toeplitz(r)
    if validate:
        check_psd(mat, f"{law.kind} correlation of size {size}")
    return mat


@dataclass(frozen=True)
class InterferenceSource:
    azimuth: float
    elevation: float
    law: CorrelationLaw = field(default_factory=CorrelationLaw.delta)
    power: float = 1.0


def interference_covariance(sources: Sequence[InterferenceSource], geom: ArrayGeometry,
                            num_pulses: int, num_samples: int) -> np.ndarray:
    """Sum over sources of ``(I_NL ⊗ a_k) R_α^k (I_NL ⊗ a_k)^H = R_α^k ⊗ a_k a_k^H``."""
    dim = num_pulses * num_samples * geom.num_elements
    out = np.zeros((dim, dim), dtype=complex)
    for src in sources:
        a = spatial_steering(src.azimuth, src.elevation, geom)
        r_alpha = toeplitz_covariance(src.law, num_pulses * num_samples)
        out += src.power * np.kron(r_alpha, np.outer(a, a.conj()))
    return out


@dataclass(frozen=True)
class ClutterPatch:
    """One clutter patch of ``num_scatterers`` correlated scatterers.

    Doppler values are normalized (``f T_p``). Without per-scatterer arrays all
    scatterers sit at the nominal patch centre.
    """

    azimuth: float
    elevation: float
    doppler: float
    correlation: np.ndarray = field(default_factory=lambda: np.ones((1, 1)))
    scatterer_azimuths: np.ndarray | None = None
    scatterer_dopplers: np.ndarray | None = None

    def __post_init__(self):
        corr = np.atleast_2d(np.asarray(self.correlation))
        if corr.shape[0] != corr.shape[1]:
            raise ValueError("scatterer correlation must be square")
        if np.max(np.abs(corr - corr.conj().T), initial=0.0) > 1e-12 * max(1.0, np.abs(corr).max()):
            raise ModelConfigurationError("scatterer correlation is not Hermitian")
        check_psd(corr, "scatterer correlation")
        object.__setattr__(self, "correlation", corr)
        for name in ("scatterer_azimuths", "scatterer_dopplers"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float).reshape(-1)
                if val.size != corr.shape[0]:
                    raise ValueError(f"{name} must have one entry per scatterer")
                object.__setattr__(self, name, val)

    @property
    def num_scatterers(self) -> int:
        return self.correlation.shape[0]

    def azimuths(self) -> np.ndarray:
        if self.scatterer_azimuths is None:
            return np.full(self.num_scatterers, float(self.azimuth))
        return self.scatterer_azimuths

    def dopplers(self) -> np.ndarray:
        if self.scatterer_dopplers is None:
            return np.full(self.num_scatterers, float(self.doppler))
        return self.scatterer_dopplers

    def steering(self, geom: ArrayGeometry, num_pulses: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-scatterer temporal (P x L) and spatial (P x M) steering rows."""
        V = np.array([normalized_temporal_steering(f, num_pulses) for f in self.dopplers()])
        A = np.array([spatial_steering(th, self.elevation, geom) for th in self.azimuths()])
        return V, A


def selection_matrix(num_scatterers: int, num_samples: int) -> np.ndarray:
    """0/1 matrix ``H`` (P^2 N x N) with ``vec(I_P ⊗ s) = H s``."""
    P, N = num_scatterers, num_samples
    H = np.zeros((P * P * N, N))
    for k in range(P):
        row = k * P * N + k * N
        H[row:row + N] = np.eye(N)
    return H


def clutter_basis(patch: ClutterPatch, geom: ArrayGeometry, num_pulses: int,
                  num_samples: int) -> np.ndarray:
    """Dense ``B̆_q = [v_1 ⊗ A_1, ..., v_P ⊗ A_P]`` (NML x PN), ``A_p = I_N ⊗ a_p``."""
    V, A = patch.steering(geom, num_pulses)
    eye = np.eye(num_samples)
    return np.hstack([np.kron(v.reshape(-1, 1), np.kron(eye, a.reshape(-1, 1)))
                      for v, a in zip(V, A)])


def patch_columns(basis: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``B_q(s) = B̆_q (I_P ⊗ s)``."""
    s = np.asarray(s, dtype=complex)
    P = basis.shape[1] // s.size
    return basis @ np.kron(np.eye(P), s.reshape(-1, 1))


class ClutterField:
    """All clutter patches stacked for vectorised evaluation."""

    def __init__(self, patches: Sequence[ClutterPatch], geom: ArrayGeometry,
                 num_pulses: int, num_samples: int):
        self.patches = list(patches)
        self.geom = geom
        self.num_pulses = num_pulses
        self.num_samples = num_samples
        if self.patches:
            steer = [p.steering(geom, num_pulses) for p in self.patches]
            self.V = np.vstack([v for v, _ in steer])
            self.A = np.vstack([a for _, a in steer])
            self.R = sla.block_diag(*[p.correlation for p in self.patches]).astype(complex)
        else:
            self.V = np.zeros((0, num_pulses), dtype=complex)
            self.A = np.zeros((0, geom.num_elements), dtype=complex)
            self.R = np.zeros((0, 0), dtype=complex)
        bounds = np.cumsum([0] + [p.num_scatterers for p in self.patches])
        self.slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    @property
    def dim(self) -> int:
        return self.num_pulses * self.num_samples * self.geom.num_elements

    @property
    def num_scatterers(self) -> int:
        return self.V.shape[0]

    def columns(self, s) -> np.ndarray:
        """Every scatterer's ``v_p ⊗ s ⊗ a_p`` as a column (NML x S)."""
        s = np.asarray(s, dtype=complex)
        cube = np.einsum("jl,n,jm->lnmj", self.V, s, self.A)
        return cube.reshape(self.dim, -1)

    def covariance(self, s) -> np.ndarray:
        if not self.patches:
            return np.zeros((self.dim, self.dim), dtype=complex)
        C = self.columns(s)
        out = (C @ self.R) @ C.conj().T
        return 0.5 * (out + out.conj().T)

    def projections(self, w) -> np.ndarray:
        """``x_p = B̆_p^H w`` for every scatterer, as columns (N x S)."""
        W = np.asarray(w, dtype=complex).reshape(self.num_pulses, self.num_samples, -1)
        return np.einsum("jl,jm,lnm->nj", self.V.conj(), self.A.conj(), W)

    def zq_matrices(self, w) -> list[np.ndarray]:
        X = self.projections(w)
        out = []
        for sl, patch in zip(self.slices, self.patches):
            Xq = X[:, sl]
            Z = Xq @ patch.correlation.conj() @ Xq.conj().T
            out.append(0.5 * (Z + Z.conj().T))
        return out

    def zq_sum(self, w) -> np.ndarray:
        N = self.num_samples
        if not self.patches:
            return np.zeros((N, N), dtype=complex)
        X = self.projections(w)
        Z = X @ self.R.conj() @ X.conj().T
        return 0.5 * (Z + Z.conj().T)


def clutter_covariance(s, patches: Sequence[ClutterPatch], geom: ArrayGeometry,
                       num_pulses: int) -> np.ndarray:
    s = np.asarray(s, dtype=complex)
    return ClutterField(patches, geom, num_pulses, s.size).covariance(s)


def zq_matrices(w, patches: Sequence[ClutterPatch], geom: ArrayGeometry, num_pulses: int,
                num_samples: int) -> list[np.ndarray]:
    return ClutterField(patches, geom, num_pulses, num_samples).zq_matrices(w)


class CovarianceModel:
    """Interference-plus-noise covariance, clutter field and target replication.

    ``interference_noise`` may be any Hermitian PSD matrix; rank-deficient
    estimates are allowed (the proximal solvers handle them).
    """

    def __init__(self, noise: np.ndarray, interference: np.ndarray, clutter: ClutterField,
                 replication: np.ndarray, spatial: np.ndarray, temporal: np.ndarray):
        self.noise = noise
        self.interference = interference
        self.clutter = clutter
        self.replication = replication
        self.spatial = spatial
        self.temporal = temporal
        self.interference_noise = noise + interference

    @property
    def dim(self) -> int:
        return self.replication.shape[0]

    @property
    def num_samples(self) -> int:
        return self.replication.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.temporal.size, self.num_samples, self.spatial.size

    def steering(self, s) -> np.ndarray:
        return composite_steering(self.temporal, s, self.spatial)

    def clutter_covariance(self, s) -> np.ndarray:
        return self.clutter.covariance(s)

    def total_covariance(self, s) -> np.ndarray:
        return self.interference_noise + self.clutter.covariance(s)

    def zq_matrices(self, w) -> list[np.ndarray]:
        return self.clutter.zq_matrices(w)

    def zq_sum(self, w) -> np.ndarray:
        return self.clutter.zq_sum(w)

    def with_interference_noise(self, matrix: np.ndarray) -> "CovarianceModel":
        """Copy of the model whose noise-plus-interference part is ``matrix``."""
        out = CovarianceModel(matrix, np.zeros_like(matrix), self.clutter, self.replication,
                              self.spatial, self.temporal)
        return out


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circular standard complex normal samples (unit variance)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def covariance_factor(R: np.ndarray) -> np.ndarray:
    """Matrix ``F`` with ``F F^H = R`` for Hermitian PSD ``R`` (eigen-based, rank-safe)."""
    lam, U = np.linalg.eigh(R)
    return U * np.sqrt(np.clip(lam, 0.0, None))


def draw_snapshots(R: np.ndarray, num_snapshots: int, rng: np.random.Generator,
                   factor: np.ndarray | None = None) -> np.ndarray:
    """Zero-mean complex Gaussian snapshots with covariance ``R``, one per row."""
    F = covariance_factor(R) if factor is None else factor
    Z = complex_gaussian(rng, (num_snapshots, F.shape[1]))
    return Z @ F.T


def sample_covariance(snapshots, loading: float = 0.0) -> np.ndarray:
    """``(1/K) Σ y y^H + δ I`` over snapshots given one per row."""
    Y = np.atleast_2d(np.asarray(snapshots, dtype=complex))
    if Y.shape[0] == 0 or Y.size == 0:
        raise ValueError("need at least one snapshot")
    if loading < 0:
        raise ValueError("loading must be non-negative")
    R = (Y.T @ Y.conj()) / Y.shape[0]
    R = 0.5 * (R + R.conj().T)
    if loading:
        R = R + loading * np.eye(R.shape[0])
    return R
