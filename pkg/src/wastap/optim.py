"""Single-step solvers for the joint filter/waveform problem.

Every solver works with Hermitian factorizations (Cholesky or eigh) and never
forms an explicit inverse.  Capon constraints are written ``w^H g = κ`` for
the filter and ``w^H G s = b^H s = κ`` for the waveform, ``b = G^H w``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq
from scipy.sparse.linalg import eigsh

from .scene import build_replication

# Relative pivot floor below which a Cholesky factor is treated as singular.
SINGULAR_RTOL = 1e-13


class RankDeficiencyError(np.linalg.LinAlgError):
    """A matrix that must be positive definite is (numerically) singular."""

    def __init__(self, message, min_eigenvalue=None, deficit=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.deficit = deficit


class RootBracketError(RuntimeError):
    """A dual parameter could not be bracketed."""


@dataclass
class AlgoConfig:
    """Algorithm parameters shared by the alternating-minimization drivers.

    ``alpha``/``beta`` are proximal weights; ``prox_mode="lipschitz"`` replaces
    them each iteration by ``prox_scale`` times the Lipschitz constant of the
    relevant quadratic form.
    """

    kappa: float = 1.0
    power: float = 10.0
    modulus: float = 1.0
    alpha: float = 0.0
    beta: float = 0.0
    prox_mode: str = "fixed"
    prox_scale: float = 1.0
    tol_obj: float = 1e-8
    tol_disp: float = 1e-6
    patience: int = 3
    tol_constraint: float = 1e-8
    tol_root: float = 1e-12
    tol_kkt: float = 1e-10
    max_iter: int = 200
    cm_max_sweeps: int = 5000
    cm_damping: float = 1.0
    loading: float = 0.0
    stop_on_power_violation: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.power > 0:
            raise ValueError("power must be positive")
        if not self.modulus > 0:
            raise ValueError("modulus must be positive")
        if self.alpha < 0 or self.beta < 0 or self.prox_scale < 0:
            raise ValueError("proximal weights must be non-negative")
        if self.prox_mode not in ("fixed", "lipschitz"):
            raise ValueError("prox_mode must be 'fixed' or 'lipschitz'")
        for name in ("tol_obj", "tol_disp", "tol_constraint", "tol_root", "tol_kkt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 0 or self.patience < 1:
            raise ValueError("max_iter must be >= 0 and patience >= 1")
        if not 0 < self.cm_damping <= 1:
            raise ValueError("cm_damping must lie in (0, 1]")
        if self.loading < 0:
            raise ValueError("loading must be non-negative")
        if self.kappa ** 2 > self.power:
            warnings.warn("kappa**2 exceeds the power budget; the zero-multiplier "
                          "branch is unlikely to be feasible", stacklevel=2)


@dataclass
class DualSolveReport:
    gamma: float
    residual: float
    branch: str
    iterations: int = 0
    power: float = float("nan")
    multiplier: complex = 0j


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    rank: int

    @property
    def max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def min(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass
class MinEigReport:
    eigenvalue: float
    gap: float
    degenerate: bool
    decoupled_discrepancy: float


@dataclass
class ConstModReport:
    residual: float
    relative_residual: float
    sweeps: int
    converged: bool
    modulus: float
    objective_trace: list = field(default_factory=list)


def hermitian_part(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


def factor(A: np.ndarray, name: str = "matrix"):
    """Cholesky factor of a Hermitian PD matrix, or ``RankDeficiencyError``."""
    try:
        cf = sla.cho_factor(A, lower=False, check_finite=True)
    except np.linalg.LinAlgError:
        cf = None
    if cf is not None:
        piv = np.abs(np.diag(cf[0])) ** 2
        scale = max(np.max(np.abs(np.diag(A)).real), np.finfo(float).tiny)
        if piv.min() > SINGULAR_RTOL * scale:
            return cf
    lam = np.linalg.eigvalsh(hermitian_part(A))
    tol = max(abs(lam[-1]), np.finfo(float).tiny) * A.shape[0] * np.finfo(float).eps * 10
    deficit = int(np.sum(lam <= tol))
    raise RankDeficiencyError(
        f"{name} is singular: min eigenvalue {lam[0]:.3e}, rank deficit {deficit} "
        f"of {A.shape[0]}", min_eigenvalue=float(lam[0]), deficit=deficit)


def solve(cf, rhs):
    return sla.cho_solve(cf, rhs, check_finite=False)


def mvdr_filter(R: np.ndarray, g: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """``w = κ R^{-1} g / (g^H R^{-1} g)``."""
    g = np.asarray(g, dtype=complex)
    if not np.any(g):
        raise ValueError("steering vector is zero")
    cf = factor(R, "interference-plus-noise covariance")
    u = solve(cf, g)
    c = np.vdot(g, u).real
    return (kappa / c) * u


def capon_objective(R: np.ndarray, g: np.ndarray, kappa: float = 1.0) -> float:
    """Minimum of ``w^H R w`` under ``w^H g = κ``, i.e. ``κ²/(g^H R^{-1} g)``."""
    cf = factor(R)
    return kappa ** 2 / np.vdot(g, solve(cf, g)).real


def replica_adjoint(G: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``b = G^H w``."""
    return G.conj().T @ np.asarray(w, dtype=complex)


def waveform_closed_form(w, Z: np.ndarray, G: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """``s = κ Z^{-1} b / (b^H Z^{-1} b)`` with ``b = G^H w``."""
    b = replica_adjoint(G, w)
    cf = factor(Z, "summed clutter quadratic form")
    u = solve(cf, b)
    c = np.vdot(b, u).real
    return (kappa / c) * u


def strong_duality_value(w, R_in: np.ndarray, Z: np.ndarray, G: np.ndarray,
                         kappa: float = 1.0) -> float:
    """Dual optimum ``w^H(R_i+R_n)w + κ²/(b^H Z^{-1} b)``."""
    w = np.asarray(w, dtype=complex)
    b = replica_adjoint(G, w)
    c = np.vdot(b, solve(factor(Z), b)).real
    return np.vdot(w, R_in @ w).real + kappa ** 2 / c


def _dual_terms(Z, b):
    d, E = np.linalg.eigh(hermitian_part(Z))
    z2 = np.abs(E.conj().T @ b) ** 2
    return d, z2


def lagrange_f(gamma, Z: np.ndarray, b: np.ndarray, kappa: float, power: float):
    """``f(γ) = κ² b^H F^{-2} b − P_o (b^H F^{-1} b)²`` with ``F = Z + γI`` (vectorised)."""
    d, z2 = _dual_terms(Z, b)
    g = np.asarray(gamma, dtype=float)[..., None]
    t1 = np.sum(z2 / (d + g) ** 2, axis=-1)
    t2 = np.sum(z2 / (d + g), axis=-1)
    return kappa ** 2 * t1 - power * t2 ** 2


def waveform_power(gamma, Z: np.ndarray, b: np.ndarray, kappa: float):
    """``||s(γ)||²`` for ``s(γ) = κ F^{-1} b / (b^H F^{-1} b)`` (vectorised)."""
    d, z2 = _dual_terms(Z, b)
    g = np.asarray(gamma, dtype=float)[..., None]
    t1 = np.sum(z2 / (d + g) ** 2, axis=-1)
    t2 = np.sum(z2 / (d + g), axis=-1)
    return kappa ** 2 * t1 / t2 ** 2


def _bracket(power_at, target, start, max_iter):
    """Smallest doubling ``hi`` with ``power_at(hi) < target``; returns (lo, hi, steps)."""
    lo, hi = 0.0, start
    for k in range(1, max_iter + 1):
        if power_at(hi) < target:
            return lo, hi, k
        lo, hi = hi, 2.0 * hi
    raise RootBracketError(f"could not bracket the power multiplier in {max_iter} doublings")


def dual_gamma2(w, Z: np.ndarray, G: np.ndarray, kappa: float, power: float,
                tol_root: float = 1e-12, max_iter: int = 200):
    """Power-constrained waveform update and its multiplier ``γ₂``.

    Tries ``γ₂ = 0`` first (the unconstrained closed form); otherwise solves
    ``||s(γ₂)||² = P_o`` after bracketing on the decreasing map
    ``γ₂ ↦ ||s(γ₂)||²``.  Returns ``(s, report)``.
    """
    b = replica_adjoint(G, w)
    return _power_constrained(b, Z, np.zeros_like(b), 0.0, kappa, power, tol_root, max_iter)


def _prox_waveform_at(gamma, Z, b, s_prev, half, kappa):
    F = Z + (half + gamma) * np.eye(Z.shape[0])
    cf = factor(F, "clutter quadratic form")
    u = solve(cf, b)
    c = np.vdot(b, u).real
    y = solve(cf, s_prev)
    mu = (kappa - half * np.vdot(b, y)) / c
    return half * y + mu * u, mu


def _power_constrained(b, Z, s_prev, half, kappa, power, tol_root, max_iter):
    s0, mu0 = _prox_waveform_at(0.0, Z, b, s_prev, half, kappa)
    p0 = np.vdot(s0, s0).real
    if p0 <= power * (1.0 + 1e-12):
        return s0, DualSolveReport(0.0, 0.0, "analytic-zero", 0, p0, -2.0 * mu0)
    floor = kappa ** 2 / np.vdot(b, b).real
    if floor >= power:
        raise RootBracketError(
            f"power budget {power:.4g} is below the Capon minimum-norm energy {floor:.4g}")

    def excess(g):
        s, _ = _prox_waveform_at(g, Z, b, s_prev, half, kappa)
        return np.vdot(s, s).real / power - 1.0

    start = max(np.linalg.eigvalsh(hermitian_part(Z))[-1] + half, np.finfo(float).tiny) * 1e-6
    lo, hi, steps = _bracket(lambda g: excess(g) + 1.0, 1.0, start, max_iter)
    gamma, res = brentq(excess, lo, hi, xtol=tol_root * hi, rtol=4 * np.finfo(float).eps,
                        maxiter=max_iter, full_output=True)
    s, mu = _prox_waveform_at(gamma, Z, b, s_prev, half, kappa)
    pw = np.vdot(s, s).real
    return s, DualSolveReport(float(gamma), abs(pw - power) / power, "bisection",
                              steps + res.iterations, pw, -2.0 * mu)


def normalize_phase(x: np.ndarray) -> np.ndarray:
    """Rotate so the first entry with non-negligible magnitude is real positive."""
    x = np.asarray(x, dtype=complex)
    mags = np.abs(x)
    if not np.any(mags):
        return x.copy()
    idx = int(np.argmax(mags > 1e-12 * mags.max()))
    return x * np.exp(-1j * np.angle(x[idx]))


def min_eig_waveform(R: np.ndarray, v: np.ndarray, a: np.ndarray, power: float,
                     gap_rtol: float = 1e-8):
    """Waveform whose space-time replica best fits the minimum eigenvector of ``R``.

    Returns ``(s, report)``; ``s`` has energy ``P_o`` and the phase convention of
    ``normalize_phase``.
    """
    v = np.asarray(v, dtype=complex)
    a = np.asarray(a, dtype=complex)
    L, M = v.size, a.size
    lam, U = np.linalg.eigh(hermitian_part(R))
    N = R.shape[0] // (L * M)
    if N * L * M != R.shape[0]:
        raise ValueError("covariance dimension is not a multiple of L*M")
    mu = U[:, 0]
    gap = float(lam[1] - lam[0]) if lam.size > 1 else np.inf
    degenerate = gap < gap_rtol * max(abs(lam[-1]), np.finfo(float).tiny)
    if degenerate:
        warnings.warn(f"minimum eigenvalue is degenerate (gap {gap:.3e})", stacklevel=2)
    G = build_replication(a, v, N).replication
    s_ls = np.linalg.lstsq(G, mu, rcond=None)[0]
    cube = mu.reshape(L, N, M)
    s_dec = np.einsum("l,m,lnm->n", v.conj(), a.conj(), cube) / (
        np.vdot(v, v).real * np.vdot(a, a).real)
    scale = max(np.linalg.norm(s_ls), np.finfo(float).tiny)
    discrepancy = float(np.linalg.norm(s_dec - s_ls) / scale)
    if not np.any(s_dec):
        raise RankDeficiencyError("minimum eigenvector is orthogonal to every waveform replica")
    s = s_dec * np.sqrt(power) / np.linalg.norm(s_dec)
    return normalize_phase(s), MinEigReport(float(lam[0]), gap, bool(degenerate), discrepancy)


def proximal_filter(R: np.ndarray, w_prev: np.ndarray, alpha: float, g: np.ndarray,
                    kappa: float = 1.0) -> np.ndarray:
    """Minimiser of ``w^H R w + (α/2)||w − w_prev||²`` under ``w^H g = κ``.

    ``w = (α/2) A^{-1} w_prev + μ A^{-1} g`` with ``A = R + (α/2) I``; the
    multiplier form is ``μ = −γ₄*/2``.  With ``α = 0`` the arithmetic matches
    ``mvdr_filter`` operation for operation.
    """
    g = np.asarray(g, dtype=complex)
    w_prev = np.asarray(w_prev, dtype=complex)
    half = 0.5 * alpha
    A = R + half * np.eye(R.shape[0])
    cf = factor(A, "loaded covariance")
    u = solve(cf, g)
    c = np.vdot(g, u).real
    y = solve(cf, w_prev)
    mu = (kappa - half * np.vdot(g, y)) / c
    return half * y + mu * u


def projection_onto_capon(x_prev: np.ndarray, g: np.ndarray, kappa: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``x_prev`` onto the hyperplane ``x^H g = κ``."""
    g = np.asarray(g, dtype=complex)
    return x_prev - g * (np.vdot(g, x_prev) - kappa) / np.vdot(g, g).real


def proximal_waveform(w, s_prev, beta: float, Z: np.ndarray, G: np.ndarray,
                      kappa: float = 1.0, power: float = np.inf,
                      tol_root: float = 1e-12, max_iter: int = 200):
    """Minimiser of ``s^H Z s + (β/2)||s − s_prev||²`` under ``b^H s = κ``, ``||s||² ≤ P_o``.

    ``s = F^{-1}((β/2) s_prev + μ b)``, ``F = Z + (β/2 + γ₆) I``; ``μ = −γ₅/2``.
    ``γ₆ = 0`` is kept when it meets the power budget, otherwise the budget is
    met with equality after bracketing.  Returns ``(s, report)``.
    """
    b = replica_adjoint(G, w)
    s_prev = np.asarray(s_prev, dtype=complex)
    return _power_constrained(b, Z, s_prev, 0.5 * beta, kappa, power, tol_root, max_iter)


def proximal_r(gamma, w, s_prev, beta: float, Z: np.ndarray, G: np.ndarray,
               kappa: float, power: float) -> float:
    """Complementary-slackness function ``r(γ₆)`` in its expanded form.

    Equals ``c² (P_o − ||s(γ₆)||²)`` with ``c = b^H F^{-1} b``; the energy term
    of the previous iterate enters through ``s_prev^H F^{-2} s_prev``.
    """
    b = replica_adjoint(G, w)
    s_prev = np.asarray(s_prev, dtype=complex)
    half = 0.5 * beta
    F = Z + (half + gamma) * np.eye(Z.shape[0])
    cf = factor(F)
    Fb = solve(cf, b)
    Fs = solve(cf, s_prev)
    c = np.vdot(b, Fb).real
    c2 = np.vdot(Fb, Fb).real
    a_k = np.vdot(Fs, Fs).real
    x = half * np.vdot(b, Fs)
    dx = -half * np.vdot(Fb, Fs)
    b_r, b_i = x.real, x.imag
    db_r, db_i = dx.real, dx.imag
    return ((power - half ** 2 * a_k) * c ** 2
            - 2.0 * (b_i * db_i + (b_r - kappa) * db_r) * c
            - (b_i ** 2 + (b_r - kappa) ** 2) * c2)


def kkt_residual_cm(Z: np.ndarray, s: np.ndarray) -> float:
    """``||Im{(Z s) ⊙ s*}||_∞``."""
    return float(np.max(np.abs(np.imag((Z @ s) * np.conj(s)))))


def _wrap(x):
    return np.angle(np.exp(1j * x))


def const_mod_waveform(w, Z: np.ndarray, G: np.ndarray, kappa: float = 1.0,
                       modulus: float = 1.0, s_init=None, tol: float = 1e-10,
                       max_sweeps: int = 5000, damping: float = 1.0):
    """Constant-modulus waveform for a fixed filter.

    Coordinate sweeps on the phases (optionally damped) drive ``Im{(Z s) ⊙ s*}`` to zero;
    the modulus is then set so that ``|b^H s| = κ`` and a global rotation makes
    ``b^H s`` real.  ``tol`` applies to the relative residual, the raw residual
    divided by ``λ_max(Z) ρ²``.  Returns ``(s, report)``.
    """
    Z = hermitian_part(np.asarray(Z, dtype=complex))
    b = replica_adjoint(G, w)
    N = Z.shape[0]
    if s_init is None:
        s_init = np.ones(N, dtype=complex)
    phases = np.angle(np.asarray(s_init, dtype=complex))
    s = np.exp(1j * phases)
    scale = max(np.linalg.eigvalsh(Z)[-1], np.finfo(float).tiny)
    diag = np.diag(Z)
    trace = []
    converged = False
    sweeps = 0
    rel = kkt_residual_cm(Z, s) / scale
    if rel <= tol:
        converged = True
    while not converged and sweeps < max_sweeps:
        for i in range(N):
            t = -(Z[i] @ s - diag[i] * s[i])
            if abs(t) == 0.0:
                continue
            step = _wrap(np.angle(t) - phases[i])
            phases[i] = phases[i] + damping * step
            s[i] = np.exp(1j * phases[i])
        sweeps += 1
        trace.append(float(np.vdot(s, Z @ s).real))
        rel = kkt_residual_cm(Z, s) / scale
        converged = rel <= tol
    if not converged:
        warnings.warn(f"constant-modulus phases did not converge (relative KKT residual "
                      f"{rel:.3e} after {sweeps} sweeps)", stacklevel=2)
    proj = np.vdot(b, s)
    if abs(proj) == 0.0:
        raise RankDeficiencyError("constant-modulus waveform is orthogonal to the filter replica")
    rho = kappa / abs(proj)
    s = rho * np.exp(-1j * np.angle(proj)) * s
    raw = kkt_residual_cm(Z, s)
    return s, ConstModReport(raw, raw / (scale * rho ** 2), sweeps, converged, float(rho),
                             [t * rho ** 2 for t in trace])


def real_embedding(B: np.ndarray) -> np.ndarray:
    """``[[Re B, −Im B], [Im B, Re B]]``."""
    B = np.asarray(B)
    return np.block([[B.real, -B.imag], [B.imag, B.real]])


def lipschitz_constants(B: np.ndarray) -> float:
    """Largest eigenvalue of the real embedding of Hermitian ``B``.

    This is the Lipschitz constant of the gradient ``B̄ x̄`` of ``½ x̄ᵀ B̄ x̄``;
    it coincides with ``λ_max(B)``.
    """
    return float(np.linalg.eigvalsh(real_embedding(hermitian_part(B)))[-1])


def largest_eigenvalue(B: np.ndarray, dense_below: int = 200) -> float:
    """``λ_max`` of Hermitian ``B``; Lanczos for large matrices.

    Same value as ``lipschitz_constants`` without doubling the dimension.
    """
    B = np.asarray(B)
    n = B.shape[0]
    if n <= dense_below:
        return float(np.linalg.eigvalsh(hermitian_part(B))[-1])
    return float(eigsh(B, k=1, which="LA", tol=0, v0=np.ones(n, dtype=B.dtype),
                       return_eigenvectors=False)[0])


def spectral_report(A: np.ndarray, rtol: float = 1e-10) -> SpectralReport:
    lam = np.linalg.eigvalsh(hermitian_part(A))[::-1]
    thresh = rtol * max(abs(lam[0]), abs(lam[-1]), np.finfo(float).tiny)
    return SpectralReport(lam, int(np.sum(lam > thresh)))


def rank_one_diff_eigs(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """The two possibly non-zero eigenvalues of ``x x^H − y y^H``.

    Ordered as ``λ₁ = t/2 + sgn(t) r``, ``λ₂ = t/2 − sgn(t) r`` with
    ``t = ||x||² − ||y||²``, ``r = ½ sqrt(t² + 4(||x||²||y||² − |x^H y|²))`` and
    ``sgn(0) = +1``.  ``λ₂`` is recovered from ``λ₁ λ₂ = −(||x||²||y||² − |x^H y|²)``
    to avoid cancellation.
    """
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    nx, ny = np.vdot(x, x).real, np.vdot(y, y).real
    # ||x||²||y||² − |x^H y|² = ||x||² ||y⊥||² without cancellation
    if nx > 0:
        y_perp = y - x * (np.vdot(x, y) / nx)
        det = nx * np.vdot(y_perp, y_perp).real
    else:
        det = 0.0
    t = nx - ny
    if abs(t) <= 8 * np.finfo(float).eps * (nx + ny):
        t = 0.0  # equal norms up to rounding
    sgn = 1.0 if t >= 0 else -1.0
    r = 0.5 * np.sqrt(t * t + 4.0 * det)
    lam1 = 0.5 * t + sgn * r
    lam2 = -det / lam1 if lam1 != 0.0 else 0.0
    return float(lam1), float(lam2)


def trace_bounds(A: np.ndarray, B: np.ndarray) -> tuple[float, float]:
    """Bounds ``Σ λ_i(A) λ_{N−i+1}(B) ≤ Tr{AB} ≤ Σ λ_i(A) λ_i(B)`` (descending order)."""
    la = np.linalg.eigvalsh(hermitian_part(A))[::-1]
    lb = np.linalg.eigvalsh(hermitian_part(B))[::-1]
    return float(la @ lb[::-1]), float(la @ lb)


def rayleigh_bounds(A: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    """``(λ_min ||x||², λ_max ||x||²)`` bracketing ``x^H A x``."""
    lam = np.linalg.eigvalsh(hermitian_part(A))
    n2 = np.vdot(x, x).real
    return float(lam[0] * n2), float(lam[-1] * n2)
