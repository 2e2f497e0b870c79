"""Evaluation and verification: objective, bounds, probes, patterns, ROC and SINR loss."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import eigsh
from scipy.stats import ncx2

from .covariance import (CovarianceModel, complex_gaussian, covariance_factor,
                         sample_covariance)
from .optim import (factor, hermitian_part, mvdr_filter, proximal_filter, rank_one_diff_eigs,
                    solve)
from .scene import normalized_temporal_steering, spatial_steering


def objective(w, s, model: CovarianceModel) -> float:
    """``w^H R_u(s) w``."""
    w = np.asarray(w, dtype=complex)
    return float(np.vdot(w, model.total_covariance(s) @ w).real)


def objective_split(w, s, model: CovarianceModel) -> float:
    """Same value through ``w^H (R_i + R_n) w + Σ_q s^H Z_q(w) s``."""
    w = np.asarray(w, dtype=complex)
    s = np.asarray(s, dtype=complex)
    base = np.vdot(w, model.interference_noise @ w).real
    return float(base + np.vdot(s, model.zq_sum(w) @ s).real)


def extreme_eigenvalues(R: np.ndarray) -> tuple[float, float]:
    """``(λ_min, λ_max)`` of Hermitian ``R`` from a dense solver."""
    lam = np.linalg.eigvalsh(hermitian_part(R))
    return float(lam[0]), float(lam[-1])


class EigenTracker:
    """Extreme eigenvalues along a slowly varying sequence of Hermitian PD matrices.

    The first matrix is handled densely.  Afterwards ``λ_max`` comes from
    Lanczos and ``λ_min`` from inverse iteration on a Cholesky factor, both
    started from the previous extreme eigenvectors.
    """

    def __init__(self, rtol: float = 1e-9, max_inverse: int = 50):
        self.rtol = rtol
        self.max_inverse = max_inverse
        self._lo = None
        self._hi = None

    def __call__(self, R: np.ndarray) -> tuple[float, float]:
        if self._lo is None:
            lam, U = np.linalg.eigh(hermitian_part(R))
            self._lo, self._hi = U[:, 0], U[:, -1]
            return float(lam[0]), float(lam[-1])
        val, vec = eigsh(R, k=1, which="LA", v0=self._hi, tol=0)
        self._hi = vec[:, 0]
        cf = factor(R)
        x = self._lo
        lam_min = np.inf
        for _ in range(self.max_inverse):
            x = solve(cf, x)
            x /= np.linalg.norm(x)
            rq = np.vdot(x, R @ x).real
            done = abs(lam_min - rq) <= self.rtol * abs(rq)
            lam_min = rq
            if done:
                break
        self._lo = x
        return float(lam_min), float(val[0])


class GapMonitor:
    """Driver hook collecting a ``GapBoundsReport`` for every consecutive filter pair."""

    def __init__(self, tracker: EigenTracker | None = None):
        self.tracker = EigenTracker() if tracker is None else tracker
        self.reports: list[GapBoundsReport] = []

    def __call__(self, w_k, w_k1, R):
        self.reports.append(gap_bounds(w_k, w_k1, R, self.tracker(R)))

    def all_hold(self, rtol: float = 1e-9) -> bool:
        return all(r.holds(rtol) for r in self.reports)


@dataclass
class GapBoundsReport:
    """Lower/upper bounds on ``g(w_k, s_k) − g(w_{k+1}, s_k)``.

    Index 0 is the quadratic form of the iterate difference, 1 the Rayleigh
    quotient bounds, 2 the trace bounds from the rank-two difference.
    """

    lower: tuple
    upper: tuple
    gap: float
    scale: float = 1.0

    def holds(self, rtol: float = 1e-9) -> bool:
        slack = rtol * self.scale
        return max(self.lower) <= self.gap + slack and self.gap <= min(self.upper) + slack


def gap_bounds(w_k, w_k1, R: np.ndarray,
               eigs: tuple[float, float] | None = None) -> GapBoundsReport:
    """All three bound pairs for ``w_k^H R w_k − w_{k+1}^H R w_{k+1}``.

    ``eigs`` supplies ``(λ_min, λ_max)`` of ``R`` when already known.
    """
    w_k = np.asarray(w_k, dtype=complex)
    w_k1 = np.asarray(w_k1, dtype=complex)
    lam_min, lam_max = extreme_eigenvalues(R) if eigs is None else eigs
    g_k = np.vdot(w_k, R @ w_k).real
    g_k1 = np.vdot(w_k1, R @ w_k1).real
    d = w_k - w_k1
    quad = np.vdot(d, R @ d).real
    n0, n1 = np.vdot(w_k, w_k).real, np.vdot(w_k1, w_k1).real
    l1, l2 = rank_one_diff_eigs(w_k, w_k1)
    lp, lm = max(l1, l2), min(l1, l2)
    lower = (0.0, lam_min * n0 - lam_max * n1, lam_max * lm + lam_min * lp)
    upper = (quad, lam_max * n0 - lam_min * n1, lam_max * lp + lam_min * lm)
    return GapBoundsReport(tuple(map(float, lower)), tuple(map(float, upper)),
                           float(g_k - g_k1), float(max(abs(g_k), abs(g_k1))))


def convexity_probe(model: CovarianceModel, trials: int, seed: int = 0,
                    slack: float = 1e-9, endpoints: bool = False) -> dict:
    """Count Jensen-inequality violations of ``g`` in ``s`` (fixed ``w``) and in ``w`` (fixed ``s``).

    Slack is relative to the right-hand side.  With ``endpoints`` the mixing
    weight is drawn from ``{0, 1}`` and the two sides must agree to rounding.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    D, N = model.dim, model.num_samples
    counts = {"s": 0, "w": 0}
    for _ in range(trials):
        t = float(rng.integers(0, 2)) if endpoints else rng.uniform()
        w = complex_gaussian(rng, D)
        s1, s2 = complex_gaussian(rng, N), complex_gaussian(rng, N)
        lhs = objective_split(w, t * s1 + (1 - t) * s2, model)
        rhs = t * objective_split(w, s1, model) + (1 - t) * objective_split(w, s2, model)
        counts["s"] += lhs > rhs + slack * abs(rhs)
        s = complex_gaussian(rng, N)
        R = model.total_covariance(s)
        w1, w2 = complex_gaussian(rng, D), complex_gaussian(rng, D)
        q = lambda x: np.vdot(x, R @ x).real  # noqa: E731
        lhs = q(t * w1 + (1 - t) * w2)
        rhs = t * q(w1) + (1 - t) * q(w2)
        counts["w"] += lhs > rhs + slack * abs(rhs)
    return {k: int(v) for k, v in counts.items()}


@dataclass
class PatternGrid:
    doppler: np.ndarray
    azimuth: np.ndarray
    elevation: float
    values: np.ndarray

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.doppler[i]), float(self.azimuth[j])


def adapted_pattern(w, s, model: CovarianceModel, geom, elevation: float,
                    doppler=None, azimuth=None) -> PatternGrid:
    """``|w^H (v(f) ⊗ s ⊗ a(θ, φ))|²`` on a normalized-Doppler by azimuth grid."""
    doppler = np.linspace(-0.5, 0.5, 64) if doppler is None else np.asarray(doppler, float)
    azimuth = np.linspace(-np.pi / 2, np.pi / 2, 64) if azimuth is None else np.asarray(azimuth, float)
    L, N, M = model.shape
    W = np.asarray(w, dtype=complex).reshape(L, N, M)
    # Contract the waveform first: h[l, m] = Σ_n conj(w[l, n, m]) s[n].
    h = np.einsum("lnm,n->lm", W.conj(), np.asarray(s, dtype=complex))
    V = np.array([normalized_temporal_steering(f, L) for f in doppler])
    A = np.array([spatial_steering(th, elevation, geom) for th in azimuth])
    resp = V @ h @ A.T
    return PatternGrid(doppler, azimuth, float(elevation), np.abs(resp) ** 2)


def classical_pattern(w, s, model: CovarianceModel, geom, elevation: float,
                      doppler, azimuth) -> np.ndarray:
    """Slow-time pattern with the modified spatial steering ``s ⊗ a(θ, φ)``."""
    L, N, M = model.shape
    s = np.asarray(s, dtype=complex)
    w = np.asarray(w, dtype=complex)
    out = np.empty((len(doppler), len(azimuth)))
    for j, th in enumerate(azimuth):
        mod = np.kron(s, spatial_steering(th, elevation, geom))
        for i, f in enumerate(doppler):
            out[i, j] = abs(np.vdot(w, np.kron(normalized_temporal_steering(f, L), mod))) ** 2
    return out


@dataclass
class RocCurve:
    pfa: np.ndarray
    pd: np.ndarray
    sinr_db: float
    trials: int
    threshold: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warning: str = ""


def output_sinr(w, s, model: CovarianceModel, rho_t: complex = 1.0) -> float:
    w = np.asarray(w, dtype=complex)
    sig = abs(rho_t) ** 2 * abs(np.vdot(w, model.steering(s))) ** 2
    return float(sig / objective(w, s, model))


def marcum_pd(sinr_linear: float, pfa) -> np.ndarray:
    """``Q₁(√(2 SINR), √(−2 ln P_fa))`` for the envelope of a complex Gaussian output."""
    pfa = np.asarray(pfa, dtype=float)
    return ncx2.sf(-2.0 * np.log(pfa), 2, 2.0 * sinr_linear)


def roc_curve(w, s, model: CovarianceModel, sinr_db: float, trials: int, pfa_grid,
              seed: int = 0, rho_t: complex | None = None, threshold: str = "analytic",
              method: str = "snapshot", chunk: int = 20000) -> RocCurve:
    """Monte Carlo ROC for the statistic ``|w^H ȳ|`` under complex Gaussian interference.

    The target amplitude is scaled to reach ``sinr_db`` unless ``rho_t`` is
    given.  ``method="snapshot"`` draws full interference snapshots
    ``y_u ~ CN(0, R_u(s))``; ``"scalar"`` draws the filter output directly as
    ``σ z`` with ``z ~ CN(0, 1)``, so two filters evaluated with the same seed
    share their random numbers.  Thresholds come from the exact null law
    ``|w^H y_u|² ~ σ² Exp(1)`` (``threshold="analytic"``) or from empirical
    quantiles of a separate set of null draws (``"empirical"``).
    """
    pfa_grid = np.asarray(pfa_grid, dtype=float)
    if np.any((pfa_grid <= 0) | (pfa_grid >= 1)):
        raise ValueError("P_fa grid must lie in (0, 1)")
    if method not in ("snapshot", "scalar"):
        raise ValueError("method must be 'snapshot' or 'scalar'")
    rng = np.random.default_rng(seed)
    w = np.asarray(w, dtype=complex)
    s = np.asarray(s, dtype=complex)
    R = model.total_covariance(s)
    sigma2 = np.vdot(w, R @ w).real
    resp = np.vdot(w, model.steering(s))
    if rho_t is None:
        rho_t = np.sqrt(10 ** (sinr_db / 10) * sigma2) / abs(resp)
    sinr = abs(rho_t) ** 2 * abs(resp) ** 2 / sigma2
    note = ""
    floor = 10.0 / trials
    if pfa_grid.min() < floor:
        note = f"P_fa below {floor:.1e} is unreliable with {trials} trials"
        warnings.warn(note, stacklevel=2)
    if method == "snapshot":
        # w^H y_u for y_u = F z equals (F^H w)^H z; only that projection is needed.
        proj = covariance_factor(R).conj().T @ w

        def null_draws(n):
            out = np.empty(n, dtype=complex)
            for i in range(0, n, chunk):
                m = min(chunk, n - i)
                out[i:i + m] = complex_gaussian(rng, (m, proj.size)) @ proj.conj()
            return out
    else:
        def null_draws(n):
            return np.sqrt(sigma2) * complex_gaussian(rng, n)
    h1 = rho_t * resp + null_draws(trials)
    if threshold == "analytic":
        thr = np.sqrt(-sigma2 * np.log(pfa_grid))
    elif threshold == "empirical":
        thr = np.quantile(np.abs(null_draws(trials)), 1.0 - pfa_grid)
    else:
        raise ValueError("threshold must be 'analytic' or 'empirical'")
    pd = np.mean(np.abs(h1)[:, None] > thr[None, :], axis=0)
    return RocCurve(pfa_grid, pd, float(10 * np.log10(sinr)), trials, thr, note)


def sinr_loss_mc(model: CovarianceModel, s_oracle, supports, trials: int, seed: int = 0,
                 loading: float = 0.0, kappa: float = 1.0) -> dict:
    """Oracle SINR loss ``w_o^H R_u w_o / (w_est^H R̂_u w_est)`` for each sample support.

    Snapshots are drawn from ``CN(0, R_u(s_oracle))``; when ``K`` is below the
    dimension the estimate is diagonally loaded by ``loading`` (required
    positive in that regime).  Returns per-``K`` arrays of linear losses.
    """
    s_oracle = np.asarray(s_oracle, dtype=complex)
    R = model.total_covariance(s_oracle)
    g = model.steering(s_oracle)
    w_o = mvdr_filter(R, g, kappa)
    num = np.vdot(w_o, R @ w_o).real
    F = covariance_factor(R)
    rng = np.random.default_rng(seed)
    out = {}
    for K in supports:
        K = int(K)
        if K < 1:
            raise ValueError("sample support must be >= 1")
        delta = loading if K < model.dim else 0.0
        if K < model.dim and delta <= 0:
            raise ValueError(f"K={K} below dimension {model.dim} needs positive loading")
        losses = np.empty(trials)
        for t in range(trials):
            Z = complex_gaussian(rng, (K, F.shape[1]))
            R_hat = sample_covariance(Z @ F.T, delta)
            w_est = mvdr_filter(R_hat, g, kappa)
            losses[t] = num / np.vdot(w_est, R_hat @ w_est).real
        out[K] = losses
    return out


def loss_summary(losses: dict) -> dict:
    """Mean and standard deviation per support, linear and in dB of the mean."""
    return {K: {"mean": float(np.mean(v)), "std": float(np.std(v, ddof=1)) if v.size > 1 else 0.0,
                "mean_db": float(10 * np.log10(np.mean(v)))} for K, v in losses.items()}


def rmb_mean_loss(K: int, dim: int) -> float:
    """Expected ratio ``g^H R̂^{-1} g / g^H R^{-1} g`` for ``K`` snapshots, ``K/(K − D)``."""
    if K <= dim:
        raise ValueError("needs K > dim")
    return K / (K - dim)


def orthogonal_clutter_check(model: CovarianceModel, s) -> dict:
    """Quadratic form ``g^H R_u^{-1} g`` against ``||g||²/λ_min(R_i + R_n)``.

    Agreement holds when ``g = G s`` is a minimum eigenvector of ``R_i + R_n``
    and the clutter covariance annihilates ``g``.
    """
    g = model.steering(s)
    R = model.total_covariance(s)
    quad = np.vdot(g, solve(factor(R), g)).real
    lam = np.linalg.eigvalsh(hermitian_part(model.interference_noise))
    clutter_leak = float(np.linalg.norm(model.clutter_covariance(s) @ g) / np.linalg.norm(g))
    return {"quadratic_form": float(quad), "predicted": float(np.vdot(g, g).real / lam[0]),
            "clutter_leak": clutter_leak}


def clutter_rank(model: CovarianceModel, s, rtol: float = 1e-10) -> int:
    lam = np.linalg.eigvalsh(model.clutter_covariance(s))
    return int(np.sum(lam > rtol * max(lam[-1], np.finfo(float).tiny)))


def proximal_loaded_filter(R_hat, g, alpha, kappa=1.0):
    """Filter for a rank-deficient estimate via the proximal (loaded) update from zero."""
    return proximal_filter(R_hat, np.zeros_like(g), alpha, g, kappa)


def in_resolution_cell(doppler, azimuth, target_doppler, target_azimuth, elevation,
                       geom, num_pulses: int) -> bool:
    """Whether ``(doppler, azimuth)`` lies within half a Rayleigh cell of the target.

    Doppler resolution is ``1/L`` (normalized), spatial-frequency resolution
    ``λ/(M d)``.
    """
    from .scene import spatial_frequency
    d_nu = abs(spatial_frequency(azimuth, elevation, geom)
               - spatial_frequency(target_azimuth, elevation, geom))
    d_fd = abs((doppler - target_doppler + 0.5) % 1.0 - 0.5)
    return bool(d_fd <= 0.5 / num_pulses
                and d_nu <= 0.5 * geom.wavelength / (geom.num_elements * geom.element_spacing))
