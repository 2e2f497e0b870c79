"""Alternating-minimization loops (AM, proximal AM, constant modulus) with iterate traces.

All three algorithms run through ``_alternate``: a filter step for the
current waveform followed by a waveform step for the new filter.  The
proximal loop with zero weights performs exactly the arithmetic of AM, so
the two traces agree bit for bit.
"""

from __future__ import annotations

import dataclasses
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovarianceModel, complex_gaussian
from .optim import (AlgoConfig, RankDeficiencyError, RootBracketError, const_mod_waveform,
                    dual_gamma2, largest_eigenvalue, min_eig_waveform, mvdr_filter, projection_onto_capon,
                    proximal_filter, proximal_waveform, waveform_closed_form)

WORKERS_ENV = "WASTAP_WORKERS"

REASONS = ("converged", "power-violation", "max-iter", "solver-error")


@dataclass
class OptimState:
    """One accepted iterate ``(w_k, s_k)``.

    ``filter_objective`` is ``g(w_k, s_{k-1})``, the value after the filter
    step and before the waveform step.
    """

    k: int
    w: np.ndarray
    s: np.ndarray
    objective: float
    filter_objective: float
    residual: float
    power: float
    spread: float
    displacement: float
    gamma: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    wall_ms: float = 0.0
    note: str = ""


@dataclass
class RunTrace:
    algorithm: str
    states: list = field(default_factory=list)
    reason: str = "max-iter"
    message: str = ""
    seed: int | None = None
    config: dict = field(default_factory=dict)
    s_init: np.ndarray | None = None
    wall_time: float = 0.0

    def __len__(self):
        return len(self.states)

    @property
    def objectives(self) -> np.ndarray:
        return np.array([st.objective for st in self.states])

    @property
    def final(self) -> OptimState:
        if not self.states:
            raise IndexError("empty trace")
        return self.states[-1]

    def chain(self) -> np.ndarray:
        """Interleaved sequence ``g(w_1, s_0), g(w_1, s_1), g(w_2, s_1), ...``."""
        return np.array([v for st in self.states for v in (st.filter_objective, st.objective)])

    def is_monotone(self, rtol: float = 1e-10, atol: float = 0.0) -> bool:
        """Objective chain non-increasing up to ``rtol·g₀ + atol``."""
        seq = self.chain()
        if seq.size < 2:
            return True
        return bool(np.all(np.diff(seq) <= rtol * seq[0] + atol))

    def rows(self, wall: bool = False) -> list[dict]:
        out = []
        for st in self.states:
            row = {"k": st.k, "objective": st.objective, "residual": st.residual,
                   "power": st.power, "spread": st.spread}
            if wall:
                row["wall_ms"] = st.wall_ms
            out.append(row)
        return out


def gaussian_init(num_samples: int, rng: np.random.Generator, power: float | None = None):
    """i.i.d. standard complex Gaussian samples, rescaled to energy ``power`` if given."""
    s = complex_gaussian(rng, num_samples)
    if power is not None:
        s = s * np.sqrt(power) / np.linalg.norm(s)
    return s


def chirp_init(num_samples: int, modulus: float = 1.0) -> np.ndarray:
    """Unit-bandwidth linear FM samples ``ρ exp(jπ n²/N)``."""
    n = np.arange(num_samples)
    return modulus * np.exp(1j * np.pi * n ** 2 / num_samples)


def initial_waveform(model: CovarianceModel, config: AlgoConfig, kind: str = "gaussian",
                     seed: int | None = None) -> np.ndarray:
    """``kind`` is ``gaussian`` (scaled to ``P_o``), ``gaussian-raw``, ``chirp``,
    ``unimodular`` (modulus ``ρ``, uniform random phases) or ``mineig`` (the
    minimum-eigenvector design of ``R_i + R_n`` at energy ``P_o``)."""
    N = model.num_samples
    if kind == "chirp":
        return chirp_init(N, config.modulus)
    if kind == "mineig":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s, _ = min_eig_waveform(model.interference_noise, model.temporal, model.spatial,
                                    config.power)
        return s
    rng = np.random.default_rng(config.seed if seed is None else seed)
    if kind == "gaussian":
        return gaussian_init(N, rng, config.power)
    if kind == "gaussian-raw":
        return gaussian_init(N, rng)
    if kind == "unimodular":
        return config.modulus * np.exp(1j * rng.uniform(-np.pi, np.pi, N))
    raise ValueError(f"unknown initialization {kind!r}")


def _spread(s):
    m = np.abs(s)
    return float(m.max() - m.min())


def _converged(objs, disp, config: AlgoConfig) -> bool:
    if len(objs) <= config.patience or disp >= config.tol_disp:
        return False
    recent = np.asarray(objs[-config.patience - 1:])
    rel = np.abs(np.diff(recent)) / np.maximum(np.abs(recent[:-1]), np.finfo(float).tiny)
    return bool(np.all(rel < config.tol_obj))


def _alternate(model: CovarianceModel, s0, w0, config: AlgoConfig, algorithm: str,
               filter_step, waveform_step, max_iter: int, use_tolerance: bool,
               seed=None, monitor=None) -> RunTrace:
    trace = RunTrace(algorithm, seed=seed, config=dataclasses.asdict(config),
                     s_init=np.array(s0, dtype=complex))
    G = model.replication
    s_prev = np.array(s0, dtype=complex)
    w_prev = None if w0 is None else np.array(w0, dtype=complex)
    objs = []
    start = time.perf_counter()
    reason = "max-iter"
    R = None
    for k in range(1, max_iter + 1):
        t0 = time.perf_counter()
        try:
            if R is None:
                R = model.total_covariance(s_prev)
            g = model.steering(s_prev)
            w, alpha = filter_step(R, g, w_prev)
            filt_obj = float(np.vdot(w, R @ w).real)
            if monitor is not None and trace.states:
                monitor(w_prev, w, R)
            Z = model.zq_sum(w)
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                s, gamma, beta, stop = waveform_step(w, Z, G, s_prev)
        except (RankDeficiencyError, RootBracketError, np.linalg.LinAlgError) as exc:
            reason, trace.message = "solver-error", f"iteration {k}: {exc}"
            break
        if stop:
            reason, trace.message = "power-violation", (
                f"iteration {k}: waveform energy {np.vdot(s, s).real:.6g} exceeds "
                f"{config.power:.6g}")
            break
        R_next = model.total_covariance(s)
        obj = float(np.vdot(w, R_next @ w).real)
        disp = float(np.linalg.norm(s - s_prev) / max(np.linalg.norm(s), np.finfo(float).tiny))
        note = "; ".join(str(c.message) for c in caught)
        trace.states.append(OptimState(
            k, w, s, obj, filt_obj, float(abs(np.vdot(w, G @ s) - config.kappa)),
            float(np.vdot(s, s).real), _spread(s), disp, float(gamma), float(alpha),
            float(beta), 1e3 * (time.perf_counter() - t0), note))
        objs.append(obj)
        s_prev, w_prev, R = s, w, R_next
        if use_tolerance and _converged(objs, disp, config):
            reason = "converged"
            break
    trace.reason = reason
    trace.wall_time = time.perf_counter() - start
    return trace


def run_am(model: CovarianceModel, s_init, config: AlgoConfig, seed=None,
           monitor=None) -> RunTrace:
    """Constrained alternating minimization: MVDR filter, then power-constrained waveform.

    With ``config.stop_on_power_violation`` the waveform step is the
    unconstrained closed form and the run stops at the first iterate whose
    energy exceeds ``P_o``; otherwise the budget is enforced through ``γ₂``.
    ``monitor(w_k, w_{k+1}, R_u(s_k))`` is called after every filter step
    past the first.
    """
    def filter_step(R, g, w_prev):
        return mvdr_filter(R, g, config.kappa), 0.0

    def waveform_step(w, Z, G, s_prev):
        if config.stop_on_power_violation:
            s = waveform_closed_form(w, Z, G, config.kappa)
            return s, 0.0, 0.0, np.vdot(s, s).real > config.power
        s, rep = dual_gamma2(w, Z, G, config.kappa, config.power, config.tol_root)
        return s, rep.gamma, 0.0, False

    return _alternate(model, s_init, None, config, "am", filter_step, waveform_step,
                      config.max_iter, True, seed, monitor)


def _weights(config: AlgoConfig, matrix, fixed):
    if config.prox_mode == "lipschitz":
        return config.prox_scale * largest_eigenvalue(matrix)
    return fixed


def run_pam(model: CovarianceModel, warm_start, config: AlgoConfig, seed=None,
            max_iter: int | None = None, use_tolerance: bool = False) -> RunTrace:
    """Proximal alternating minimization.

    ``warm_start`` is either a ``RunTrace`` (continue from its final pair) or an
    initial waveform; in the latter case the previous filter is the projection
    of the matched filter onto the Capon hyperplane.  By default the loop runs
    the full ``max_iter`` budget.
    """
    if isinstance(warm_start, RunTrace):
        if warm_start.states:
            s0, w0 = warm_start.final.s, warm_start.final.w
        else:
            s0, w0 = warm_start.s_init, None
        seed = warm_start.seed if seed is None else seed
    else:
        s0, w0 = np.asarray(warm_start, dtype=complex), None
    if w0 is None:
        g0 = model.steering(s0)
        w0 = projection_onto_capon(g0, g0, config.kappa)

    def filter_step(R, g, w_prev):
        alpha = _weights(config, R, config.alpha)
        return proximal_filter(R, w_prev, alpha, g, config.kappa), alpha

    def waveform_step(w, Z, G, s_prev):
        beta = _weights(config, Z, config.beta)
        s, rep = proximal_waveform(w, s_prev, beta, Z, G, config.kappa, config.power,
                                   config.tol_root)
        return s, rep.gamma, beta, False

    budget = config.max_iter if max_iter is None else max_iter
    return _alternate(model, s0, w0, config, "pam", filter_step, waveform_step, budget,
                      use_tolerance, seed)


def run_cm(model: CovarianceModel, s_init, config: AlgoConfig, seed=None) -> RunTrace:
    """Alternating minimization with constant-modulus waveforms (phase-only updates).

    The power budget is not enforced; the modulus follows from the Capon
    constraint.  Inner non-convergence is recorded in the state note.
    """
    def filter_step(R, g, w_prev):
        return mvdr_filter(R, g, config.kappa), 0.0

    def waveform_step(w, Z, G, s_prev):
        s, rep = const_mod_waveform(w, Z, G, config.kappa, config.modulus, s_prev,
                                    config.tol_kkt, config.cm_max_sweeps, config.cm_damping)
        return s, 0.0, 0.0, False

    return _alternate(model, s_init, None, config, "cm", filter_step, waveform_step,
                      config.max_iter, True, seed)


def run_rank_deficient(loaded: CovarianceModel, raw: CovarianceModel, s_init,
                       config: AlgoConfig, am_iters: int = 20, pam_iters: int = 50,
                       seed=None) -> tuple[RunTrace, RunTrace]:
    """AM on the loaded estimate, then proximal AM on the unloaded one from its end point."""
    am = run_am(loaded, s_init, dataclasses.replace(config, max_iter=am_iters), seed=seed)
    pam = run_pam(raw, am, config, seed=seed, max_iter=pam_iters)
    return am, pam


RUNNERS = {"am": run_am, "pam": run_pam, "cm": run_cm}


def trial_seeds(master: int, count: int) -> list[int]:
    """Independent per-trial seeds derived from one master seed."""
    return [int(ss.generate_state(1, np.uint64)[0])
            for ss in np.random.SeedSequence(master).spawn(count)]


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return default
    return max(1, n)


_POOL_MODEL = None


def _pool_init(model):
    global _POOL_MODEL
    _POOL_MODEL = model


def _one_trial(args):
    algorithm, config, init, seed = args
    return _run_seeded(_POOL_MODEL, algorithm, config, init, seed)


def _run_seeded(model, algorithm, config, init, seed):
    cfg = dataclasses.replace(config, seed=seed)
    s0 = initial_waveform(model, cfg, init, seed)
    return RUNNERS[algorithm](model, s0, cfg, seed=seed)


def run_trials(model: CovarianceModel, algorithm: str, config: AlgoConfig, count: int,
               master_seed: int = 0, init: str = "gaussian", workers: int | None = None):
    """Run ``count`` independent initializations; results are ordered by trial index.

    Seeds are fixed before dispatch, so the output does not depend on the
    number of workers.
    """
    if algorithm not in RUNNERS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    seeds = trial_seeds(master_seed, count)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or count <= 1:
        return [_run_seeded(model, algorithm, config, init, sd) for sd in seeds]
    with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                             initargs=(model,)) as pool:
        return list(pool.map(_one_trial, [(algorithm, config, init, sd) for sd in seeds]))
