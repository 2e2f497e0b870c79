"""Command-line entry point: ``wastap <command> --scenario <file> [options]``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (adapted_pattern, loss_summary, marcum_pd, objective, output_sinr,
                       rmb_mean_loss, roc_curve, sinr_loss_mc)
from .driver import (initial_waveform, run_am, run_pam, run_rank_deficient,
                     run_trials, trial_seeds)
from .export import TRACE_COLUMNS, trace_header, write_table
from .optim import (RankDeficiencyError, RootBracketError, lagrange_f, largest_eigenvalue,
                    min_eig_waveform, mvdr_filter, proximal_r, replica_adjoint)
from .scenario import (ScenarioError, build_model, bundled_scenario, parse_scenario,
                       training_models)

COMMANDS = ("am", "pam", "cm", "mineig", "pattern", "roc", "rmb", "duals")

EPILOG = """\
output files (one per trial or curve, in --out):
  am/pam/cm   <cmd>_trial<i>.<ext>   columns k, objective, residual, power, spread
              (+ wall_ms with --wall); objective = w^H R_u(s) w after iteration k,
              residual = |w^H G s - kappa|, power = ||s||^2, spread = max|s_n| - min|s_n|
  mineig      mineig.<ext>           columns n, re, im, abs (waveform samples)
  pattern     pattern.<ext>          columns doppler, azimuth, power
  roc         roc.<ext>              columns sinr_db, waveform, pfa, pd, oracle,
                                     achieved_sinr_db
  rmb         rmb.<ext>              columns K, mean, std, mean_db, rmb_db
  duals       duals.<ext>            columns curve, gamma, value
Every header carries the scenario hash, seed and the algorithm settings.
Set WASTAP_WORKERS to fan trials out over processes.
"""


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wastap", description="Joint STAP filter and waveform design experiments.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", default="baseline",
                   help="scenario JSON file or bundled name (baseline, ring, rank_deficient)")
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--trials", type=int, default=1,
                   help="random initializations (am/pam/cm) or Monte Carlo trials (roc/rmb)")
    p.add_argument("--seed", type=int, default=None, help="master seed (default: scenario seed)")
    p.add_argument("--desk-scale", action="store_true", help="use M=3, L=8, N=4")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--init", choices=("gaussian", "gaussian-raw", "chirp", "unimodular"),
                   default=None, help="initial waveform (default: chirp for cm, else gaussian)")
    p.add_argument("--power-stop", action="store_true",
                   help="am: stop at the first iterate exceeding the power budget")
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--wall", action="store_true", help="include per-iteration wall time")
    return p


def _resolve(name: str) -> Path:
    path = Path(name)
    if path.exists() or path.suffix:
        return path
    return bundled_scenario(name)


class _Context:
    def __init__(self, args):
        self.args = args
        self.scen, cfg = parse_scenario(_resolve(args.scenario), desk=args.desk_scale)
        self.seed = cfg.seed if args.seed is None else args.seed
        updates = {"seed": self.seed}
        if args.max_iter is not None:
            updates["max_iter"] = args.max_iter
        if args.power_stop:
            updates["stop_on_power_violation"] = True
        self.cfg = dataclasses.replace(cfg, **updates)
        self.model = build_model(self.scen)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.ext = args.format

    def header(self, **extra):
        head = {"scenario_hash": self.scen.digest, "scenario": self.scen.document.get("name"),
                "desk_scale": self.args.desk_scale, "seed": self.seed,
                "command": self.args.command, "version": __version__}
        head.update(extra)
        return head

    def write(self, stem, header, rows, columns=None):
        return write_table(self.out / f"{stem}.{self.ext}", header, rows, self.ext, columns)

    def write_trace(self, stem, trace):
        head = trace_header(trace, self.scen.digest, {
            "scenario": self.scen.document.get("name"), "desk_scale": self.args.desk_scale,
            "command": self.args.command, "version": __version__})
        cols = TRACE_COLUMNS + (("wall_ms",) if self.args.wall else ())
        return self.write(stem, head, trace.rows(self.args.wall), cols)

    def optimized_pair(self, init="gaussian"):
        """Final ``(w, s)`` of one AM run from the master seed."""
        trace = run_am(self.model, initial_waveform(self.model, self.cfg, init, self.seed),
                       self.cfg, seed=self.seed)
        if not trace.states:
            raise RankDeficiencyError(f"optimization produced no iterate ({trace.message})")
        return trace.final.w, trace.final.s


def _failed(traces) -> list[str]:
    return [f"trial {i}: {t.message}" for i, t in enumerate(traces) if t.reason == "solver-error"]


def cmd_trials(ctx: _Context):
    args = ctx.args
    algo = args.command
    init = args.init or ("chirp" if algo == "cm" else "gaussian")
    if algo == "pam":
        traces = []
        for i, sd in enumerate(trial_seeds(ctx.seed, args.trials)):
            cfg = dataclasses.replace(ctx.cfg, seed=sd)
            s0 = initial_waveform(ctx.model, cfg, init, sd)
            if ctx.scen.training is not None:
                loaded, raw = training_models(ctx.scen, ctx.model)
                am, pam = run_rank_deficient(loaded, raw, s0, cfg, seed=sd)
            else:
                am = run_am(ctx.model, s0, cfg, seed=sd)
                pam = run_pam(ctx.model, am, cfg, seed=sd)
            ctx.write_trace(f"am_trial{i:03d}", am)
            ctx.write_trace(f"pam_trial{i:03d}", pam)
            traces += [am, pam]
        return _failed(traces)
    traces = run_trials(ctx.model, algo, ctx.cfg, args.trials, ctx.seed, init)
    for i, trace in enumerate(traces):
        ctx.write_trace(f"{algo}_trial{i:03d}", trace)
    return _failed(traces)


def cmd_mineig(ctx: _Context):
    m = ctx.model
    s, rep = min_eig_waveform(m.interference_noise, m.temporal, m.spatial, ctx.cfg.power)
    w = mvdr_filter(m.total_covariance(s), m.steering(s), ctx.cfg.kappa)
    rows = [{"n": n, "re": float(x.real), "im": float(x.imag), "abs": float(abs(x))}
            for n, x in enumerate(s)]
    ctx.write("mineig", ctx.header(objective=objective(w, s, m), eigenvalue=rep.eigenvalue,
                                   eigen_gap=rep.gap, degenerate=rep.degenerate), rows)


def cmd_pattern(ctx: _Context):
    w, s = ctx.optimized_pair()
    tg = ctx.scen.target
    grid = adapted_pattern(w, s, ctx.model, ctx.scen.geometry, tg.elevation)
    rows = [{"doppler": float(f), "azimuth": float(a), "power": float(grid.values[i, j])}
            for i, f in enumerate(grid.doppler) for j, a in enumerate(grid.azimuth)]
    f_max, a_max = grid.argmax()
    ctx.write("pattern", ctx.header(elevation=grid.elevation, argmax_doppler=f_max,
                                    argmax_azimuth=a_max, target_doppler=ctx.scen.normalized_doppler,
                                    target_azimuth=tg.azimuth), rows)


PFA_GRID = np.logspace(-3, -0.5, 11)
ROC_SINR_DB = (0.0, 3.0, 6.0)


def cmd_roc(ctx: _Context):
    """ROC of the optimized pair (AM started from the minimum-eigenvector waveform) at fixed
    SINR levels, and of a random equal-energy waveform with its own MVDR filter at the same
    target amplitude.  Both curves of a level share their random numbers."""
    m = ctx.model
    w, s = ctx.optimized_pair("mineig")
    rng = np.random.default_rng(ctx.seed + 1)
    s_rand = initial_waveform(m, ctx.cfg, "gaussian-raw", int(rng.integers(2 ** 63)))
    s_rand *= np.linalg.norm(s) / np.linalg.norm(s_rand)
    w_rand = mvdr_filter(m.total_covariance(s_rand), m.steering(s_rand), ctx.cfg.kappa)
    base = output_sinr(w, s, m)
    rows = []
    for k, sinr_db in enumerate(ROC_SINR_DB):
        rho = np.sqrt(10 ** (sinr_db / 10) / base)
        for label, (ww, ss) in (("optimized", (w, s)), ("random", (w_rand, s_rand))):
            curve = roc_curve(ww, ss, m, sinr_db, ctx.args.trials, PFA_GRID,
                              seed=ctx.seed + k, rho_t=rho, method="scalar")
            oracle = marcum_pd(10 ** (curve.sinr_db / 10), PFA_GRID)
            rows += [{"sinr_db": sinr_db, "waveform": label, "pfa": float(p), "pd": float(d),
                      "oracle": float(o), "achieved_sinr_db": curve.sinr_db}
                     for p, d, o in zip(PFA_GRID, curve.pd, oracle)]
    ctx.write("roc", ctx.header(trials=ctx.args.trials, method="scalar"), rows)


def cmd_rmb(ctx: _Context):
    m = ctx.model
    _, s = ctx.optimized_pair()
    supports = [2 * m.dim, 4 * m.dim, 8 * m.dim]
    losses = sinr_loss_mc(m, s, supports, ctx.args.trials, seed=ctx.seed)
    summary = loss_summary(losses)
    rows = [{"K": K, **summary[K], "rmb_db": 10 * np.log10(rmb_mean_loss(K, m.dim))}
            for K in supports]
    ctx.write("rmb", ctx.header(trials=ctx.args.trials, dim=m.dim, loading=0.0), rows)


def cmd_duals(ctx: _Context):
    """``f(γ₂)`` and ``r(γ₆)`` on a log grid, for the MVDR filter of the initial waveform."""
    m, cfg = ctx.model, ctx.cfg
    s0 = initial_waveform(m, cfg, "gaussian", ctx.seed)
    w = mvdr_filter(m.total_covariance(s0), m.steering(s0), cfg.kappa)
    Z = m.zq_sum(w)
    lam = largest_eigenvalue(Z)
    b = replica_adjoint(m.replication, w)
    gammas = lam * np.logspace(-6, 6, 61)
    f = lagrange_f(gammas, Z, b, cfg.kappa, cfg.power)
    beta = lam
    r = [proximal_r(g, w, s0, beta, Z, m.replication, cfg.kappa, cfg.power) for g in gammas]
    rows = ([{"curve": "f", "gamma": float(g), "value": float(v)} for g, v in zip(gammas, f)]
            + [{"curve": "gamma_f", "gamma": float(g), "value": float(g * v)}
               for g, v in zip(gammas, f)]
            + [{"curve": "r", "gamma": float(g), "value": float(v)} for g, v in zip(gammas, r)])
    ctx.write("duals", ctx.header(lambda_max=lam, beta=beta), rows)


HANDLERS = {"am": cmd_trials, "pam": cmd_trials, "cm": cmd_trials, "mineig": cmd_mineig,
            "pattern": cmd_pattern, "roc": cmd_roc, "rmb": cmd_rmb, "duals": cmd_duals}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.trials < 0:
        print("error: --trials must be non-negative", file=sys.stderr)
        return 2
    try:
        ctx = _Context(args)
        failures = HANDLERS[args.command](ctx)
    except (ScenarioError, FileNotFoundError) as exc:
        where = f" at {exc.path}" if getattr(exc, "path", "") else ""
        print(f"error: scenario{where}: {exc}", file=sys.stderr)
        return 2
    except (RankDeficiencyError, RootBracketError, np.linalg.LinAlgError) as exc:
        print(f"error: solver failure in {args.command}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    if failures:
        for line in failures:
            print(f"solver error: {line}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
