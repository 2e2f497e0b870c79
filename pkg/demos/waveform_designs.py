"""Compare waveform designs for the same scenario.

    python3 demos/waveform_designs.py

Runs power-constrained AM, constant-modulus AM from a chirp, and the
minimum-eigenvector design, then prints the final output power, output
SINR and waveform moduli of each.
"""

import dataclasses

import numpy as np

from wastap.analysis import objective, output_sinr
from wastap.driver import initial_waveform, run_am, run_cm
from wastap.optim import min_eig_waveform, mvdr_filter
from wastap.scenario import build_model, bundled_scenario, parse_scenario

scen, cfg = parse_scenario(bundled_scenario("baseline"), desk=True)
model = build_model(scen)
cfg = dataclasses.replace(cfg, max_iter=100)

designs = {}
am = run_am(model, initial_waveform(model, cfg, seed=1), cfg, seed=1)
designs["AM (power budget)"] = (am.final.w, am.final.s)

cm = run_cm(model, initial_waveform(model, cfg, "chirp"), cfg, seed=1)
designs["AM (constant modulus)"] = (cm.final.w, cm.final.s)

s_eig, rep = min_eig_waveform(model.interference_noise, model.temporal, model.spatial,
                              cfg.power)
w_eig = mvdr_filter(model.total_covariance(s_eig), model.steering(s_eig), cfg.kappa)
designs["minimum eigenvector"] = (w_eig, s_eig)

print(f"{'design':24s} {'w^H R_u w':>12s} {'SINR dB':>8s} {'||s||^2':>8s} {'|s| range':>18s}")
for name, (w, s) in designs.items():
    mags = np.abs(s)
    print(f"{name:24s} {objective(w, s, model):12.5e} "
          f"{10 * np.log10(output_sinr(w, s, model)):8.2f} {np.vdot(s, s).real:8.3f} "
          f"[{mags.min():.4f}, {mags.max():.4f}]")

print(f"\nconstant-modulus run: {len(cm)} iterations, spread at end {cm.final.spread:.1e}"
      "; its energy is set by the modulus, not the budget, so compare SINR with care")
if rep.degenerate:
    print(f"note: minimum eigenvalue is degenerate (gap {rep.gap:.2e}); "
          "the eigenvector choice is arbitrary within the eigenspace")
