"""Detection performance of an optimized pair and training-sample loss.

    python3 demos/detection.py

Prints Monte Carlo P_d against the Marcum-Q law at three SINR levels, then
the oracle SINR loss for K = 2, 4, 8 times the filter dimension next to the
K/(K-D) expectation.
"""

import numpy as np

from wastap.analysis import loss_summary, marcum_pd, rmb_mean_loss, roc_curve, sinr_loss_mc
from wastap.driver import initial_waveform, run_am
from wastap.scenario import build_model, bundled_scenario, parse_scenario

scen, cfg = parse_scenario(bundled_scenario("baseline"), desk=True)
model = build_model(scen)
trace = run_am(model, initial_waveform(model, cfg, "mineig"), cfg)
w, s = trace.final.w, trace.final.s

pfa = np.array([1e-3, 1e-2, 1e-1])
print("P_fa        " + "  ".join(f"{p:>8.0e}" for p in pfa))
for sinr_db in (0.0, 3.0, 6.0):
    curve = roc_curve(w, s, model, sinr_db, 50_000, pfa, seed=int(sinr_db))
    law = marcum_pd(10 ** (sinr_db / 10), pfa)
    print(f"{sinr_db:3.0f} dB  MC  " + "  ".join(f"{d:8.4f}" for d in curve.pd))
    print("        law " + "  ".join(f"{d:8.4f}" for d in law))

D = model.dim
supports = [2 * D, 4 * D, 8 * D]
summary = loss_summary(sinr_loss_mc(model, s, supports, 100, seed=3))
print(f"\nSINR loss, dimension {D}")
for K in supports:
    row = summary[K]
    print(f"  K={K:4d}  mean {row['mean_db']:5.2f} dB  std {row['std']:.3f}  "
          f"expected {10 * np.log10(rmb_mean_loss(K, D)):5.2f} dB")
