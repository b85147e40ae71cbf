"""
Sensitivity to added noise
==========================

Gaussian noise with variance r times the data variance is added to every
observed cell, 10% of the cells are held out, and the ratio of data variance
to held-out MSE is reported. Higher is better; it falls towards 1 as the
noise swamps the signal.

The multiplicative-update baseline is left out: added noise makes some
observed values negative, which it cannot fit.
"""

from bayesnmf.data import synthetic_generate
from bayesnmf.harness import NOISE_LADDER, ExperimentSpec, run_noise

data, _, _ = synthetic_generate(60, 50, K_true=4, noise_sd=0.1, seed=0)

spec = ExperimentSpec("noise", models=("GRRN", "GTTN", "GEE"), K_values=(4,),
                      levels=NOISE_LADDER, repeats=2, iterations=300, burn_in=200)
res = run_noise(spec, data)

print("ratio   " + "  ".join(f"{m:>7s}" for m in ("GRRN", "GTTN", "GEE")))
rows = {(r.model, r.level): r.metric_mean for r in res.aggregate()}
for level in NOISE_LADDER:
    print(f"{level:5.1f}   " + "  ".join(f"{rows[(m, level)]:7.2f}" for m in ("GRRN", "GTTN", "GEE")))
