"""
Checking a sampler against brute force
======================================

Every conditional the Gibbs sweep draws from can be checked on a tiny
problem: fix everything else, evaluate the full joint density on a grid of
the one free variable, and compare moments. A 10% error in the reported
parameters is easily caught.
"""

import numpy as np

from bayesnmf.model import HyperParams
from bayesnmf.verification import (brute_conditional_check, model_variables, perturb,
                                   random_tiny_instance)

inst = random_tiny_instance(np.random.default_rng(1))
print("observed mask:\n", inst.data.mask.astype(int))

for variable, idx in [("w", (0, 1)), ("mu_z", (1, 2)), ("lambda_w", (3, 0)), ("sigma2", ())]:
    rep = brute_conditional_check("GRRN", inst, HyperParams(), variable, idx)
    print(f"{variable:9s} {str(idx):7s} implemented mean/var {rep.implemented[0]:.5f} "
          f"{rep.implemented[1]:.5f}  grid {rep.oracle[0]:.5f} {rep.oracle[1]:.5f}  "
          f"{'ok' if rep.passed else 'MISMATCH'}")

# negative control
rep = brute_conditional_check("GRRN", inst, HyperParams(), "w", (0, 1),
                              params_transform=perturb)
print("perturbed by 10%:", "caught" if not rep.passed else "missed", f"(err {rep.rel_error:.3f} sd)")

# the whole GEE model, every variable
results = [brute_conditional_check("GEE", inst, HyperParams(), v, i)
           for v, i in model_variables("GEE", inst)]
print("GEE: %d/%d conditionals agree" % (sum(r.passed for r in results), len(results)))
