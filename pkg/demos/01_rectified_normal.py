"""
The rectified normal prior
==========================

A Gaussian times an exponential, renormalized on [0, inf). It is a truncated
normal with its parent mean pulled towards zero by lam/tau.
"""

import numpy as np

from bayesnmf.distributions import (RnParams, TnParams, rn_density, rn_normalizer, sample_rn,
                                   sample_tn)
from bayesnmf.verification import rn_normalizer_quad, tn_moments

p = RnParams(2.0, 4.0, 3.0)
print("as a truncated normal:", p.to_tn())          # parent mean (4*2 - 3)/4 = 1.25

# closed-form normalizer against plain quadrature
for mu, tau, lam in [(0, 1, 1), (1, 1, 1), (-3, 10, 0.5)]:
    print(mu, tau, lam, rn_normalizer(RnParams(mu, tau, lam)), rn_normalizer_quad(mu, tau, lam))

# sample and compare with the analytic mean
rng = np.random.default_rng(0)
x = sample_rn(p, rng, size=200_000)
print("sample mean %.4f, exact %.4f" % (x.mean(), tn_moments(1.25, 4.0)[0]))

# a coarse text histogram against the density
edges = np.linspace(0, 3, 13)
counts, _ = np.histogram(x, edges)
width = edges[1] - edges[0]
for lo, c in zip(edges[:-1], counts):
    dens = rn_density(lo + width / 2, p)
    print(f"{lo:4.2f} {'#' * int(60 * c / counts.max()):60s} {c / x.size / width:.3f} vs {dens:.3f}")

# deep in the tail the sampler still terminates quickly
y = sample_tn(TnParams(-10.0, 1.0), rng, size=100_000)
print("TN(-10, 1) sample mean %.5f, exact %.5f" % (y.mean(), tn_moments(-10.0, 1.0)[0]))
