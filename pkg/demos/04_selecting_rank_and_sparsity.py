"""Pick r, s1 and s2 from the linear estimate.

Given a lower bound eta on the signal, count singular values (for r) or
rows and columns holding an entry (for s1, s2) larger than eta / 2.
"""

import numpy as np

from jointdr import EmbeddingPair, FeatureDistribution, LinkModel, estimate_rank, estimate_sparsity, generate_samples, linear_estimate

rng = np.random.default_rng(0)
n, r = 20, 3
u = np.zeros((n, r))
v = np.zeros((n, r))
u[[1, 5, 9, 14]] = np.linalg.qr(rng.standard_normal((4, r)))[0]
v[[0, 2, 7, 11, 16, 19]] = np.linalg.qr(rng.standard_normal((6, r)))[0]
truth = EmbeddingPair(u, v)

x_lin = linear_estimate(generate_samples(truth, LinkModel("bilinear_gaussian", r), FeatureDistribution(), 16000, seed=1)).x_lin
print("estimated rank:", estimate_rank(x_lin, eta=1.0))
print("estimated (s1, s2):", estimate_sparsity(x_lin, eta=0.1))
