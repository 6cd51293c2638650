"""Link constants by Monte Carlo, and an empirical light-tail check.

Q = E[abar f bbar^T] controls the signal; sigma^2 and the tau's control the
variance. For the noiseless bilinear link f = abar^T bbar at r = 2 they are
Q = I, sigma^2 = 30, tau0^2 = 2 and tau1^2 = tau2^2 = 8.
"""

import numpy as np

from jointdr import FeatureDistribution, LinkModel, check_light_tail, generate_samples, link_constants_mc, sample_problem

c = link_constants_mc(LinkModel("bilinear_noiseless", 2), 2, 400_000, seed=0)
print("Q =\n", np.round(c.q, 3))
print(f"sigma^2 = {c.sigma2:.2f}, tau0^2 = {c.tau0_2:.3f}, tau1^2 = {c.tau1_2:.2f}, tau2^2 = {c.tau2_2:.2f}")

# an even link has Q = 0: the linear moment carries no signal
even = link_constants_mc(LinkModel("even_poly", 2), 2, 400_000, seed=0)
print("even link max|Q| =", np.round(np.abs(even.q).max(), 3), "(zero up to Monte Carlo noise)")

truth = sample_problem(20, 20, 2, seed=1)
s = generate_samples(truth, LinkModel("bilinear_gaussian", 2), FeatureDistribution(), 20000, seed=2)
print(check_light_tail(s.y, np.linspace(0, 8, 41)))
