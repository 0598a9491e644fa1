"""Gaussian algebra walkthrough: marginalization, conditioning, scaling,
tilting, concatenation, KL, and sampling, with their consistency checks."""

import numpy as np

from msgibbs import gaussian as mg

rng = np.random.default_rng(1)


def random_pd(dim, scale=1.0):
    a = rng.standard_normal((dim, dim))
    return scale * (a @ a.T + dim * np.eye(dim))


part = mg.BlockPartition((2, 2))
g = mg.GaussianDist(rng.standard_normal(4), random_pd(4))

print("== marginalize / condition ==")
lead = mg.marginalize(g, part, 1)
cond = mg.condition(g, part, 1)
print("leading mean:", lead.mean)
print("conditional gain shape:", cond.gain.shape, "| cov PD:",
      np.all(np.linalg.eigvalsh(cond.cov) > 0))

print("\n== concat reassembles the joint ==")
back = mg.concat(lead, g)
gap = np.abs(back.precision - g.precision).max() / np.abs(g.precision).max()
print("relative precision gap after round trip:", gap)

print("\n== scale / tilt ==")
sharp = mg.scale_gaussian(g, 4.0)
print("covariance shrinks by 4:", np.allclose(sharp.cov, g.cov / 4.0))
h = mg.GaussianDist(rng.standard_normal(4), random_pd(4))
mid = mg.tilt_gaussian(g, h, 0.5)
print("tilted precision = mean of precisions:",
      np.allclose(mid.precision, 0.5 * g.precision + 0.5 * h.precision))

print("\n== KL and sampling ==")
print("KL(g||h) =", mg.kl_gaussian(g, h), "| KL(g||g) =", mg.kl_gaussian(g, g))
draws = mg.sample(g, np.random.default_rng(7), 50_000)
print("sample mean error:", np.abs(draws.mean(axis=0) - g.mean).max())
print("sample cov rel error:",
      np.linalg.norm(np.cov(draws.T) - g.cov) / np.linalg.norm(g.cov))

print("\n== Gibbs update with a quadratic energy ==")
energy = mg.QuadraticEnergy(random_pd(4), rng.standard_normal(4), 0.0)
posterior = mg.gibbs_gaussian(energy, g, beta=2.0)
print("posterior precision = prior + beta K:",
      np.allclose(posterior.precision, g.precision + 2.0 * energy.K))
print("E[f] under posterior:", mg.expected_quadratic(posterior, energy))
