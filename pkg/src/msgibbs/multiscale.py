"""Renormalization-style solvers for multiscale entropy objectives.

A single algorithm body serves both backends:

1. start from the microscopic Gibbs distribution at the finest scale,
2. repeatedly coarse-grain and renormalize (scale, or tilt toward the
   reference) with exponent ``(s_1+...+s_{i-1}) / (s_1+...+s_i)``,
3. refine back down by composing the intermediate conditionals.

Coarse-graining steps whose tilt exponent equals one are pure
pass-throughs and are short-circuited, so single-scale schedules return
the microscopic Gibbs distribution object itself.
"""

from dataclasses import dataclass

import numpy as np

from . import gaussian as mg
from . import tabular as mt
from .errors import IndefinitePosterior, SpaceMismatch

__all__ = [
    "TemperatureSchedule",
    "alpha_schedule",
    "TabularBackend",
    "GaussianBackend",
    "SolveTrace",
    "solve_max_entropy",
    "solve_min_relative_entropy",
    "solve_mt",
    "max_entropy_objective",
    "min_relative_entropy_objective",
]


@dataclass(frozen=True)
class TemperatureSchedule:
    """Lagrange multiplier ``lam`` and per-scale length coefficients ``sigma``.

    ``sigma[0] > 0`` and all later entries are nonnegative; the tilting
    index at step i is the ratio of consecutive partial sums and lies in
    (0, 1].
    """

    lam: float
    sigma: tuple

    def __post_init__(self):
        lam = float(self.lam)
        sigma = tuple(float(s) for s in self.sigma)
        if not lam > 0.0:
            raise ValueError(f"lambda must be > 0, got {lam}")
        if len(sigma) < 1:
            raise ValueError("schedule needs at least one scale")
        if not sigma[0] > 0.0:
            raise ValueError(f"sigma_1 must be > 0, got {sigma[0]}")
        if any(s < 0.0 or not np.isfinite(s) for s in sigma):
            raise ValueError(f"sigma entries must be finite and >= 0, got {sigma}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "sigma", sigma)

    @property
    def depth(self):
        return len(self.sigma)

    def tilt_index(self, i):
        """Renormalization exponent at step ``i`` (2-based, up to depth).

        Steps with ``sigma_i == 0`` short-circuit to exactly 1 (pass-through).
        """
        if not 2 <= i <= self.depth:
            raise ValueError(f"step must be in [2, {self.depth}], got {i}")
        if self.sigma[i - 1] == 0.0:
            return 1.0
        prev = sum(self.sigma[: i - 1])
        return prev / (prev + self.sigma[i - 1])


def alpha_schedule(alpha, sigma1, d):
    """Schedule with all tilting indices equal to ``1 - alpha``.

    Solves ``sigma_i / (sigma_1 + ... + sigma_i) = alpha`` for i >= 2, which
    gives ``sigma_i = alpha * sigma_1 * (1 - alpha) ** -(i-1)``.  ``alpha = 0``
    is the single-scale reduction.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must be in [0, 1), got {alpha}")
    if not sigma1 > 0.0:
        raise ValueError(f"sigma1 must be > 0, got {sigma1}")
    if d < 1:
        raise ValueError(f"depth must be >= 1, got {d}")
    sigma = [float(sigma1)]
    for i in range(2, d + 1):
        sigma.append(alpha * sigma1 * (1.0 - alpha) ** (-(i - 1)))
    return TemperatureSchedule(1.0, tuple(sigma))


class TabularBackend:
    """Tabular distributions coarse-grained along an explicit scale-map chain."""

    def __init__(self, chain, is_decimation=False):
        chain = list(chain)
        for left, right in zip(chain, chain[1:]):
            if left.target.axis_sizes != right.source.axis_sizes:
                raise SpaceMismatch("scale maps do not chain")
        self.chain = chain
        self.is_decimation = is_decimation

    @classmethod
    def decimation(cls, space, depth):
        """Chain that drops the last axis once per step (depth-1 maps)."""
        if depth < 1 or depth > space.ndim:
            raise SpaceMismatch(
                f"decimation depth must be in [1, {space.ndim}], got {depth}"
            )
        chain = []
        current = space
        for _ in range(depth - 1):
            step = mt.ScaleMap.decimation(current)
            chain.append(step)
            current = step.target
        return cls(chain, is_decimation=True)

    @property
    def depth(self):
        return len(self.chain) + 1

    def check_depth(self, depth):
        if depth != self.depth:
            raise SpaceMismatch(
                f"schedule depth {depth} does not match chain depth {self.depth}"
            )

    def initial_max_entropy(self, f, beta):
        return mt.gibbs(f, mt.TabularDist.uniform(f.space), beta)

    def initial_gibbs(self, f, q, beta):
        return mt.gibbs(f, q, beta)

    def reference_marginals(self, q):
        refs = [q]
        for t in self.chain:
            refs.append(mt.pushforward(refs[-1], t))
        return refs

    def coarse_grain(self, dist, step):
        return mt.pushforward(dist, self.chain[step])

    def scale(self, dist, theta):
        return mt.scale(dist, theta)

    def tilt(self, dist, reference, theta):
        return mt.tilt(dist, reference, theta)

    def refine_step(self, coarse_dist, finer, step):
        cond = mt.reverse_conditional(finer, self.chain[step])
        return mt.refine(coarse_dist, [cond])


class GaussianBackend:
    """Gaussian distributions under decimation of a block partition."""

    is_decimation = True

    def __init__(self, partition):
        self.partition = partition
        self._dims = [partition.leading_dim(k) for k in range(1, partition.n_blocks + 1)]

    @property
    def depth(self):
        return self.partition.n_blocks

    def check_depth(self, depth):
        if depth != self.depth:
            raise SpaceMismatch(
                f"schedule depth {depth} does not match partition with "
                f"{self.depth} blocks"
            )

    def _blocks_of(self, dist):
        try:
            return self._dims.index(dist.dim) + 1
        except ValueError:
            raise SpaceMismatch(
                f"distribution dim {dist.dim} is not a leading-block dim"
            ) from None

    def initial_max_entropy(self, f, beta):
        # density proportional to exp(-beta f); requires strictly PD K
        try:
            mean = np.linalg.solve(f.K, -f.g)
            return mg.GaussianDist.from_precision(mean, beta * f.K)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise IndefinitePosterior(
                f"entropy maximization needs a strictly PD quadratic energy: {exc}"
            ) from exc

    def initial_gibbs(self, f, q, beta):
        return mg.gibbs_gaussian(f, q, beta)

    def reference_marginals(self, q):
        return [
            mg.marginalize(q, self.partition, self.depth - i)
            for i in range(self.depth)
        ]

    def coarse_grain(self, dist, step):
        k = self._blocks_of(dist)
        return mg.marginalize(dist, self.partition.prefix(k), k - 1)

    def scale(self, dist, theta):
        return mg.scale_gaussian(dist, theta)

    def tilt(self, dist, reference, theta):
        return mg.tilt_gaussian(dist, reference, theta)

    def refine_step(self, coarse_dist, finer, step):
        return mg.concat(coarse_dist, finer)


@dataclass(frozen=True)
class SolveTrace:
    """Intermediates of a solve, indexed by scale (entry 0 = finest).

    ``renormalized[i]`` is the distribution produced by the coarsening /
    renormalization phase at scale i+1; ``refined[i]`` is the partial
    composition produced by the refinement phase at scale i+1 (so
    ``refined[0]`` is the returned optimizer and ``refined[-1]`` equals
    ``renormalized[-1]``).  Pushing the optimizer forward to scale i
    reproduces ``refined[i-1]``; its conditionals match those of
    ``renormalized[i-1]``.
    """

    renormalized: tuple
    refined: tuple


def _renormalize_and_refine(initial, sched, backend, references, with_trace):
    d = sched.depth
    backend.check_depth(d)
    intermediates = [initial]
    marginals = [None]
    for i in range(2, d + 1):
        coarse = backend.coarse_grain(intermediates[-1], i - 2)
        tau = sched.tilt_index(i)
        if tau >= 1.0:
            u_i = coarse
        elif references is None:
            u_i = backend.scale(coarse, tau)
        else:
            u_i = backend.tilt(coarse, references[i - 1], tau)
        intermediates.append(u_i)
        marginals.append(coarse)
    result = intermediates[-1]
    refined = [result]
    for i in range(d - 2, -1, -1):
        # a pass-through step contributes its own conditional back unchanged
        if result is marginals[i + 1]:
            result = intermediates[i]
        else:
            result = backend.refine_step(result, intermediates[i], i)
        refined.append(result)
    if with_trace:
        return result, SolveTrace(tuple(intermediates), tuple(reversed(refined)))
    return result


def solve_max_entropy(f, sched, backend, with_trace=False):
    """Maximizer of (multiscale entropy) - lam * E[f].

    Initializes with the Gibbs distribution of exponent ``-lam f / sigma_1``
    and renormalizes with scaled distributions.
    """
    initial = backend.initial_max_entropy(f, sched.lam / sched.sigma[0])
    return _renormalize_and_refine(initial, sched, backend, None, with_trace)


def solve_min_relative_entropy(f, q, sched, backend, with_trace=False):
    """Minimizer of E[f] + lam * (multiscale relative entropy to q).

    Initializes with the Gibbs distribution of exponent ``-f / (lam sigma_1)``
    times q and renormalizes by tilting toward q's coarse marginals.
    """
    initial = backend.initial_gibbs(f, q, 1.0 / (sched.lam * sched.sigma[0]))
    references = backend.reference_marginals(q)
    return _renormalize_and_refine(initial, sched, backend, references, with_trace)


def solve_mt(gibbs_dist, q, sched, backend, with_trace=False):
    """Marginalize-tilt solver starting from a precomputed microscopic Gibbs.

    Identical to :func:`solve_min_relative_entropy` on decimation chains;
    only decimation backends are accepted.
    """
    if not backend.is_decimation:
        raise SpaceMismatch("marginalize-tilt requires a decimation backend")
    references = backend.reference_marginals(q)
    return _renormalize_and_refine(gibbs_dist, sched, backend, references, with_trace)


def max_entropy_objective(p, f, sched, chain):
    """Multiscale Shannon entropy minus lam * E[f] (to be maximized)."""
    expected = float(p.probs @ f.values)
    return mt.multiscale_shannon_entropy(p, sched, chain) - sched.lam * expected


def min_relative_entropy_objective(p, f, q, sched, chain):
    """E[f] plus lam * multiscale relative entropy to q (to be minimized)."""
    expected = float(p.probs @ f.values)
    return expected + sched.lam * mt.multiscale_relative_entropy(p, q, sched, chain)
