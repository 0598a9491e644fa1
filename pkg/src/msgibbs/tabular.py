"""Exact probability computations on finite product alphabets.

Distributions are dense probability tables over a product space
``W_1 x ... x W_k`` indexed row-major (the last axis varies fastest).
All entropies are in nats and use the convention ``0 log 0 = 0``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AbsoluteContinuityViolation,
    EmptyGeometricMean,
    InvalidOrder,
    NonpositiveTheta,
    SpaceMismatch,
    UndefinedConditionalRow,
    VanishingPartitionFunction,
)
from .tolerances import TOL

#: hard cap on the number of joint states of a ProductSpace
MAX_STATES = 10**6


@dataclass(frozen=True)
class ProductSpace:
    """Finite product alphabet; coordinates are indexed alphabets of the given sizes."""

    axis_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.axis_sizes)
        if len(sizes) == 0:
            raise ValueError("a product space needs at least one axis")
        if any(s < 1 for s in sizes):
            raise ValueError(f"axis sizes must be >= 1, got {sizes}")
        object.__setattr__(self, "axis_sizes", sizes)
        if self.size > MAX_STATES:
            raise ValueError(
                f"space has {self.size} states, exceeding the cap of {MAX_STATES}"
            )

    @property
    def size(self):
        return math.prod(self.axis_sizes)

    @property
    def ndim(self):
        return len(self.axis_sizes)

    def drop_last_axis(self):
        if self.ndim < 2:
            raise ValueError("cannot drop the only axis of a space")
        return ProductSpace(self.axis_sizes[:-1])


def _readonly(arr):
    arr = np.array(arr, dtype=float, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


class TabularDist:
    """Dense probability table over a :class:`ProductSpace` (row-major joint index)."""

    __slots__ = ("space", "probs")

    def __init__(self, space, probs):
        probs = _readonly(probs)
        if probs.shape != (space.size,):
            raise SpaceMismatch(
                f"probs has length {probs.size}, space has {space.size} states"
            )
        if not np.all(np.isfinite(probs)):
            raise ValueError("probabilities must be finite")
        if probs.min(initial=0.0) < 0.0:
            raise ValueError("probabilities must be nonnegative")
        total = float(probs.sum())
        if abs(total - 1.0) > TOL.normalization:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        self.space = space
        self.probs = probs

    @classmethod
    def uniform(cls, space):
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def from_weights(cls, space, weights):
        """Normalize a nonnegative weight vector into a distribution."""
        w = np.asarray(weights, dtype=float).reshape(-1)
        total = w.sum()
        if not total > 0.0:
            raise ValueError("weights must have positive total mass")
        return cls(space, w / total)

    def to_json(self):
        return {"axis_sizes": list(self.space.axis_sizes), "probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(ProductSpace(tuple(obj["axis_sizes"])), np.asarray(obj["probs"]))

    def __repr__(self):
        return f"TabularDist(axes={self.space.axis_sizes}, size={self.space.size})"


class EnergyTable:
    """Energy value per joint state of a product space."""

    __slots__ = ("space", "values")

    def __init__(self, space, values):
        values = _readonly(values)
        if values.shape != (space.size,):
            raise SpaceMismatch(
                f"values has length {values.size}, space has {space.size} states"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("energy values must be finite")
        self.space = space
        self.values = values

    def to_json(self):
        return {"axis_sizes": list(self.space.axis_sizes), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(ProductSpace(tuple(obj["axis_sizes"])), np.asarray(obj["values"]))


class ScaleMap:
    """Deterministic coarse-graining: assigns each source state a target state."""

    __slots__ = ("source", "target", "map")

    def __init__(self, source, target, mapping):
        mapping = np.array(mapping, dtype=np.int64, copy=True).reshape(-1)
        if mapping.shape != (source.size,):
            raise SpaceMismatch(
                f"map has length {mapping.size}, source has {source.size} states"
            )
        if mapping.min(initial=0) < 0 or mapping.max(initial=0) >= target.size:
            raise ValueError("map entries must be valid target indices")
        mapping.setflags(write=False)
        self.source = source
        self.target = target
        self.map = mapping

    @classmethod
    def decimation(cls, source):
        """Project onto all but the last coordinate (drop the deepest axis)."""
        target = source.drop_last_axis()
        last = source.axis_sizes[-1]
        return cls(source, target, np.arange(source.size) // last)

    @classmethod
    def identity(cls, space):
        return cls(space, space, np.arange(space.size))

    def to_json(self):
        return {
            "source_axis_sizes": list(self.source.axis_sizes),
            "target_axis_sizes": list(self.target.axis_sizes),
            "map": self.map.tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            ProductSpace(tuple(obj["source_axis_sizes"])),
            ProductSpace(tuple(obj["target_axis_sizes"])),
            np.asarray(obj["map"]),
        )


class ConditionalTable:
    """One distribution over ``output_space`` per state of ``given_space``.

    Rows are stored sparsely as (indices, probabilities) pairs; rows for
    conditioning states with zero mass are absent (``None``).
    """

    __slots__ = ("given_space", "output_space", "rows")

    def __init__(self, given_space, output_space, rows):
        if len(rows) != given_space.size:
            raise SpaceMismatch("one row per conditioning state required")
        checked = []
        for row in rows:
            if row is None:
                checked.append(None)
                continue
            idx, pr = row
            idx = np.asarray(idx, dtype=np.int64).reshape(-1)
            pr = np.asarray(pr, dtype=float).reshape(-1)
            if idx.shape != pr.shape:
                raise ValueError("row indices and probabilities differ in length")
            if idx.min(initial=0) < 0 or idx.max(initial=0) >= output_space.size:
                raise ValueError("row indices out of range")
            if pr.min(initial=0.0) < 0.0:
                raise ValueError("row probabilities must be nonnegative")
            if abs(pr.sum() - 1.0) > TOL.normalization:
                raise ValueError("each defined row must sum to 1")
            checked.append((idx, pr))
        self.given_space = given_space
        self.output_space = output_space
        self.rows = tuple(checked)


def _require_same_space(p, q):
    if p.space.axis_sizes != q.space.axis_sizes:
        raise SpaceMismatch(
            f"spaces differ: {p.space.axis_sizes} vs {q.space.axis_sizes}"
        )


def shannon_entropy(p):
    """Shannon entropy of ``p`` in nats (``0 log 0 = 0``)."""
    pr = p.probs[p.probs > 0.0]
    return float(-(pr * np.log(pr)).sum())


def kl(p, q):
    """Relative entropy D(p || q) in nats.

    Raises :class:`AbsoluteContinuityViolation` if p has mass where q has none.
    """
    _require_same_space(p, q)
    mask = p.probs > 0.0
    if np.any(q.probs[mask] <= 0.0):
        raise AbsoluteContinuityViolation("p is not absolutely continuous w.r.t. q")
    pp = p.probs[mask]
    qq = q.probs[mask]
    return max(float((pp * np.log(pp / qq)).sum()), 0.0)


def total_variation(p, q):
    """Total variation distance 0.5 * sum |p - q|."""
    _require_same_space(p, q)
    return 0.5 * float(np.abs(p.probs - q.probs).sum())


def renyi_entropy(p, order):
    """Renyi entropy of the given order, for order in (0,1) or (1,inf)."""
    order = float(order)
    if order <= 0.0 or order == 1.0:
        raise InvalidOrder(f"Renyi entropy order must be in (0,1) or (1,inf), got {order}")
    total = float(np.power(p.probs[p.probs > 0.0], order).sum())
    return math.log(total) / (1.0 - order)


def renyi_divergence(q, r, order):
    """Renyi divergence of order theta in (0,1) between q and r.

    Returns ``inf`` when the supports are disjoint.
    """
    _require_same_space(q, r)
    order = float(order)
    if not 0.0 < order < 1.0:
        raise InvalidOrder(f"Renyi divergence order must be in (0,1), got {order}")
    mask = (q.probs > 0.0) & (r.probs > 0.0)
    total = float(
        (np.power(q.probs[mask], order) * np.power(r.probs[mask], 1.0 - order)).sum()
    )
    if total == 0.0:
        return math.inf
    return math.log(total) / (order - 1.0)


def scale(p, theta):
    """Scaled (escort) distribution proportional to ``p ** theta``."""
    theta = float(theta)
    if theta <= 0.0:
        raise NonpositiveTheta(f"scaling exponent must be > 0, got {theta}")
    with np.errstate(divide="ignore"):
        logw = theta * np.log(p.probs)
    peak = logw.max()
    assert np.isfinite(peak), "valid distributions always have positive mass"
    w = np.exp(logw - peak)
    return TabularDist(p.space, w / w.sum())


def tilt(p, q, theta):
    """Tilted distribution proportional to ``p**theta * q**(1-theta)``.

    Endpoints return the respective argument verbatim; for theta in (0,1)
    the support is supp(p) & supp(q).
    """
    _require_same_space(p, q)
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"tilt exponent must be in [0,1], got {theta}")
    if theta == 1.0:
        return p
    if theta == 0.0:
        return q
    with np.errstate(divide="ignore"):
        logw = theta * np.log(p.probs) + (1.0 - theta) * np.log(q.probs)
    peak = logw.max()
    if not np.isfinite(peak):
        raise EmptyGeometricMean("supports of p and q do not intersect")
    w = np.exp(logw - peak)
    return TabularDist(p.space, w / w.sum())


def gibbs(f, q, beta):
    """Gibbs reweighting: distribution proportional to ``exp(-beta * f) * q``."""
    _require_same_space(f, q)
    beta = float(beta)
    if beta <= 0.0:
        raise ValueError(f"inverse temperature must be > 0, got {beta}")
    with np.errstate(divide="ignore"):
        logw = -beta * f.values + np.log(q.probs)
    peak = logw.max()
    if not np.isfinite(peak):
        raise VanishingPartitionFunction("no state carries finite weight")
    w = np.exp(logw - peak)
    return TabularDist(q.space, w / w.sum())


def pushforward(p, t):
    """Image distribution of ``p`` under the scale map ``t`` (mass-preserving)."""
    if t.source.axis_sizes != p.space.axis_sizes:
        raise SpaceMismatch("scale map source differs from the distribution's space")
    out = np.bincount(t.map, weights=p.probs, minlength=t.target.size)
    return TabularDist(t.target, out)


def _fibers(t):
    """Yield (target_index, source_indices) with source indices grouped per fiber."""
    order = np.argsort(t.map, kind="stable")
    sorted_targets = t.map[order]
    boundaries = np.searchsorted(sorted_targets, np.arange(t.target.size + 1))
    for j in range(t.target.size):
        yield j, order[boundaries[j] : boundaries[j + 1]]


def reverse_conditional(p, t):
    """Conditional of ``p`` given its image under ``t`` (Bayes inversion).

    Row j is p restricted to the fiber of j, renormalized; rows whose fiber
    carries no mass are undefined.
    """
    if t.source.axis_sizes != p.space.axis_sizes:
        raise SpaceMismatch("scale map source differs from the distribution's space")
    rows = []
    for _, fiber in _fibers(t):
        mass = p.probs[fiber].sum()
        if fiber.size == 0 or mass <= TOL.conditional_row_mass:
            rows.append(None)
        else:
            rows.append((fiber, p.probs[fiber] / mass))
    return ConditionalTable(t.target, t.source, rows)


def refine(coarsest, conditionals):
    """Compose a coarse distribution with a chain of reverse conditionals.

    ``conditionals`` are applied in order, each mapping the current
    distribution onto the next finer space.  Raises
    :class:`UndefinedConditionalRow` if a conditioning state with positive
    mass has no defined row.
    """
    current = coarsest
    for cond in conditionals:
        if cond.given_space.axis_sizes != current.space.axis_sizes:
            raise SpaceMismatch("conditional does not match the current space")
        out = np.zeros(cond.output_space.size)
        for j in np.flatnonzero(current.probs > 0.0):
            row = cond.rows[j]
            if row is None:
                raise UndefinedConditionalRow(
                    f"conditioning state {j} has mass {current.probs[j]!r} "
                    "but no defined row"
                )
            idx, pr = row
            out[idx] += current.probs[j] * pr
        current = TabularDist(cond.output_space, out)
    return current


def _scaled_marginals(p, sched, chain):
    if len(chain) != len(sched.sigma) - 1:
        raise SpaceMismatch(
            f"schedule of depth {len(sched.sigma)} needs {len(sched.sigma) - 1} "
            f"scale maps, got {len(chain)}"
        )
    current = p
    yield current
    for t in chain:
        current = pushforward(current, t)
        yield current


def multiscale_relative_entropy(p, q, sched, chain):
    """Sum of sigma_i * D(p at scale i || q at scale i) along the chain.

    Zero-weight scales are skipped, so ``sigma = (1, 0, ..., 0)`` reduces
    exactly to ``kl(p, q)``.
    """
    total = 0.0
    for sigma_i, p_i, q_i in zip(
        sched.sigma, _scaled_marginals(p, sched, chain), _scaled_marginals(q, sched, chain)
    ):
        if sigma_i > 0.0:
            total += sigma_i * kl(p_i, q_i)
    return total


def multiscale_shannon_entropy(p, sched, chain):
    """Sum of sigma_i * H(p at scale i) along the chain."""
    total = 0.0
    for sigma_i, p_i in zip(sched.sigma, _scaled_marginals(p, sched, chain)):
        if sigma_i > 0.0:
            total += sigma_i * shannon_entropy(p_i)
    return total
