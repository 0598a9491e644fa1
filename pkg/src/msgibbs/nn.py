"""Residual tanh networks, teacher-student data, Gauss-Newton energies,
multiscale Gaussian posteriors over flattened weights, and Monte-Carlo
population-risk estimation.

Weights flatten layer-major, row-major within each layer; block i of the
partition is layer i (m*m dims each).  Decimation drops the deepest layer
first, so scale i covers layers 1..d-i+1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, SpectralNormViolated
from .gaussian import (
    BlockPartition,
    GaussianDist,
    QuadraticEnergy,
    gibbs_gaussian,
    sample,
)
from .multiscale import GaussianBackend, alpha_schedule, solve_mt

__all__ = [
    "NetShape",
    "ResNetParams",
    "Dataset",
    "QuadraticEnergy",
    "TeacherStudentConfig",
    "forward",
    "forward_batch",
    "residual_increment_check",
    "empirical_risk",
    "weight_jacobian",
    "gauss_newton_energy",
    "multiscale_posterior",
    "teacher_student_data",
    "population_risk_mc",
    "layer_partition",
    "iid_gaussian_prior",
    "scale_to_spectral_norm",
]


@dataclass(frozen=True)
class NetShape:
    """Width, depth, and the input-norm bound used by the risk bounds."""

    m: int
    d: int
    R: float = 1.0

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or not self.R > 0.0:
            raise ValueError(f"invalid net shape m={self.m} d={self.d} R={self.R}")


class ResNetParams:
    """Stack of d square weight matrices W_1..W_d, each m x m."""

    __slots__ = ("layers",)

    def __init__(self, layers):
        layers = [np.array(w, dtype=float, copy=True) for w in layers]
        if not layers:
            raise ValueError("need at least one layer")
        m = layers[0].shape[0]
        for w in layers:
            if w.shape != (m, m):
                raise DimensionMismatch("all layers must be square of equal width")
            if not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite")
            w.setflags(write=False)
        self.layers = tuple(layers)

    @property
    def m(self):
        return self.layers[0].shape[0]

    @property
    def d(self):
        return len(self.layers)

    @classmethod
    def zeros(cls, m, d):
        return cls([np.zeros((m, m)) for _ in range(d)])

    @classmethod
    def from_flat(cls, vec, m, d):
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != d * m * m:
            raise DimensionMismatch(
                f"flat vector has {vec.size} entries, expected {d * m * m}"
            )
        return cls([vec[k * m * m : (k + 1) * m * m].reshape(m, m) for k in range(d)])

    def flat(self):
        return np.concatenate([w.ravel() for w in self.layers])

    def spectral_norms(self):
        return np.array([np.linalg.norm(w, 2) for w in self.layers])

    def to_json(self):
        return {"m": self.m, "d": self.d, "flat": self.flat().tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls.from_flat(np.asarray(obj["flat"]), int(obj["m"]), int(obj["d"]))


def scale_to_spectral_norm(params, target):
    """Rescale every layer to spectral norm exactly ``target`` (zero layers stay)."""
    out = []
    for w in params.layers:
        norm = np.linalg.norm(w, 2)
        out.append(w * (target / norm) if norm > 0.0 else w)
    return ResNetParams(out)


@dataclass(frozen=True)
class Dataset:
    """Paired inputs and targets, both (n, m)."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 2 or xs.shape != ys.shape:
            raise DimensionMismatch("xs and ys must be matching (n, m) arrays")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self):
        return self.xs.shape[0]

    def to_json(self):
        return {"xs": self.xs.tolist(), "ys": self.ys.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(np.asarray(obj["xs"]), np.asarray(obj["ys"]))


@dataclass(frozen=True)
class TeacherStudentConfig:
    """Teacher of depth ``teacher_depth`` embedded in a depth-``d`` student."""

    m: int
    d: int
    teacher_depth: int
    n_train: int
    teacher_weight_variance: float = 0.1
    prior_variance: float = 5e-5
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.d < 1 or self.n_train < 1:
            raise ValueError("m, d and n_train must be positive")
        if not 1 <= self.teacher_depth < self.d:
            raise ValueError(
                f"teacher depth must be in [1, d), got {self.teacher_depth}"
            )
        if not (self.teacher_weight_variance > 0.0 and self.prior_variance > 0.0):
            raise ValueError("variances must be positive")

    @property
    def depth_ratio(self):
        """The ratio M = d / teacher_depth (> 1)."""
        return self.d / self.teacher_depth


def forward(params, x):
    """Residual forward pass: h_i = tanh(W_i h_{i-1}) + h_{i-1}.

    Returns (output, [h_0, ..., h_d]).
    """
    h = np.asarray(x, dtype=float).reshape(-1)
    if h.size != params.m:
        raise DimensionMismatch(f"input has dim {h.size}, network width is {params.m}")
    hidden = [h]
    for w in params.layers:
        h = np.tanh(w @ h) + h
        hidden.append(h)
    return h, hidden


def forward_batch(params, xs):
    """Forward pass over a batch of inputs, shape (n, m) -> (n, m)."""
    h = np.asarray(xs, dtype=float)
    for w in params.layers:
        h = np.tanh(h @ w.T) + h
    return h


def residual_increment_check(params, x):
    """Norms |h_i - h_{i-1}| for a network with per-layer spectral norm <= 1/d.

    Every increment is bounded by e |x| / d.  Raises
    :class:`SpectralNormViolated` if the precondition fails.
    """
    d = params.d
    norms = params.spectral_norms()
    if np.any(norms > 1.0 / d + 1e-12):
        raise SpectralNormViolated(
            f"layer spectral norms {norms} exceed the 1/d = {1.0 / d} budget"
        )
    _, hidden = forward(params, x)
    return np.array(
        [np.linalg.norm(hidden[i] - hidden[i - 1]) for i in range(1, d + 1)]
    )


def empirical_risk(params, data):
    """Mean squared error (1/n) sum |h(x_i) - y_i|^2."""
    out = forward_batch(params, data.xs)
    return float(((out - data.ys) ** 2).sum(axis=1).mean())


def weight_jacobian(params, x):
    """Jacobian of the network output w.r.t. the flattened weights, (m, d m^2).

    Reverse-mode through the residual recursion: with B the running
    output-to-hidden Jacobian, the layer-k block is
    (B * tanh'(z_k)) outer h_{k-1}.
    """
    m, d = params.m, params.d
    h = np.asarray(x, dtype=float).reshape(-1)
    hidden = [h]
    pre = []
    for w in params.layers:
        z = w @ hidden[-1]
        pre.append(z)
        hidden.append(np.tanh(z) + hidden[-1])
    jac = np.empty((m, d * m * m))
    back = np.eye(m)
    for k in range(d - 1, -1, -1):
        phi = 1.0 - np.tanh(pre[k]) ** 2
        block = np.einsum("ai,j->aij", back * phi[None, :], hidden[k])
        jac[:, k * m * m : (k + 1) * m * m] = block.reshape(m, m * m)
        back = back @ (phi[:, None] * params.layers[k]) + back
    return jac


def gauss_newton_energy(params0, data):
    """Gauss-Newton quadratic model of the empirical risk around ``params0``.

    With residuals r_i and Jacobians J_i at the expansion point:
    c = L_S(params0), g = (2/n) sum J_i' r_i, K = (2/n) sum J_i' J_i,
    re-expressed in absolute weight coordinates.  The model's value and
    gradient at ``params0`` match the true loss exactly.
    """
    n = data.n
    dim = params0.d * params0.m**2
    K = np.zeros((dim, dim))
    g = np.zeros(dim)
    c = 0.0
    for i in range(n):
        out, _ = forward(params0, data.xs[i])
        r = out - data.ys[i]
        jac = weight_jacobian(params0, data.xs[i])
        K += jac.T @ jac
        g += jac.T @ r
        c += float(r @ r)
    K *= 2.0 / n
    g *= 2.0 / n
    c /= n
    w0 = params0.flat()
    if np.any(w0 != 0.0):
        c = c - float(g @ w0) + 0.5 * float(w0 @ K @ w0)
        g = g - K @ w0
    return QuadraticEnergy(0.5 * (K + K.T), g, c)


def layer_partition(m, d):
    """Block partition with one m*m block per layer."""
    return BlockPartition(tuple([m * m] * d))


def iid_gaussian_prior(cfg):
    """Zero-mean isotropic prior over all flattened weights."""
    dim = cfg.d * cfg.m**2
    return GaussianDist(np.zeros(dim), cfg.prior_variance * np.eye(dim))


def multiscale_posterior(energy, prior, alpha, sigma1, partition):
    """Multiscale Gibbs posterior via marginalize-tilt under decimation.

    The microscopic Gibbs posterior uses inverse temperature 1/sigma1
    (multiplier fixed to one); the schedule makes every tilting index
    1 - alpha.  ``alpha = 0`` returns the single-scale posterior itself.
    """
    sched = alpha_schedule(alpha, sigma1, partition.n_blocks)
    gibbs = gibbs_gaussian(energy, prior, 1.0 / sigma1)
    return solve_mt(gibbs, prior, sched, GaussianBackend(partition))


def teacher_student_data(cfg, rng):
    """Teacher network, a training set it labels, and a test-set generator.

    The teacher occupies the deepest ``teacher_depth`` layers (entries
    N(0, teacher_weight_variance)); the leading layers are zero, i.e.
    identity mappings.  Inputs are i.i.d. standard normal; labels are
    noiseless teacher outputs.
    """
    m, d = cfg.m, cfg.d
    sd = math.sqrt(cfg.teacher_weight_variance)
    layers = [np.zeros((m, m)) for _ in range(d - cfg.teacher_depth)]
    layers += [sd * rng.standard_normal((m, m)) for _ in range(cfg.teacher_depth)]
    teacher = ResNetParams(layers)
    xs = rng.standard_normal((cfg.n_train, m))
    train = Dataset(xs, forward_batch(teacher, xs))

    def make_test(n_test, test_rng):
        txs = test_rng.standard_normal((int(n_test), m))
        return Dataset(txs, forward_batch(teacher, txs))

    return teacher, train, make_test


def population_risk_mc(posterior, teacher, cfg, n_test, n_weights, seed):
    """Monte-Carlo population risk of weights drawn from the posterior.

    Each weight sample owns a deterministically derived random substream, so
    the estimate does not depend on evaluation order or parallelism.
    Returns (estimate, standard error).
    """
    if posterior.dim != cfg.d * cfg.m**2:
        raise DimensionMismatch("posterior dimension does not match the config")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    streams = ss.spawn(n_weights + 1)
    test_rng = np.random.default_rng(streams[-1])
    xs = test_rng.standard_normal((int(n_test), cfg.m))
    ys = forward_batch(teacher, xs)
    test = Dataset(xs, ys)
    risks = np.empty(n_weights)
    for i in range(n_weights):
        rng_i = np.random.default_rng(streams[i])
        params = ResNetParams.from_flat(sample(posterior, rng_i), cfg.m, cfg.d)
        risks[i] = empirical_risk(params, test)
    estimate = float(risks.mean())
    stderr = float(risks.std(ddof=1) / math.sqrt(n_weights)) if n_weights > 1 else 0.0
    return estimate, stderr
