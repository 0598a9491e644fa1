import math

import numpy as np
import pytest

from msgibbs import gaussian as mg
from msgibbs import nn as mn
from msgibbs.errors import DimensionMismatch, SpectralNormViolated


def small_params(rng, m=3, d=2, scale=0.3):
    return mn.ResNetParams([scale * rng.standard_normal((m, m)) for _ in range(d)])


def finite_difference_jacobian(params, x, eps=1e-5):
    flat = params.flat()
    m, d = params.m, params.d
    out = np.empty((m, flat.size))
    for j in range(flat.size):
        wp = flat.copy()
        wp[j] += eps
        wm = flat.copy()
        wm[j] -= eps
        op, _ = mn.forward(mn.ResNetParams.from_flat(wp, m, d), x)
        om, _ = mn.forward(mn.ResNetParams.from_flat(wm, m, d), x)
        out[:, j] = (op - om) / (2.0 * eps)
    return out


def test_forward_identity_at_zero_weights():
    rng = np.random.default_rng(0)
    params = mn.ResNetParams.zeros(4, 3)
    x = rng.standard_normal(4)
    out, hidden = mn.forward(params, x)
    assert np.array_equal(out, x)
    assert len(hidden) == 4
    assert all(np.array_equal(h, x) for h in hidden)


def test_forward_scalar_case():
    params = mn.ResNetParams([np.array([[0.5]])])
    out, hidden = mn.forward(params, [2.0])
    assert out[0] == pytest.approx(math.tanh(1.0) + 2.0)
    assert hidden[0][0] == 2.0


def test_forward_norm_growth_bound():
    # |h_i| <= exp(i/d) |x| under the per-layer spectral budget
    rng = np.random.default_rng(1)
    m, d = 5, 4
    params = mn.scale_to_spectral_norm(small_params(rng, m, d), 1.0 / d)
    for _ in range(50):
        x = rng.standard_normal(m)
        _, hidden = mn.forward(params, x)
        for i, h in enumerate(hidden):
            assert np.linalg.norm(h) <= math.exp(i / d) * np.linalg.norm(x) + 1e-12


def test_forward_batch_matches_loop():
    rng = np.random.default_rng(2)
    params = small_params(rng, 4, 3)
    xs = rng.standard_normal((6, 4))
    batched = mn.forward_batch(params, xs)
    for i in range(6):
        single, _ = mn.forward(params, xs[i])
        assert np.allclose(batched[i], single)


def test_residual_increment_check():
    rng = np.random.default_rng(3)
    m, d = 4, 3
    zero = mn.ResNetParams.zeros(m, d)
    assert np.allclose(mn.residual_increment_check(zero, rng.standard_normal(m)), 0.0)

    params = mn.scale_to_spectral_norm(small_params(rng, m, d), 1.0 / d)
    for _ in range(100):
        x = rng.standard_normal(m)
        incs = mn.residual_increment_check(params, x)
        assert np.all(incs <= math.e * np.linalg.norm(x) / d + 1e-12)

    # single layer: bound is loose but holds
    single = mn.scale_to_spectral_norm(small_params(rng, m, 1), 1.0)
    x = rng.standard_normal(m)
    incs = mn.residual_increment_check(single, x)
    assert incs[0] <= math.e * np.linalg.norm(x)

    big = mn.scale_to_spectral_norm(small_params(rng, m, d), 2.0 / d)
    with pytest.raises(SpectralNormViolated):
        mn.residual_increment_check(big, x)


def test_empirical_risk():
    rng = np.random.default_rng(4)
    m, d = 3, 2
    teacher = small_params(rng, m, d)
    xs = rng.standard_normal((8, m))
    noiseless = mn.Dataset(xs, mn.forward_batch(teacher, xs))
    assert mn.empirical_risk(teacher, noiseless) == 0.0
    zero = mn.ResNetParams.zeros(m, d)
    ident = mn.Dataset(xs, xs)
    assert mn.empirical_risk(zero, ident) == 0.0
    # one-sample scalar case
    p = mn.ResNetParams([np.array([[0.7]])])
    data = mn.Dataset([[1.5]], [[0.3]])
    expected = (math.tanh(0.7 * 1.5) + 1.5 - 0.3) ** 2
    assert mn.empirical_risk(p, data) == pytest.approx(expected)


def test_weight_jacobian_scalar_and_zero_cases():
    # zero-weight scalar net: d h / d W = x (tanh'(0) = 1)
    p = mn.ResNetParams.zeros(1, 1)
    jac = mn.weight_jacobian(p, [2.0])
    assert jac.shape == (1, 1)
    assert jac[0, 0] == pytest.approx(2.0)
    # zero input: jacobian vanishes
    rng = np.random.default_rng(5)
    params = small_params(rng, 3, 2)
    assert np.allclose(mn.weight_jacobian(params, np.zeros(3)), 0.0)


def test_weight_jacobian_matches_finite_differences():
    rng = np.random.default_rng(6)
    for m, d in ((2, 1), (3, 2), (2, 4)):
        params = small_params(rng, m, d, scale=0.4)
        x = rng.standard_normal(m)
        jac = mn.weight_jacobian(params, x)
        fd = finite_difference_jacobian(params, x)
        denom = max(1.0, np.abs(fd).max())
        assert np.abs(jac - fd).max() / denom < 1e-6


def test_gauss_newton_energy():
    rng = np.random.default_rng(7)
    m, d = 3, 2
    p0 = mn.ResNetParams.zeros(m, d)
    teacher = small_params(rng, m, d)
    xs = rng.standard_normal((10, m))
    noiseless = mn.Dataset(xs, xs)  # zero-weight net fits exactly
    en0 = mn.gauss_newton_energy(p0, noiseless)
    assert np.allclose(en0.g, 0.0)

    data = mn.Dataset(xs, mn.forward_batch(teacher, xs))
    en = mn.gauss_newton_energy(p0, data)
    # matches loss value and gradient at the expansion point
    w0 = p0.flat()
    assert en.value(w0) == pytest.approx(mn.empirical_risk(p0, data))
    eps = 1e-6
    for j in rng.choice(w0.size, size=8, replace=False):
        wp = w0.copy()
        wp[j] += eps
        wm = w0.copy()
        wm[j] -= eps
        fd = (
            mn.empirical_risk(mn.ResNetParams.from_flat(wp, m, d), data)
            - mn.empirical_risk(mn.ResNetParams.from_flat(wm, m, d), data)
        ) / (2 * eps)
        assert abs(en.gradient(w0)[j] - fd) < 1e-6
    # PSD by construction
    assert np.linalg.eigvalsh(en.K).min() >= -1e-8

    # scalar net, single sample: K = 2 (dh/dW)^2, g = 2 r dh/dW
    p1 = mn.ResNetParams([np.array([[0.3]])])
    x1, y1 = 1.2, -0.4
    d1 = mn.Dataset([[x1]], [[y1]])
    e1 = mn.gauss_newton_energy(p1, d1)
    h = math.tanh(0.3 * x1) + x1
    dh = (1.0 - math.tanh(0.3 * x1) ** 2) * x1
    r = h - y1
    w0 = p1.flat()
    assert e1.gradient(w0)[0] == pytest.approx(2 * r * dh)
    assert e1.K[0, 0] == pytest.approx(2 * dh * dh)


def test_gauss_newton_nonzero_expansion_point():
    rng = np.random.default_rng(8)
    m, d = 2, 2
    params = small_params(rng, m, d)
    xs = rng.standard_normal((6, m))
    data = mn.Dataset(xs, rng.standard_normal((6, m)))
    en = mn.gauss_newton_energy(params, data)
    w0 = params.flat()
    assert en.value(w0) == pytest.approx(mn.empirical_risk(params, data))


def test_teacher_student_data():
    rng = np.random.default_rng(9)
    cfg = mn.TeacherStudentConfig(m=4, d=4, teacher_depth=2, n_train=12)
    teacher, train, make_test = mn.teacher_student_data(cfg, rng)
    assert cfg.depth_ratio == pytest.approx(2.0)
    # leading layers are zero (identity mappings)
    for w in teacher.layers[:2]:
        assert np.array_equal(w, np.zeros((4, 4)))
    # embedded teacher reproduces the standalone shallow teacher exactly
    # (zero layers are exact skips)
    standalone = mn.ResNetParams(teacher.layers[2:])
    assert np.array_equal(mn.forward_batch(standalone, train.xs), train.ys)
    # labels noiseless, teacher risk zero
    assert mn.empirical_risk(teacher, train) == 0.0
    test = make_test(50, np.random.default_rng(1))
    assert mn.empirical_risk(teacher, test) == 0.0
    # vanishing teacher variance: outputs approach the identity map
    tiny = mn.TeacherStudentConfig(
        m=4, d=4, teacher_depth=1, n_train=12, teacher_weight_variance=1e-14
    )
    _, train_tiny, _ = mn.teacher_student_data(tiny, np.random.default_rng(2))
    assert np.abs(train_tiny.ys - train_tiny.xs).max() < 1e-6


def test_multiscale_posterior_reductions():
    rng = np.random.default_rng(10)
    cfg = mn.TeacherStudentConfig(m=3, d=3, teacher_depth=1, n_train=10,
                                  prior_variance=1e-2)
    teacher, train, _ = mn.teacher_student_data(cfg, rng)
    energy = mn.gauss_newton_energy(mn.ResNetParams.zeros(cfg.m, cfg.d), train)
    prior = mn.iid_gaussian_prior(cfg)
    part = mn.layer_partition(cfg.m, cfg.d)

    sigma1 = 1e-2
    post0 = mn.multiscale_posterior(energy, prior, 0.0, sigma1, part)
    gibbs = mg.gibbs_gaussian(energy, prior, 1.0 / sigma1)
    assert np.array_equal(post0.mean, gibbs.mean)
    assert np.array_equal(post0.cov, gibbs.cov)

    # alpha -> 1: leading-layer marginals approach the prior's
    post1 = mn.multiscale_posterior(energy, prior, 0.999, sigma1, part)
    lead = mg.marginalize(post1, part, cfg.d - 1)
    prior_lead = mg.marginalize(prior, part, cfg.d - 1)
    assert np.abs(lead.mean - prior_lead.mean).max() < 1e-3
    assert np.abs(lead.cov - prior_lead.cov).max() < 0.01 * np.abs(prior_lead.cov).max()


def test_multiscale_posterior_depth_one():
    rng = np.random.default_rng(11)
    m = 2
    prior = mg.GaussianDist(np.zeros(m * m), 0.1 * np.eye(m * m))
    kmat = rng.standard_normal((m * m, m * m))
    energy = mg.QuadraticEnergy(kmat @ kmat.T, rng.standard_normal(m * m), 0.0)
    part = mn.layer_partition(m, 1)
    post = mn.multiscale_posterior(energy, prior, 0.0, 0.5, part)
    gibbs = mg.gibbs_gaussian(energy, prior, 2.0)
    assert np.array_equal(post.mean, gibbs.mean)


def test_population_risk_mc():
    rng = np.random.default_rng(12)
    cfg = mn.TeacherStudentConfig(m=3, d=3, teacher_depth=1, n_train=8)
    teacher, _, _ = mn.teacher_student_data(cfg, rng)
    dim = cfg.d * cfg.m**2
    # near-point-mass at the teacher: risk ~ 0
    point = mg.GaussianDist(teacher.flat(), 1e-12 * np.eye(dim))
    est, se = mn.population_risk_mc(point, teacher, cfg, 500, 20, 3)
    assert est < 1e-9
    # fixed seed -> bit-identical
    wide = mg.GaussianDist(np.zeros(dim), 0.05 * np.eye(dim))
    a = mn.population_risk_mc(wide, teacher, cfg, 300, 25, 42)
    b = mn.population_risk_mc(wide, teacher, cfg, 300, 25, 42)
    assert a == b
    assert a[1] > 0.0
    with pytest.raises(DimensionMismatch):
        mn.population_risk_mc(point, teacher,
                              mn.TeacherStudentConfig(m=2, d=3, teacher_depth=1,
                                                      n_train=8), 10, 5, 0)


def test_net_shape_and_dataset_json():
    with pytest.raises(ValueError):
        mn.NetShape(m=0, d=2)
    with pytest.raises(ValueError):
        mn.NetShape(m=2, d=2, R=0.0)
    shape = mn.NetShape(m=10, d=4, R=1.0)
    assert (shape.m, shape.d, shape.R) == (10, 4, 1.0)
    rng = np.random.default_rng(14)
    data = mn.Dataset(rng.standard_normal((5, 3)), rng.standard_normal((5, 3)))
    back = mn.Dataset.from_json(data.to_json())
    assert np.array_equal(back.xs, data.xs)
    assert np.array_equal(back.ys, data.ys)


def test_flatten_round_trip():
    rng = np.random.default_rng(13)
    params = small_params(rng, 3, 4)
    back = mn.ResNetParams.from_flat(params.flat(), 3, 4)
    for w1, w2 in zip(params.layers, back.layers):
        assert np.array_equal(w1, w2)
    # layer-major, row-major order
    flat = params.flat()
    assert flat[0] == params.layers[0][0, 0]
    assert flat[3] == params.layers[0][1, 0]
    assert flat[9] == params.layers[1][0, 0]
    p2 = mn.ResNetParams.from_json(params.to_json())
    assert np.array_equal(p2.flat(), flat)
