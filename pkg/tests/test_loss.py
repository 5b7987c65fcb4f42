"""Loss, exact derivatives and the one-step Newton update."""

import numpy as np
import pytest
from helpers import ALL_KERNELS, fd_grad_hess, ols_oracle, random_params, rel_err

from cgpsr.data import Dataset
from cgpsr.genotype import CgpParams, Genotype, random_genotype
from cgpsr.loss import loss_with_derivatives, mse_loss, newton_step, predictions

K = {name: i for i, name in enumerate(ALL_KERNELS.names)}


def linear_genotype(constants):
    """c0*x0 + c1 on one feature; constants appear linearly."""
    params = CgpParams(1, 2, 1, 2, 2, ALL_KERNELS)
    genes = [K["mul"], 0, 1, K["add"], 3, 2, 4]
    return Genotype(genes, constants), params


def plane_genotype(constants):
    """c0*x0 + c1*x1 + c2 on two features."""
    params = CgpParams(2, 3, 1, 4, 4, ALL_KERNELS)
    genes = [
        K["mul"], 0, 2,
        K["mul"], 1, 3,
        K["add"], 5, 6,
        K["add"], 7, 4,
        8,
    ]
    return Genotype(genes, constants), params


def sine_genotype(constants):
    """c0 * sin(c1 * x0); c1 appears nonlinearly."""
    params = CgpParams(1, 2, 1, 3, 3, ALL_KERNELS)
    genes = [K["mul"], 2, 0, K["sin"], 3, 0, K["mul"], 1, 4, 5]
    return Genotype(genes, constants), params


def shared_sum_genotype(constants):
    """(c0 + c1) * x0: the two constants only ever appear summed."""
    params = CgpParams(1, 2, 1, 2, 2, ALL_KERNELS)
    genes = [K["add"], 1, 2, K["mul"], 3, 0, 4]
    return Genotype(genes, constants), params


def dataset_from(xs, ys):
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if xs.shape[0] == 1 and xs.size > 1:
        xs = xs.T
    return Dataset(features=xs.reshape(len(ys), -1), targets=np.asarray(ys, float))


def mse_oracle(g, params, data):
    """Straight-line recomputation, one sample at a time."""
    from cgpsr.genotype import evaluate

    total = 0.0
    for i in range(data.n_rows):
        pred = float(evaluate(g, params, list(data.features[i])))
        total += (data.targets[i] - pred) ** 2
    return total / data.n_rows


def test_perfect_fit_zero_loss():
    g, params = linear_genotype([2.0, -1.0])
    xs = np.linspace(-2, 2, 7)
    data = dataset_from(xs, 2.0 * xs - 1.0)
    assert mse_loss(g, params, data) == 0.0


def test_constant_zero_prediction():
    g, params = linear_genotype([0.0, 0.0])
    data = dataset_from([1.0, 2.0], [1.0, 1.0])
    assert mse_loss(g, params, data) == 1.0


def test_mse_matches_naive_recomputation():
    rng = np.random.default_rng(20)
    for _ in range(50):
        params = random_params(rng)
        g = random_genotype(params, rng)
        data = Dataset(
            features=rng.uniform(-3, 3, (8, params.n_features)),
            targets=rng.uniform(-3, 3, 8),
        )
        got = mse_loss(g, params, data)
        want = mse_oracle(g, params, data)
        if np.isfinite(want):
            assert got == pytest.approx(want, rel=1e-12)
        else:
            assert not np.isfinite(got)


def test_dimension_mismatch_rejected():
    g, params = linear_genotype([1.0, 1.0])
    data = Dataset(features=np.ones((3, 2)), targets=np.ones(3))
    with pytest.raises(ValueError):
        mse_loss(g, params, data)


def test_unused_constants_have_zero_gradient():
    params = CgpParams(1, 2, 1, 1, 1, ALL_KERNELS)
    g = Genotype([K["add"], 0, 0, 3], [5.0, -3.0])  # 2*x0, constants unexpressed
    data = dataset_from([1.0, 2.0, 3.0], [2.0, 4.0, 6.0])
    report = loss_with_derivatives(g, params, data)
    assert np.array_equal(report.grad, [0.0, 0.0])
    assert report.active.size == 0


def test_hand_computed_derivatives_single_sample():
    # c0*x0 on (x=1, y=2) at c0=0: loss 4, dl/dc0 = -4, d2l/dc0^2 = 2
    params = CgpParams(1, 1, 1, 1, 1, ALL_KERNELS)
    g = Genotype([K["mul"], 0, 1, 2], [0.0])
    data = dataset_from([1.0], [2.0])
    report = loss_with_derivatives(g, params, data)
    assert report.loss == 4.0
    assert np.array_equal(report.grad, [-4.0])
    assert np.array_equal(report.hess, [[2.0]])
    assert np.array_equal(report.active, [0])


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 60:
        params = random_params(rng)
        if params.n_constants == 0:
            continue
        g = random_genotype(params, rng)
        data = Dataset(
            features=rng.uniform(-3, 3, (12, params.n_features)),
            targets=rng.uniform(-3, 3, 12),
        )
        report = loss_with_derivatives(g, params, data)
        if not report.finite:
            continue

        def f(c):
            return mse_loss(g.with_constants(c), params, data)

        grad_fd, hess_fd = fd_grad_hess(f, g.constants)
        if not (np.all(np.isfinite(grad_fd)) and np.all(np.isfinite(hess_fd))):
            continue
        if max(np.max(np.abs(report.grad)), np.max(np.abs(report.hess))) > 1e5:
            continue  # singular neighborhood; finite differences unreliable
        assert rel_err(report.grad, grad_fd) < 1e-6
        assert rel_err(report.hess, hess_fd) < 1e-4
        checked += 1


def test_nonfinite_loss_flagged_and_inactive():
    params = CgpParams(1, 1, 1, 1, 1, ALL_KERNELS)
    g = Genotype([K["div"], 1, 0, 2], [1.0])  # c0 / x0 with a zero in the data
    data = dataset_from([0.0, 1.0], [1.0, 1.0])
    report = loss_with_derivatives(g, params, data)
    assert not report.finite
    assert report.active.size == 0
    assert newton_step(g.constants, report) is not g.constants
    assert np.array_equal(newton_step(g.constants, report), g.constants)


def test_one_newton_step_reaches_ols_for_linear_constants():
    rng = np.random.default_rng(22)
    for _ in range(30):
        xs = rng.uniform(-4, 4, 25)
        ys = rng.uniform(-4, 4, 25)
        g, params = linear_genotype(rng.uniform(-1, 1, 2))
        data = dataset_from(xs, ys)
        report = loss_with_derivatives(g, params, data)
        updated = newton_step(g.constants, report)
        beta = ols_oracle(xs.reshape(-1, 1), ys)
        assert np.allclose(updated, beta, atol=1e-9)
        after = loss_with_derivatives(g.with_constants(updated), params, data)
        assert np.linalg.norm(after.grad) < 1e-9
        assert after.loss <= report.loss + 1e-15


def test_empty_active_set_returns_constants_unchanged():
    params = CgpParams(1, 2, 1, 1, 1, ALL_KERNELS)
    g = Genotype([K["add"], 0, 0, 3], [1.0, 2.0])
    data = dataset_from([1.0, 2.0], [1.0, 2.0])
    report = loss_with_derivatives(g, params, data)
    assert np.array_equal(newton_step(g.constants, report), [1.0, 2.0])


def test_singular_hessian_skips_step():
    g, params = shared_sum_genotype([0.5, 0.25])
    xs = np.array([1.0, 2.0, 3.0])
    data = dataset_from(xs, 2.0 * xs)
    report = loss_with_derivatives(g, params, data)
    assert report.active.size == 2
    assert report.grad[0] == report.grad[1] != 0.0
    # rank-1 active Hessian: both rows identical
    assert np.array_equal(report.active_hess[0], report.active_hess[1])
    updated = newton_step(g.constants, report)
    assert np.array_equal(updated, g.constants)


def test_sum_vs_mean_scaling_leaves_newton_step_invariant():
    rng = np.random.default_rng(23)
    for _ in range(20):
        g, params = plane_genotype(rng.uniform(-1, 1, 3))
        data = Dataset(
            features=rng.uniform(-2, 2, (10, 2)), targets=rng.uniform(-2, 2, 10)
        )
        report = loss_with_derivatives(g, params, data)
        n = data.n_rows
        scaled = LossReportScaled(report, n)
        assert np.allclose(
            newton_step(g.constants, report), newton_step(g.constants, scaled), atol=1e-9
        )


class LossReportScaled:
    """The same report under a sum (not mean) loss convention."""

    def __init__(self, report, n):
        self.loss = report.loss * n
        self.grad = report.grad * n
        self.hess = report.hess * n
        self.active = report.active
        self.active_grad = report.active_grad * n
        self.active_hess = report.active_hess * n
        self.finite = report.finite


def test_repeated_newton_converges_on_smooth_problem():
    xs = np.linspace(0.2, 2.2, 40)
    data = dataset_from(xs, 2.0 * np.sin(1.5 * xs))
    g, params = sine_genotype([1.7, 1.35])
    norms = []
    for _ in range(8):
        report = loss_with_derivatives(g, params, data)
        norms.append(float(np.linalg.norm(report.grad)))
        g = g.with_constants(newton_step(g.constants, report))
    assert norms[-1] < 1e-8
    assert norms[-1] < norms[0]
    assert np.allclose(g.constants, [2.0, 1.5], atol=1e-6)


def test_inactive_constants_never_modified():
    rng = np.random.default_rng(24)
    g, params = sine_genotype([1.0, 1.0])
    # widen to 4 constants; c2, c3 never appear in the program
    params = CgpParams(1, 4, 1, 3, 3, ALL_KERNELS)
    genes = [K["mul"], 2, 0, K["sin"], 5, 0, K["mul"], 1, 6, 7]
    g = Genotype(genes, [1.8, 1.4, 9.0, -9.0])
    xs = np.linspace(0.1, 2.0, 20)
    data = dataset_from(xs, 2.0 * np.sin(1.5 * xs))
    for _ in range(5):
        report = loss_with_derivatives(g, params, data)
        g = g.with_constants(newton_step(g.constants, report))
        assert g.constants[2] == 9.0 and g.constants[3] == -9.0


def test_fit_linear_matches_newton_on_cgp_encoding():
    from cgpsr.data import fit_linear

    rng = np.random.default_rng(25)
    X = rng.uniform(-3, 3, (30, 2))
    y = 1.2 * X[:, 0] - 0.7 * X[:, 1] + 0.3 + rng.normal(0, 0.2, 30)
    data = Dataset(features=X, targets=y)
    model = fit_linear(data)
    g, params = plane_genotype(rng.uniform(-1, 1, 3))
    report = loss_with_derivatives(g, params, data)
    updated = newton_step(g.constants, report)
    assert np.allclose(updated[:2], model.coefficients, atol=1e-9)
    assert updated[2] == pytest.approx(model.intercept, abs=1e-9)


def test_predictions_shape_and_broadcast():
    params = CgpParams(2, 1, 1, 1, 1, ALL_KERNELS)
    g = Genotype([K["add"], 2, 2, 3], [3.0])  # constant-only output: c0 + c0
    data = Dataset(features=np.ones((5, 2)), targets=np.zeros(5))
    pred = predictions(g, params, data)
    assert pred.shape == (5,)
    assert np.all(pred == 6.0)
