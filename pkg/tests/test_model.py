import math

import numpy as np
import pytest

from byzsgd.model import (
    DataPoint,
    Dataset,
    Parameter,
    average_gradient,
    full_batch_gradient,
    generate_dataset,
    gradient,
    observed_loss,
    point_loss,
    sgd_step,
)


def test_linear_dataset_with_unit_features_recovers_w_true():
    # labels are exactly x . w_true, so the optimum is w_true itself
    pts = tuple(DataPoint(features=np.array([1.0]), label=2.0) for _ in range(4))
    ds = Dataset(points=pts, optimum=np.array([2.0]), task="linear_regression")
    assert all(p.label == 2.0 for p in ds.points)
    g = full_batch_gradient("linear_regression", ds.optimum, ds.features(), ds.labels())
    assert np.linalg.norm(g) == 0.0


def test_generated_linear_optimum_is_stationary():
    ds = generate_dataset("linear_regression", N=100, d=5, seed=7)
    g = full_batch_gradient(ds.task, ds.optimum, ds.features(), ds.labels())
    assert np.linalg.norm(g) <= 1e-8


def _descent_oracle_optimum(X, y, tol=1e-10, max_iter=500_000):
    # independent full-batch gradient descent, no Newton machinery
    n = X.shape[0]
    w = np.zeros(X.shape[1])
    eta = 0.5
    for _ in range(max_iter):
        margins = y * (X @ w)
        sig = 1.0 / (1.0 + np.exp(-margins))
        grad = -(X.T @ (y * (1.0 - sig))) / n
        if np.linalg.norm(grad) <= tol:
            break
        w = w - eta * grad
    assert np.linalg.norm(grad) <= tol, "oracle did not converge"
    return w


def test_logistic_optimum_matches_descent_oracle():
    ds = generate_dataset("logistic_regression", N=50, d=2, seed=3)
    oracle = _descent_oracle_optimum(ds.features(), ds.labels())
    assert np.max(np.abs(ds.optimum - oracle)) <= 1e-6


def test_generate_dataset_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        generate_dataset("linear_regression", N=3, d=5, seed=0)
    with pytest.raises(ValueError):
        generate_dataset("linear_regression", N=3, d=0, seed=0)


def test_linear_gradient_unit_case():
    w = Parameter(value=np.zeros(2))
    z = DataPoint(features=np.array([1.0, 0.0]), label=1.0)
    g = gradient("linear_regression", w, z)
    assert np.array_equal(g, np.array([-1.0, 0.0]))


def test_gradient_is_bit_deterministic():
    rng = np.random.default_rng(11)
    for task in ("linear_regression", "logistic_regression"):
        for _ in range(20):
            w = Parameter(value=rng.standard_normal(4))
            label = 1.0 if task == "logistic_regression" else float(rng.standard_normal())
            z = DataPoint(features=rng.standard_normal(4), label=label)
            a = gradient(task, w, z)
            b = gradient(task, w, z)
            assert a.tobytes() == b.tobytes()


def _fd_gradient(task, w, z, h=1e-6):
    g = np.zeros_like(w.value)
    for i in range(w.value.shape[0]):
        wp = np.array(w.value)
        wm = np.array(w.value)
        wp[i] += h
        wm[i] -= h
        g[i] = (
            point_loss(task, Parameter(wp), z) - point_loss(task, Parameter(wm), z)
        ) / (2 * h)
    return g


@pytest.mark.parametrize("task", ["linear_regression", "logistic_regression"])
def test_gradient_matches_finite_differences(task):
    rng = np.random.default_rng(23)
    for _ in range(100):
        w = Parameter(value=rng.standard_normal(3))
        if task == "logistic_regression":
            label = 1.0 if rng.random() < 0.5 else -1.0
        else:
            label = float(rng.standard_normal())
        z = DataPoint(features=rng.standard_normal(3), label=label)
        analytic = gradient(task, w, z)
        fd = _fd_gradient(task, w, z)
        err = np.linalg.norm(analytic - fd) / max(1.0, np.linalg.norm(fd))
        assert err <= 1e-5


def test_average_gradient_singleton_and_mean():
    assert np.array_equal(average_gradient([np.array([1.0, 2.0])]), np.array([1.0, 2.0]))
    avg = average_gradient([np.array([1.0, 0.0]), np.array([3.0, 0.0])])
    assert np.array_equal(avg, np.array([2.0, 0.0]))


def test_average_gradient_is_sequential_sum():
    rng = np.random.default_rng(5)
    grads = [rng.standard_normal(3) for _ in range(17)]
    total = np.zeros(3)
    for g in grads:
        total = total + g
    assert average_gradient(grads).tobytes() == (total / len(grads)).tobytes()


def test_average_gradient_rejects_empty():
    with pytest.raises(ValueError):
        average_gradient([])


def test_sgd_step_arithmetic():
    w = sgd_step(Parameter(value=np.array([0.0, 0.0])), np.array([1.0, 2.0]), 0.1)
    assert np.allclose(w.value, [-0.1, -0.2])
    assert w.iteration == 1


def test_sgd_step_zero_gradient_is_fixed_point():
    w0 = Parameter(value=np.array([1.5, -2.0]), iteration=3)
    w1 = sgd_step(w0, np.zeros(2), 0.7)
    assert np.array_equal(w1.value, w0.value)
    assert w1.iteration == 4


def test_sgd_step_single_point_newton_like():
    # d=1, x=1, y=0, w=1: gradient equals w, so eta=1 lands exactly at zero
    w = Parameter(value=np.array([1.0]))
    z = DataPoint(features=np.array([1.0]), label=0.0)
    g = gradient("linear_regression", w, z)
    assert np.array_equal(sgd_step(w, g, 1.0).value, np.array([0.0]))


def test_sgd_step_rejects_nonpositive_eta():
    with pytest.raises(ValueError):
        sgd_step(Parameter(value=np.zeros(1)), np.zeros(1), 0.0)


def test_observed_loss_at_optimum_is_zero():
    ds = generate_dataset("linear_regression", N=20, d=2, seed=9)
    w = Parameter(value=ds.optimum)
    assert observed_loss(ds.task, w, ds.points) <= 1e-12


def test_observed_loss_single_point():
    # x.w - y = 2 -> loss = 0.5 * 4 = 2
    z = DataPoint(features=np.array([1.0]), label=0.0)
    w = Parameter(value=np.array([2.0]))
    assert observed_loss("linear_regression", w, [z]) == 2.0


def test_observed_loss_matches_independent_accumulation():
    ds = generate_dataset("logistic_regression", N=30, d=3, seed=4)
    rng = np.random.default_rng(6)
    w = Parameter(value=rng.standard_normal(3))
    batch = ds.points[:17]
    oracle = math.fsum(point_loss(ds.task, w, z) for z in batch) / len(batch)
    assert abs(observed_loss(ds.task, w, batch) - oracle) <= 1e-12


def test_observed_loss_rejects_empty_batch():
    with pytest.raises(ValueError):
        observed_loss("linear_regression", Parameter(value=np.zeros(1)), [])


def test_full_batch_descent_strictly_decreases_loss():
    # zero-noise linear task, eta_t = eta0 / (1 + t)
    ds = generate_dataset("linear_regression", N=10, d=2, seed=13)
    w = Parameter(value=np.zeros(2))
    losses = [observed_loss(ds.task, w, ds.points)]
    for t in range(2000):
        g = full_batch_gradient(ds.task, w.value, ds.features(), ds.labels())
        w = sgd_step(w, g, 0.5 / (1 + t))
        losses.append(observed_loss(ds.task, w, ds.points))
    for before, after in zip(losses, losses[1:]):
        assert after < before or before <= 1e-10
