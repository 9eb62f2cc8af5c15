import numpy as np
import pytest

from byzsgd.policy import (
    PolicyState,
    efficiency_lower_bound,
    expected_efficiency,
    lambda_from_loss,
    objective,
    prob_faulty_update,
    prob_unidentified,
    q_for_delta,
    q_star,
    trimmed_mean,
)


def test_efficiency_bound_endpoints():
    assert efficiency_lower_bound(0.0, 5) == 1.0
    assert efficiency_lower_bound(1.0, 1) == pytest.approx(1.0 / 3.0)


def test_efficiency_bound_monte_carlo():
    # coin-flip simulation of gradients computed vs used: a checked round
    # costs (2f+1) copies per gradient in the worst case, an unchecked one 1
    q, f = 0.125, 2
    rng = np.random.default_rng(1234)
    checks = rng.random(1_000_000) < q
    per_round_eff = np.where(checks, 1.0 / (2 * f + 1), 1.0)
    assert abs(per_round_eff.mean() - efficiency_lower_bound(q, f)) <= 1e-3


def test_efficiency_bound_rejects_bad_inputs():
    with pytest.raises(ValueError):
        efficiency_lower_bound(1.5, 1)
    with pytest.raises(ValueError):
        efficiency_lower_bound(0.5, -1)


def test_q_for_delta_identity():
    q = q_for_delta(0.1, 2)
    assert q == 0.125
    assert efficiency_lower_bound(q, 2) == pytest.approx(0.9, abs=1e-12)
    assert q_for_delta(0.01, 1) == pytest.approx(0.015)
    assert efficiency_lower_bound(q_for_delta(0.01, 1), 1) == pytest.approx(0.99, abs=1e-12)


def test_q_for_delta_boundary_and_errors():
    f = 3
    assert q_for_delta(2 * f / (2 * f + 1), f) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        q_for_delta(0.99, 1)  # would need q > 1
    with pytest.raises(ValueError):
        q_for_delta(0.1, 0)


def test_bound_identity_across_grid():
    for f in range(1, 6):
        for delta in (0.01, 0.05, 0.1, 0.3):
            assert abs(efficiency_lower_bound(q_for_delta(delta, f), f) - (1 - delta)) <= 1e-12


def test_prob_faulty_update_values():
    assert prob_faulty_update(1.0, 0.7, 3) == 0.0
    assert prob_faulty_update(0.0, 0.5, 1) == 0.5
    assert prob_faulty_update(0.25, 0.5, 1) == pytest.approx(0.375)


def test_prob_faulty_update_monte_carlo():
    q, p, f_t = 0.25, 0.3, 3
    rng = np.random.default_rng(77)
    rounds = 100_000
    tampered = (rng.random((rounds, f_t)) < p).any(axis=1)
    unchecked = rng.random(rounds) >= q
    empirical = float((tampered & unchecked).mean())
    assert abs(empirical - prob_faulty_update(q, p, f_t)) <= 0.005


def test_prob_unidentified_values():
    assert prob_unidentified(0.3, 0.5, 0) == 1.0
    assert prob_unidentified(1.0, 1.0, 1) == 0.0
    assert prob_unidentified(0.2, 0.5, 20) == pytest.approx(0.9**20)


def test_prob_unidentified_monte_carlo_upper_bound():
    # per-round identification happens exactly when the check coin and the
    # tamper coin both come up; survival beyond t is then (1 - q p)^t
    q, p = 0.2, 0.5
    rng = np.random.default_rng(99)
    trials = 10_000
    horizon = 30
    caught = (rng.random((trials, horizon)) < q) & (rng.random((trials, horizon)) < p)
    alive = np.ones(trials, dtype=bool)
    for t in range(1, horizon + 1):
        alive &= ~caught[:, t - 1]
        bound = prob_unidentified(q, p, t)
        sigma = np.sqrt(bound * (1 - bound) / trials)
        assert alive.mean() <= bound + 3 * sigma


def test_lambda_from_loss():
    assert lambda_from_loss(0.0) == 0.0
    assert lambda_from_loss(np.log(2.0)) == pytest.approx(0.5)
    assert lambda_from_loss(50.0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        lambda_from_loss(-0.1)


def test_objective_substitutions():
    p, f_t = 0.4, 2
    b = 1 - (1 - p) ** f_t
    assert objective(0.0, 1.0, p, f_t) == pytest.approx(b**2)
    a = 2 * f_t / (2 * f_t + 1)
    for lam in (0.0, 0.3, 1.0):
        assert objective(1.0, lam, p, f_t) == pytest.approx((1 - lam) * a**2)


def test_expected_efficiency_display():
    assert expected_efficiency(0.0, 3) == 1.0
    assert expected_efficiency(1.0, 3) == pytest.approx(1.0 / 7.0)


def test_q_star_known_value():
    # lambda=1/2, f_t=1, p=1/2: closed form gives 9/25
    assert q_star(0.5, 0.5, 1) == pytest.approx(0.36, abs=1e-12)


def test_q_star_boundaries():
    assert q_star(0.7, 0.0, 3) == 0.0
    assert q_star(0.5, 0.5, 0) == 0.0
    assert q_star(1.0, 0.5, 2) == 1.0
    assert q_star(0.0, 0.5, 2) == 0.0
    assert q_star(1.0, 0.0, 2) == 0.0


def _grid_argmin(lam, p, f_t, steps=1_000_000):
    q = np.linspace(0.0, 1.0, steps + 1)
    a = 2.0 * f_t / (2.0 * f_t + 1.0)
    b = 1.0 - (1.0 - p) ** f_t
    values = (1 - lam) * (a * q) ** 2 + lam * (b * (1 - q)) ** 2
    return float(q[int(np.argmin(values))])


def test_q_star_matches_grid_search_spot_checks():
    for lam, p, f_t in [(0.5, 0.5, 1), (0.2, 0.8, 3), (0.9, 0.1, 2), (0.35, 0.6, 5)]:
        assert abs(q_star(lam, p, f_t) - _grid_argmin(lam, p, f_t)) <= 2e-6


def test_q_star_optimality_on_coarse_grid():
    for lam, p, f_t in [(0.5, 0.5, 1), (0.8, 0.3, 2), (0.1, 0.9, 4)]:
        best = q_star(lam, p, f_t)
        target = objective(best, lam, p, f_t)
        for q in np.linspace(0.0, 1.0, 1001):
            assert target <= objective(float(q), lam, p, f_t) + 1e-15


def test_q_star_monotone_in_lambda_and_p():
    lams = [0.1 * i for i in range(11)]
    ps = [0.1 * i for i in range(11)]
    for f_t in range(6):
        for p in ps:
            values = [q_star(lam, p, f_t) for lam in lams]
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
        for lam in lams:
            values = [q_star(lam, p, f_t) for p in ps]
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))


def test_trimmed_mean_values():
    assert trimmed_mean([1, 2, 3, 100], 1) == 2.5
    assert trimmed_mean([4.0, 6.0], 0) == 5.0
    with pytest.raises(ValueError):
        trimmed_mean([1, 2], 1)
    with pytest.raises(ValueError):
        trimmed_mean([1, 2, 3], -1)


def test_trimmed_mean_suppresses_outliers():
    rng = np.random.default_rng(3)
    for _ in range(200):
        f = int(rng.integers(1, 4))
        honest = rng.random(2 * f + 1) * 5.0
        outliers = rng.standard_normal(f) * 1e6
        values = list(honest) + list(outliers)
        est = trimmed_mean(values, f)
        assert honest.min() <= est <= honest.max()


def test_policy_state_residual_faults():
    st = PolicyState(scheme="randomized", fault_budget=3, identified=1)
    assert st.residual_faults == 2
    with pytest.raises(ValueError):
        PolicyState(scheme="bogus", fault_budget=1)
