"""Regularized subproblem, its dual, the mappings and the error bounds."""

import numpy as np
import pytest

from unreg import (
    ConjugateDomainError,
    DualState,
    RegularizedProblem,
    check_dual_bounds_primal,
    check_initial_dual_error,
    check_recenter_error_bound,
    dual_to_primal,
    duality_gap,
    primal_to_dual,
)
from unreg.oracles import sdca_coordinate_step

import helpers
from conftest import assert_close, make_logistic, make_squared


def _rp(problem, center, lam):
    return RegularizedProblem(problem, np.asarray(center, dtype=np.float64),
                              lam)


# ------------------------------------------------------- primal values

def test_value_at_center_is_base_value(small_squared):
    s = np.array([0.3, -1.0, 0.7])
    rp = _rp(small_squared, s, 2.0)
    assert rp.value(s) == small_squared.value(s)


def test_value_hand_case(one_d):
    rp = _rp(one_d, [0.0], 5.0)
    # (5/2)(0.5-1)^2 + (5/2)(0.5)^2
    assert rp.value(np.array([0.5])) == 1.25


def test_value_dominates_base_away_from_center(small_squared):
    rng = np.random.default_rng(0)
    s = rng.standard_normal(3)
    rp = _rp(small_squared, s, 1.3)
    for _ in range(20):
        x = rng.standard_normal(3)
        assert rp.value(x) >= small_squared.value(x)
    assert rp.value(s) == small_squared.value(s)


def test_small_lambda_limit(small_squared):
    s = np.zeros(3)
    x = np.array([1.0, 2.0, -1.0])
    lam = 1e-9
    rp = _rp(small_squared, s, lam)
    assert abs(rp.value(x) - small_squared.value(x)) <= 0.5 * lam * 6.0 + 1e-15


def test_kappa_lambda_hand_cases(one_d):
    # L R^2 = 4
    assert _rp(one_d, [0.0], 5.0).kappa_lambda == 1
    assert _rp(one_d, [0.0], 0.5).kappa_lambda == 8


# --------------------------------------------------------- dual values

def test_dual_value_zero_vector():
    problem = make_squared(1)
    labels0 = tuple(type(l)(l.kind, 0.0, l.weight) for l in problem.losses)
    p0 = type(problem)(matrix=problem.matrix, losses=labels0, mu=problem.mu)
    rp = _rp(p0, np.zeros(3), 2.0)
    assert rp.dual_value(np.zeros(5)) == 0.0


def test_dual_value_matches_raw_formula(small_squared):
    rng = np.random.default_rng(4)
    s = rng.standard_normal(3)
    rp = _rp(small_squared, s, 1.7)
    for _ in range(10):
        y = rng.standard_normal(5)
        want = helpers.raw_dual_value(small_squared, s, 1.7, y)
        assert_close(rp.dual_value(y), want, rel=1e-12)


def test_dual_value_domain_error_names_coordinate(small_logistic):
    rp = _rp(small_logistic, np.zeros(3), 1.0)
    y = np.zeros(5)
    y[2] = 10.0
    with pytest.raises(ConjugateDomainError) as exc:
        rp.dual_value(y)
    assert "2" in str(exc.value)


def test_dual_optimum_negates_primal_optimum(small_squared):
    s = np.array([0.5, 0.5, -0.2])
    lam = 0.9
    rp = _rp(small_squared, s, lam)
    x_star, f_star = helpers.best_point(small_squared, lam, s)
    y_star, g_star = helpers.dual_best(small_squared, s, lam)
    assert_close(rp.dual_value(y_star), -f_star, rel=1e-8)
    assert_close(g_star, -f_star, rel=1e-12)
    assert_close(rp.value(x_star), f_star, rel=1e-12)


# ------------------------------------------------------------ mappings

def test_primal_to_dual_one_d(one_d):
    y = primal_to_dual(one_d, np.array([0.0]))
    assert y.tolist() == [-1.0, -2.0]


def test_primal_to_dual_interpolating_solution():
    rng = np.random.default_rng(12)
    a = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
    x0 = rng.standard_normal(3)
    from unreg import squared_loss_problem
    problem = squared_loss_problem(a, a @ x0, 1.0, mu=0.1)
    y = primal_to_dual(problem, x0)
    assert_close(y, np.zeros(3), rel=0.0, abs_tol=1e-12)


def test_aty_equals_gradient_minus_ridge(small_logistic):
    x = np.array([0.4, -0.3, 1.1])
    y = primal_to_dual(small_logistic, x)
    aty = small_logistic.matrix.T @ y
    want = small_logistic.gradient(x) - small_logistic.explicit_l2 * x
    assert_close(aty, want, rel=1e-12, abs_tol=1e-15)


def test_dual_to_primal_zero_is_center(small_squared):
    s = np.array([1.0, -1.0, 2.0])
    rp = _rp(small_squared, s, 3.0)
    state = DualState.create(small_squared.matrix, np.zeros(5))
    assert dual_to_primal(rp, state).tolist() == s.tolist()


def test_dual_to_primal_at_optimum(tiny_ls):
    s = np.array([0.2, -0.5])
    lam = 0.8
    rp = _rp(tiny_ls, s, lam)
    y_star, _ = helpers.dual_best(tiny_ls, s, lam)
    x_star, _ = helpers.best_point(tiny_ls, lam, s)
    assert_close(dual_to_primal(rp, y_star), x_star, rel=1e-8, abs_tol=1e-10)


def test_dual_to_primal_linearity(small_squared):
    rng = np.random.default_rng(6)
    s = rng.standard_normal(3)
    rp = _rp(small_squared, s, 2.2)
    y1 = rng.standard_normal(5)
    y2 = rng.standard_normal(5)
    lhs = dual_to_primal(rp, y1 + y2) - s
    rhs = (dual_to_primal(rp, y1) - s) + (dual_to_primal(rp, y2) - s)
    assert_close(lhs, rhs, rel=1e-12, abs_tol=1e-14)


def test_mapping_consistency_roundtrip(small_squared):
    s = np.array([0.1, 0.9, -0.4])
    lam = 1.1
    rp = _rp(small_squared, s, lam)
    x_star, _ = helpers.best_point(small_squared, lam, s)
    y_hat = primal_to_dual(small_squared, x_star)
    assert_close(dual_to_primal(rp, y_hat), x_star, rel=1e-7, abs_tol=1e-9)


def test_recenter_identity(small_squared):
    rng = np.random.default_rng(21)
    lam = 1.4
    s = rng.standard_normal(3)
    y = rng.standard_normal(5)
    x = s - small_squared.matrix.T @ y / lam
    rp_new = _rp(small_squared, x, lam)
    got = dual_to_primal(rp_new, y)
    want = 2.0 * x - s
    assert_close(got, want, rel=1e-12, abs_tol=1e-13)


# -------------------------------------------------------- duality gap

def test_gap_one_d_hand_case(one_d):
    rp = _rp(one_d, [0.0], 5.0)
    x = np.array([0.0])
    y = primal_to_dual(one_d, x)
    gap = duality_gap(rp, x, y)
    # grad F(0) = -5, so ||grad||^2 / (2 lam) = 25 / 10 and x = s
    assert_close(gap, 2.5, rel=1e-12)


def test_gap_zero_at_exact_optima(small_squared):
    s = np.array([0.6, 0.0, -1.2])
    lam = 0.7
    rp = _rp(small_squared, s, lam)
    x_star, _ = helpers.best_point(small_squared, lam, s)
    y_star, _ = helpers.dual_best(small_squared, s, lam)
    assert abs(duality_gap(rp, x_star, y_star)) <= 1e-8


def test_gap_zero_at_erm_minimizer(small_squared):
    x_star, _ = helpers.best_point(small_squared)
    rp = _rp(small_squared, x_star, 2.0)
    y = primal_to_dual(small_squared, x_star)
    assert abs(duality_gap(rp, x_star, y)) <= 1e-10


def test_gap_nonnegative_in_domain():
    for maker, n in ((make_squared, 5), (make_logistic, 5)):
        problem = maker(33)
        rng = np.random.default_rng(17)
        for _ in range(30):
            s = rng.standard_normal(3)
            lam = float(10.0 ** rng.uniform(-1, 1))
            rp = _rp(problem, s, lam)
            x = rng.standard_normal(3)
            y = primal_to_dual(problem, rng.standard_normal(3))
            gap = duality_gap(rp, x, y)
            scale = 1.0 + abs(rp.value(x))
            assert gap >= -1e-9 * scale


def test_gap_identity_against_subproblem_gradient():
    """gap(x, y(x)) equals ||grad f_{s,lam}(x)||^2 / (2 lam) exactly."""
    rng = np.random.default_rng(99)
    for seed in range(5):
        problem = make_squared(seed + 100)
        for _ in range(20):
            x = rng.standard_normal(3)
            s = rng.standard_normal(3)
            lam = float(10.0 ** rng.uniform(-1, 1.5))
            rp = _rp(problem, s, lam)
            gap = duality_gap(rp, x, primal_to_dual(problem, x))
            g = rp.gradient(x)
            want = float(g @ g) / (2.0 * lam)
            scale = 1.0 + abs(gap) + abs(want)
            assert abs(gap - want) <= 1e-9 * scale


def test_gap_identity_center_form_at_center():
    """At x = s the identity reduces to ||grad F(s)||^2 / (2 lam)."""
    rng = np.random.default_rng(77)
    for seed in range(5):
        problem = make_squared(seed + 200)
        for _ in range(20):
            s = rng.standard_normal(3)
            lam = float(10.0 ** rng.uniform(-1, 1.5))
            rp = _rp(problem, s, lam)
            gap = duality_gap(rp, s, primal_to_dual(problem, s))
            g = problem.gradient(s)
            want = float(g @ g) / (2.0 * lam)
            assert abs(gap - want) <= 1e-9 * (1.0 + abs(gap) + abs(want))


# ------------------------------------------------------- error bounds

def test_dual_bounds_primal_trivial_and_random(tiny_ls):
    s = np.array([0.4, 0.4])
    lam = 0.6
    rp = _rp(tiny_ls, s, lam)
    x_star, f_star = helpers.best_point(tiny_ls, lam, s)
    y_star, g_star = helpers.dual_best(tiny_ls, s, lam)
    res = check_dual_bounds_primal(rp, y_star, f_star, g_star)
    assert res.ok and abs(res.lhs) <= 1e-8 and abs(res.rhs) <= 1e-7
    rng = np.random.default_rng(2)
    for scale in (0.01, 1.0, 100.0):
        y = y_star + scale * rng.standard_normal(3)
        assert check_dual_bounds_primal(rp, y, f_star, g_star).ok


def test_initial_dual_error_fixed_point_and_random(tiny_ls):
    lam = 0.6
    # fixed point: center at the subproblem's own minimizer
    x_star, _ = helpers.best_point(tiny_ls)
    rp = _rp(tiny_ls, x_star, lam)
    f_opt = helpers.best_point(tiny_ls, lam, x_star)[1]
    g_opt = helpers.dual_best(tiny_ls, x_star, lam)[1]
    res = check_initial_dual_error(rp, f_opt, g_opt)
    assert res.ok and abs(res.lhs) <= 1e-8 and abs(res.rhs) <= 1e-8
    rng = np.random.default_rng(10)
    for scale in (1.0, 50.0):
        x = scale * rng.standard_normal(2)
        rp = _rp(tiny_ls, x, lam)
        f_opt = helpers.best_point(tiny_ls, lam, x)[1]
        g_opt = helpers.dual_best(tiny_ls, x, lam)[1]
        assert check_initial_dual_error(rp, f_opt, g_opt).ok


def test_recenter_bound_cases(tiny_ls):
    lam = 0.9
    erm_opt = helpers.best_point(tiny_ls)[1]
    rng = np.random.default_rng(14)
    for scale in (0.0, 0.3, 5.0):
        x = rng.standard_normal(2)
        y_opt, _ = helpers.dual_best(tiny_ls, x, lam)
        y = y_opt + scale * rng.standard_normal(3)
        rp_old = _rp(tiny_ls, x, lam)
        x_new = dual_to_primal(rp_old, y)
        g_old = helpers.dual_best(tiny_ls, x, lam)[1]
        g_new = helpers.dual_best(tiny_ls, x_new, lam)[1]
        res = check_recenter_error_bound(tiny_ls, lam, x, y, erm_opt,
                                         g_old, g_new)
        assert res.ok


def test_error_bounds_over_seeded_instances():
    """All three inequality checks across 50 small random instances."""
    rng = np.random.default_rng(50)
    for seed in range(50):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, min(n, 4) + 1))
        problem = make_squared(seed + 300, n=n, d=d)
        lam = float(problem.mu * 10.0 ** rng.uniform(-0.5, 1.5))
        x = rng.standard_normal(d)
        rp = _rp(problem, x, lam)
        f_opt = helpers.best_point(problem, lam, x)[1]
        g_opt = helpers.dual_best(problem, x, lam)[1]
        assert check_initial_dual_error(rp, f_opt, g_opt).ok
        y = helpers.dual_best(problem, x, lam)[0] + rng.standard_normal(n)
        assert check_dual_bounds_primal(rp, y, f_opt, g_opt).ok
        erm_opt = helpers.best_point(problem)[1]
        x_new = dual_to_primal(rp, y)
        g_new = helpers.dual_best(problem, x_new, lam)[1]
        assert check_recenter_error_bound(problem, lam, x, y, erm_opt,
                                          g_opt, g_new).ok


# ---------------------------------------------------------- dual state

def test_dual_state_cache_coherence(small_squared):
    rng = np.random.default_rng(8)
    s = rng.standard_normal(3)
    rp = _rp(small_squared, s, 0.5)
    y0 = primal_to_dual(small_squared, rng.standard_normal(3))
    state = DualState.create(small_squared.matrix, y0)
    n = small_squared.n
    for k in range(10 * n):
        sdca_coordinate_step(rp, state, k % n)
    fresh = small_squared.matrix.T @ state.y
    scale = float(np.linalg.norm(fresh)) + 1e-12
    assert float(np.linalg.norm(state.aty - fresh)) <= 1e-8 * scale


def test_dual_state_refresh_is_exact(small_squared):
    y = np.array([0.1, -0.2, 0.3, 0.4, -0.5])
    state = DualState.create(small_squared.matrix, y)
    state.aty = state.aty + 1e-3
    state.refresh(small_squared.matrix)
    assert_close(state.aty, small_squared.matrix.T @ y, rel=1e-15)
