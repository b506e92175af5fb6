"""The three outer loops and their contraction/potential guarantees."""

import numpy as np
import pytest

from unreg import (
    AppaConfig,
    ConvergenceTrace,
    DualAppaConfig,
    DualState,
    OracleResult,
    RegularizedProblem,
    SolverConfig,
    TraceRow,
    accelerated_appa_run,
    accelerated_error_reduction,
    accelerated_oracle_factor,
    appa_run,
    dual_appa_run,
    dual_appa_theory_sigma,
    lambda_decrease_schedule,
    reduction_stage_count,
    squared_loss_problem,
)
from unreg.oracles import (
    ApcgDualOracle,
    ExactProxOracle,
    GeneralSvrgOracle,
    SdcaDualOracle,
    SvrgPrimalOracle,
)
from unreg.problem import ErmProblem, ScalarLoss

import helpers
from conftest import assert_close, make_squared


# ----------------------------------------------------------- plain appa

def test_appa_exact_prox_one_step(one_d):
    cfg = AppaConfig(lam=5.0, outer_iterations=1)
    x, trace = appa_run(one_d, np.zeros(1), cfg, ExactProxOracle())
    assert_close(x[0], 0.5, rel=1e-12)
    ratio = trace.values()[1] / trace.values()[0]
    assert_close(ratio, 0.25, rel=1e-10)
    assert ratio <= 5.0 / (5.0 + 5.0)
    assert [r.stage for r in trace.rows] == [0, 1]


def test_proximal_progress_equality_one_d(one_d):
    # min of F + (lam/2)||x||^2 at lam = mu = 5 sits exactly halfway
    lam = 5.0
    _, sub_opt = helpers.best_point(one_d, lam, np.zeros(1))
    _, f_star = helpers.best_point(one_d)
    lhs = sub_opt - f_star
    rhs = lam / (lam + one_d.mu) * (one_d.value(np.zeros(1)) - f_star)
    assert_close(lhs, 5.0 / 4.0, rel=1e-9)
    assert_close(rhs, 5.0 / 4.0, rel=1e-9)


def test_appa_fixed_point(one_d):
    x_star, _ = helpers.best_point(one_d)
    cfg = AppaConfig(lam=2.0, outer_iterations=3)
    x, trace = appa_run(one_d, x_star, cfg, ExactProxOracle())
    assert_close(x, x_star, rel=1e-10)
    spread = max(trace.values()) - min(trace.values())
    assert spread <= 1e-12


def test_appa_monotone_with_exact_prox(small_squared):
    cfg = AppaConfig(lam=1.0, outer_iterations=8)
    _, trace = appa_run(small_squared, np.array([3.0, -2.0, 1.0]), cfg,
                        ExactProxOracle())
    vals = trace.values()
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_appa_stops_at_target_epsilon(small_squared):
    cfg = AppaConfig(lam=0.5, outer_iterations=50, target_epsilon=1e-6)
    _, trace = appa_run(small_squared, np.ones(3), cfg, ExactProxOracle())
    assert trace.final.stage < 50
    assert trace.final.certified_gap <= 1e-6


def test_appa_svrg_oracle_mean_contraction():
    problem = make_squared(71, n=5, d=3)
    mu = problem.mu
    lam = 2.0 * mu
    _, f_star = helpers.best_point(problem)
    x0 = np.array([2.0, -1.0, 1.5])
    target = (lam + 0.75 * mu) / (lam + mu)
    stages = 4
    ratios = np.zeros(stages)
    seeds = 20
    for seed in range(seeds):
        oracle = SvrgPrimalOracle(SolverConfig(mode="theory"),
                                  rng=np.random.default_rng(seed))
        cfg = AppaConfig(lam=lam, outer_iterations=stages)
        _, trace = appa_run(problem, x0, cfg, oracle)
        errs = [v - f_star for v in trace.values()]
        for t in range(stages):
            ratios[t] += (errs[t + 1] / errs[t]) / seeds
    assert (ratios <= target).all()


# ----------------------------------------------------- accelerated appa

def _exact_mu_quadratic(seed, n=8, d=4, spread=3.0):
    """Quadratic ERM instance whose strong convexity is exactly 1."""
    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((n, d)))
    vt, _ = np.linalg.qr(rng.standard_normal((d, d)))
    sv = np.geomspace(spread, 1.0, d)
    a = (u * sv) @ vt.T
    return squared_loss_problem(a, rng.standard_normal(n), 1.0, mu=1.0)


def test_accel_requires_lam_above_two_mu(one_d):
    with pytest.raises(ValueError):
        accelerated_appa_run(one_d, np.zeros(1),
                             AppaConfig(lam=10.0, outer_iterations=1),
                             ExactProxOracle())


def test_accel_first_center_is_start(one_d):
    # v0 = x0 makes the first extrapolation collapse onto x0
    lam = 11.0
    cfg = AppaConfig(lam=lam, outer_iterations=1)
    x, _ = accelerated_appa_run(one_d, np.zeros(1), cfg, ExactProxOracle())
    want, _ = helpers.best_point(one_d, lam, np.zeros(1))
    assert_close(x, want, rel=1e-10)


def test_accel_oracle_factor_value():
    # rho = (1 + 8) / 1 at mu=1, lam=4
    assert_close(accelerated_oracle_factor(1.0, 4.0), 4.0 * 27.0, rel=1e-12)


def test_accel_potential_contracts_and_lower_bound_valid():
    problem = _exact_mu_quadratic(5)
    x_star, f_star = helpers.best_point(problem)
    cfg = AppaConfig(lam=4.0, outer_iterations=50)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal(problem.dim) * 2.0
    _, trace = accelerated_appa_run(problem, x0, cfg, ExactProxOracle(),
                                    f_star=f_star)
    pots = [r.extra["potential"] for r in trace.rows]
    per_stage = 1.0 - 1.0 / 6.0  # rho = 9
    for prev, nxt in zip(pots, pots[1:]):
        assert nxt <= per_stage * prev + 1e-9 * (1.0 + abs(prev))
    # tracked quadratic stays below F everywhere
    for row in trace.rows:
        psi_star, v = row.extra["psi_star"], row.extra["v"]
        for _ in range(20):
            x = rng.standard_normal(problem.dim) * 3.0
            psi = psi_star + 0.25 * float((x - v) @ (x - v))  # mu'/2 = 1/4
            assert psi <= problem.value(x) + 1e-9 * (1.0 + abs(psi))


class _IdentityOracle:
    """Returns the subproblem center untouched; makes g = 0."""

    def solve(self, rp, start, factor):
        return OracleResult(np.array(rp.center), 0.0, True)


def test_accel_zero_gradient_collapses_v_update(one_d):
    lam = 11.0
    cfg = AppaConfig(lam=lam, outer_iterations=1)
    x0 = np.array([2.0])
    x, trace = accelerated_appa_run(one_d, x0, cfg, _IdentityOracle())
    # y0 = x0, oracle echoes it, so v1 = (1-r) v0 + r y0 = x0
    assert_close(x, x0, rel=1e-14)
    assert_close(trace.rows[-1].extra["x"], x0, rel=1e-14)


def test_reduction_stage_count_edges():
    assert reduction_stage_count(1.0, 4.0, 1.0) == 0
    assert reduction_stage_count(1.0, 4.0, 0.5) == 0
    small = reduction_stage_count(1.0, 4.0, 10.0)
    big = reduction_stage_count(1.0, 4.0, 1e4)
    assert 0 < small < big


def test_error_reduction_c_one_returns_start(one_d):
    x0 = np.array([7.0])
    out = accelerated_error_reduction(one_d, x0, 1.0, 15.0, ExactProxOracle())
    assert (out == x0).all()


def test_error_reduction_exact_prox():
    problem = _exact_mu_quadratic(9)
    x_star, f_star = helpers.best_point(problem)
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal(problem.dim) * 3.0
    err0 = problem.value(x0) - f_star
    out = accelerated_error_reduction(problem, x0, 100.0, 4.0,
                                      ExactProxOracle())
    err1 = problem.value(out) - f_star
    assert err1 <= err0 / 100.0


def test_error_reduction_general_erm_with_svrg():
    from test_problem import _general_instance
    import scipy.optimize

    grp = _general_instance()
    opt = scipy.optimize.minimize(grp.value, np.zeros(2), method="BFGS",
                                  options={"gtol": 1e-12})
    f_star = float(opt.fun)
    x0 = np.array([2.0, -2.0])
    err0 = grp.value(x0) - f_star
    c = 3.0
    oracle = GeneralSvrgOracle(SolverConfig(), rng=np.random.default_rng(0))
    out = accelerated_error_reduction(grp, x0, c, 1.0, oracle)
    err1 = grp.value(out) - f_star
    assert err1 <= err0 / c


# ------------------------------------------------------------ dual appa

def test_dual_appa_fixed_point(one_d):
    x_star, _ = helpers.best_point(one_d)
    cfg = DualAppaConfig(lam=5.0, outer_iterations=3)
    oracle = SdcaDualOracle(SolverConfig(max_passes=200.0),
                            rng=np.random.default_rng(0))
    x, trace = dual_appa_run(one_d, x_star, cfg, oracle)
    assert_close(x, x_star, rel=1e-6, abs_tol=1e-8)
    assert not trace.diverged


def test_dual_appa_theory_ratio_one_d(one_d):
    lam = 5.0
    sigma = dual_appa_theory_sigma(one_d, lam)
    _, f_star = helpers.best_point(one_d)
    cfg = DualAppaConfig(lam=lam, outer_iterations=6, sigma=sigma,
                         mode="theory")
    for seed in range(5):
        oracle = SdcaDualOracle(SolverConfig(mode="theory"),
                                rng=np.random.default_rng(seed))
        _, trace = dual_appa_run(one_d, np.zeros(1), cfg, oracle)
        errs = [v - f_star for v in trace.values()]
        for prev, nxt in zip(errs, errs[1:]):
            if prev <= 1e-13:
                break
            assert nxt / prev <= 0.75 + 1e-9


def test_dual_appa_theory_sigma_floor(one_d):
    # 80 n^2 kl^2 max(k, kl) ceil(lam/mu) at the default slack 1/2
    assert dual_appa_theory_sigma(one_d, 5.0) == 80.0 * 4.0 * 1.0 * 1.0 * 1.0
    assert dual_appa_theory_sigma(one_d, 0.5, c_prime=0.25) \
        == 160.0 * 4.0 * 64.0 * 8.0 * 1.0


@pytest.mark.parametrize("oracle_cls", [SdcaDualOracle, ApcgDualOracle])
def test_dual_appa_invariants_small_instances(oracle_cls):
    for inst in range(2):
        problem = make_squared(inst + 600, n=5, d=3)
        lam = 2.0 * problem.mu
        sigma = dual_appa_theory_sigma(problem, lam)
        _, f_star = helpers.best_point(problem)
        cfg = DualAppaConfig(lam=lam, outer_iterations=10, sigma=sigma,
                             mode="theory")
        oracle = oracle_cls(SolverConfig(mode="theory"),
                            rng=np.random.default_rng(inst))
        x0 = np.full(3, 2.0)
        _, trace = dual_appa_run(
            problem, x0, cfg, oracle, f_star=f_star,
            dual_opt_oracle=lambda rp: helpers.dual_best(
                rp.base, rp.center, rp.lam)[1])
        for row in trace.rows[1:]:
            bound = row.extra["invariant_bound"]
            tol = 1e-9 * (1.0 + bound)
            assert row.extra["f_excess_prev"] <= bound + tol
            assert row.extra["dual_error"] <= bound + tol


def test_dual_appa_practical_decreases(small_squared):
    cfg = DualAppaConfig(lam=small_squared.mu, outer_iterations=8)
    oracle = SdcaDualOracle(SolverConfig(max_passes=400.0),
                            rng=np.random.default_rng(4))
    x, trace = dual_appa_run(small_squared, np.ones(3), cfg, oracle)
    vals = trace.values()
    assert vals[-1] < vals[0]
    assert not trace.diverged


def test_dual_appa_rejects_blackbox_problems():
    from test_problem import _general_instance
    cfg = DualAppaConfig(lam=1.0, outer_iterations=1)
    with pytest.raises(TypeError):
        dual_appa_run(_general_instance(), np.zeros(2), cfg,
                      SdcaDualOracle(rng=np.random.default_rng(0)))


# ------------------------------------------------------- lam schedule

def _trace_from_values(vals):
    t = ConvergenceTrace("appa")
    for i, v in enumerate(vals):
        t.append(TraceRow(i, float(i), v))
    return t


def test_lambda_schedule_keeps_fast_trace():
    trace = _trace_from_values([1.0, 0.5, 0.25, 0.125])
    assert lambda_decrease_schedule(trace, 10.0, 1.0) == 10.0


def test_lambda_schedule_cuts_stagnant_trace():
    trace = _trace_from_values([1.0, 0.999, 0.998, 0.997])
    assert lambda_decrease_schedule(trace, 10.0, 1.0) == 2.0
    assert lambda_decrease_schedule(trace, 100.0, 1.0) == 10.0


def test_lambda_schedule_respects_floor():
    trace = _trace_from_values([1.0, 0.999, 0.998, 0.997])
    assert lambda_decrease_schedule(trace, 2.0, 1.0) == 2.0


def test_lambda_schedule_needs_history():
    with pytest.raises(ValueError):
        lambda_decrease_schedule(_trace_from_values([1.0, 0.9]), 10.0, 1.0)
