"""Executable checks for the inequality toolkit behind the outer loops.

Each ``check_*`` function evaluates one bound or identity on a concrete
instance with high-precision optima from the reference solvers and
returns a LemmaReport.  ``run_all_checks`` drives the seeded battery:
small dense instances crossed with a spread of proximal weights,
including a near-singular base so the constants survive bad
conditioning.

Margins are scale-normalized: for an inequality lhs <= rhs the stored
slack is (rhs - lhs) / (1 + |lhs| + |rhs|), for an identity it is
-|lhs - rhs| / (1 + |lhs| + |rhs|); a check violates when the slack
falls below -tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .duality import (
    RegularizedProblem,
    check_dual_bounds_primal,
    check_initial_dual_error,
    check_recenter_error_bound,
    dual_to_primal,
    primal_to_dual,
)
from .problem import ErmProblem, logistic_loss_problem, squared_loss_problem
from .reference import minimize_erm, minimize_regularized

BATTERY_SEED = 0xC0FFEE

INEQ_TOL = 1e-9
IDENTITY_TOL = 1e-9
MERGE_TOL = 1e-12


@dataclass(frozen=True)
class LemmaReport:
    lemma_id: str
    instances: int
    violations: int
    worst_slack: float
    tolerance: float

    def merged(self, other: "LemmaReport") -> "LemmaReport":
        if other.lemma_id != self.lemma_id:
            raise ValueError("cannot merge reports for different lemmas")
        return LemmaReport(
            self.lemma_id,
            self.instances + other.instances,
            self.violations + other.violations,
            min(self.worst_slack, other.worst_slack),
            max(self.tolerance, other.tolerance),
        )

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _ineq(lhs: float, rhs: float) -> float:
    return (rhs - lhs) / (1.0 + abs(lhs) + abs(rhs))


def _ident(lhs: float, rhs: float) -> float:
    return -abs(lhs - rhs) / (1.0 + abs(lhs) + abs(rhs))


def _report(lemma_id: str, slacks, tol: float) -> LemmaReport:
    s = np.asarray(list(slacks), dtype=np.float64)
    if s.size == 0:
        return LemmaReport(lemma_id, 0, 0, float("inf"), tol)
    return LemmaReport(lemma_id, 1, int((s < -tol).sum()), float(s.min()), tol)


def _sample_points(rng, center: np.ndarray, spread: float, count: int):
    d = center.shape[0]
    return center[None, :] + spread * rng.standard_normal((count, d))


# ------------------------------------------------------------- the checks

def check_smooth_sc_bounds(problem: ErmProblem, rng, samples: int = 20) -> LemmaReport:
    """Four standard sandwich bounds between error, gradient and distance."""
    x_star, f_star = minimize_erm(problem)
    mu = problem.mu
    reg = problem.estimate_regularity()
    big_l = problem.n * reg.smoothness * reg.radius ** 2 + problem.explicit_l2
    slacks = []
    for x in _sample_points(rng, x_star, 1.0 + float(np.linalg.norm(x_star)),
                            samples):
        err = problem.value(x) - f_star
        gsq = float(np.sum(problem.gradient(x) ** 2))
        dsq = float(np.sum((x - x_star) ** 2))
        slacks.append(_ineq(gsq / (2.0 * big_l), err))
        slacks.append(_ineq(err, 0.5 * big_l * dsq))
        slacks.append(_ineq(0.5 * mu * dsq, err))
        slacks.append(_ineq(err, gsq / (2.0 * mu)))
    return _report("smooth-sc-bounds", slacks, INEQ_TOL)


def check_add_linear(rng, dim: int = 3, samples: int = 20) -> LemmaReport:
    """Error growth when a linear term joins a strongly convex function."""
    g = rng.standard_normal((dim + 1, dim))
    q = g.T @ g + 0.1 * np.eye(dim)
    b = rng.standard_normal(dim)
    mu = float(np.linalg.eigvalsh(q).min())
    scale = float(rng.choice([0.3, 1.0, 30.0]))
    a = scale * rng.standard_normal(dim)

    def f(x):
        return 0.5 * float(x @ q @ x) - float(b @ x)

    x_star = np.linalg.solve(q, b)
    xa_star = np.linalg.solve(q, b - a)
    f_star = f(x_star)
    fa_star = f(xa_star) + float(a @ xa_star)
    slacks = []
    for x in _sample_points(rng, x_star, 2.0, samples):
        lhs = f(x) + float(a @ x) - fa_star
        rhs = 2.0 * (f(x) - f_star) + float(a @ a) / mu
        slacks.append(_ineq(lhs, rhs))
    return _report("add-linear", slacks, INEQ_TOL)


def merge_quadratics(psi1: float, v1, psi2: float, v2, mu: float,
                     alpha: float) -> tuple[float, np.ndarray]:
    """Constant and vertex of the alpha-blend of two same-curvature
    quadratics, again of that curvature."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    d = v1 - v2
    psi = (alpha * psi1 + (1.0 - alpha) * psi2
           + 0.5 * mu * alpha * (1.0 - alpha) * float(d @ d))
    return psi, alpha * v1 + (1.0 - alpha) * v2


def check_merge_quadratic(rng, dim: int = 3, samples: int = 20) -> LemmaReport:
    psi1, psi2 = rng.standard_normal(2) * 5.0
    v1 = rng.standard_normal(dim)
    v2 = rng.standard_normal(dim)
    mu = float(rng.uniform(0.1, 10.0))
    alpha = float(rng.uniform(0.0, 1.0))
    psi, v = merge_quadratics(psi1, v1, psi2, v2, mu, alpha)
    slacks = []
    for x in _sample_points(rng, v, 3.0, samples):
        lhs = (alpha * (psi1 + 0.5 * mu * float(np.sum((x - v1) ** 2)))
               + (1.0 - alpha) * (psi2 + 0.5 * mu * float(np.sum((x - v2) ** 2))))
        rhs = psi + 0.5 * mu * float(np.sum((x - v) ** 2))
        slacks.append(_ident(lhs, rhs))
    return _report("merge-quadratic", slacks, MERGE_TOL)


def check_proximal_progress(problem: ErmProblem, lam: float, rng,
                            samples: int = 5) -> LemmaReport:
    """Subproblem optimum approaches the full optimum by lam/(mu+lam)."""
    x_star, f_star = minimize_erm(problem)
    mu = problem.mu
    slacks = []
    for s in _sample_points(rng, x_star, 1.0 + float(np.linalg.norm(x_star)),
                            samples):
        rp = RegularizedProblem(problem, s, lam)
        _, sub_opt = minimize_regularized(rp)
        lhs = sub_opt - f_star
        rhs = lam / (mu + lam) * (problem.value(s) - f_star)
        slacks.append(_ineq(lhs, rhs))
    return _report("proximal-progress", slacks, INEQ_TOL)


def _perturb_to_error(rp: RegularizedProblem, x_opt: np.ndarray,
                      f_opt: float, target: float, rng) -> np.ndarray:
    """Point with subproblem error equal to target, by bisection along a ray."""
    if target <= 0.0:
        return x_opt.copy()
    u = rng.standard_normal(x_opt.shape[0])
    u /= float(np.linalg.norm(u))
    hi = 1.0
    while rp.value(x_opt + hi * u) - f_opt < target:
        hi *= 2.0
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if rp.value(x_opt + mid * u) - f_opt < target:
            lo = mid
        else:
            hi = mid
    return x_opt + 0.5 * (lo + hi) * u


def check_contraction(problem: ErmProblem, lam: float, rng,
                      c_prime: float = 0.5, samples: int = 3) -> LemmaReport:
    """Per-stage error contraction of the proximal outer loop.

    Exact subproblem solutions must contract by lam/(lam+mu); solutions
    off by the oracle error budget still contract by
    (lam + c' mu)/(lam + mu).
    """
    x_star, f_star = minimize_erm(problem)
    mu = problem.mu
    sigma = (lam + mu) / (c_prime * mu)
    slacks = []
    for s in _sample_points(rng, x_star, 1.0 + float(np.linalg.norm(x_star)),
                            samples):
        rp = RegularizedProblem(problem, s, lam)
        prox, sub_opt = minimize_regularized(rp)
        start_err = problem.value(s) - f_star
        slacks.append(_ineq(problem.value(prox) - f_star,
                            lam / (lam + mu) * start_err))
        budget = (rp.value(s) - sub_opt) / sigma
        x_plus = _perturb_to_error(rp, prox, sub_opt, budget, rng)
        slacks.append(_ineq(problem.value(x_plus) - f_star,
                            (lam + c_prime * mu) / (lam + mu) * start_err))
    return _report("appa-contraction", slacks, INEQ_TOL)


def check_outer_lower_bound(problem: ErmProblem, lam: float, rng,
                            samples: int = 20) -> LemmaReport:
    """Quadratic minorant built from one approximate proximal step."""
    x_star, f_star = minimize_erm(problem)
    mu = problem.mu
    mu_p = mu / 2.0
    zeta = 2.0 / mu + 1.0 / lam
    s = x_star + (1.0 + float(np.linalg.norm(x_star))) \
        * rng.standard_normal(problem.dim)
    rp = RegularizedProblem(problem, s, lam)
    prox, sub_opt = minimize_regularized(rp)
    eps = 0.3 * max(rp.value(s) - sub_opt, 0.0)
    x_plus = _perturb_to_error(rp, prox, sub_opt, eps, rng)
    eps = rp.value(x_plus) - sub_opt  # realized inner error
    g = lam * (s - x_plus)
    vertex = s - zeta * g
    base = (problem.value(x_plus) - float(g @ g) / (2.0 * mu_p)
            - (lam + 2.0 * mu_p) / mu_p * eps)
    slacks = []
    for x in _sample_points(rng, x_star,
                            1.0 + float(np.linalg.norm(s - x_star)), samples):
        bound = base + 0.5 * mu_p * float(np.sum((x - vertex) ** 2))
        slacks.append(_ineq(bound, problem.value(x)))
    return _report("outer-lower-bound", slacks, INEQ_TOL)


def _dual_test_vector(problem: ErmProblem, rp: RegularizedProblem, rng):
    x_probe = rng.standard_normal(problem.dim)
    y = primal_to_dual(problem, x_probe, clamp=False)
    if bool((problem.kinds == 0).all()):
        y = y + 0.1 * rng.standard_normal(problem.n)
    return y


def check_dual_bounds_primal_lemma(problem: ErmProblem, lam: float, rng,
                                   samples: int = 5) -> LemmaReport:
    """Mapped primal error vs dual error, factor 2 (n kappa_lambda)^2."""
    slacks = []
    for _ in range(samples):
        s = rng.standard_normal(problem.dim)
        rp = RegularizedProblem(problem, s, lam)
        _, sub_opt = minimize_regularized(rp)
        y = _dual_test_vector(problem, rp, rng)
        res = check_dual_bounds_primal(rp, y, sub_opt, -sub_opt)
        slacks.append(_ineq(res.lhs, res.rhs))
    return _report("dual-bounds-primal", slacks, INEQ_TOL)


def check_gap_identity(problem: ErmProblem, lam: float, rng,
                       samples: int = 5) -> LemmaReport:
    """Certified gap of the mapped dual point vs the subproblem gradient.

    The general identity is gap = ||grad f_{s,lam}(x)||^2 / (2 lam_eff);
    the special case x = s, where the proximal gradient vanishes, is
    also pinned directly against ||grad F(s)||^2 / (2 lam).
    """
    slacks = []
    for _ in range(samples):
        s = rng.standard_normal(problem.dim)
        x = rng.standard_normal(problem.dim)
        rp = RegularizedProblem(problem, s, lam)
        y = primal_to_dual(problem, x, clamp=False)
        gap = rp.value(x) + rp.dual_value(y)
        grad = rp.gradient(x)
        slacks.append(_ident(gap, float(grad @ grad) / (2.0 * rp.lam_eff)))
        if problem.explicit_l2 == 0.0:
            rp_c = RegularizedProblem(problem, x, lam)
            y_c = primal_to_dual(problem, x, clamp=False)
            gap_c = rp_c.value(x) + rp_c.dual_value(y_c)
            gf = problem.gradient(x)
            slacks.append(_ident(gap_c, float(gf @ gf) / (2.0 * lam)))
    return _report("gap-identity", slacks, IDENTITY_TOL)


def check_initial_dual_error_lemma(problem: ErmProblem, lam: float, rng,
                                   samples: int = 5) -> LemmaReport:
    """Dual error of the mapped center vs 2 n kappa_lambda primal error."""
    slacks = []
    for _ in range(samples):
        s = rng.standard_normal(problem.dim)
        rp = RegularizedProblem(problem, s, lam)
        _, sub_opt = minimize_regularized(rp)
        res = check_initial_dual_error(rp, sub_opt, -sub_opt)
        slacks.append(_ineq(res.lhs, res.rhs))
    return _report("initial-dual-error", slacks, INEQ_TOL)


def check_recenter_bound(problem: ErmProblem, lam: float, rng,
                         samples: int = 5) -> LemmaReport:
    """Dual error growth across a move of the proximal center.

    Stated for problems whose quadratic lives entirely in the proximal
    term, so instances with an explicit l2 term are skipped.
    """
    if problem.explicit_l2 != 0.0:
        return _report("recenter-dual-error", [], INEQ_TOL)
    _, f_star = minimize_erm(problem)
    slacks = []
    for _ in range(samples):
        x = rng.standard_normal(problem.dim)
        rp_old = RegularizedProblem(problem, x, lam)
        y = _dual_test_vector(problem, rp_old, rng)
        _, old_opt = minimize_regularized(rp_old)
        x_new = dual_to_primal(rp_old, y)
        rp_new = RegularizedProblem(problem, x_new, lam)
        _, new_opt = minimize_regularized(rp_new)
        res = check_recenter_error_bound(problem, lam, x, y, f_star,
                                         -old_opt, -new_opt)
        slacks.append(_ineq(res.lhs, res.rhs))
    return _report("recenter-dual-error", slacks, INEQ_TOL)


# -------------------------------------------------------------- battery

_BASE_SHAPES = [(2, 1), (3, 2), (4, 2), (4, 3), (5, 3), (6, 4), (5, 4), (6, 2)]
_NEAR_SINGULAR_INDEX = 3


def battery_problems(seed: int = BATTERY_SEED) -> list[ErmProblem]:
    """Eight squared-loss bases (one near-singular) and two logistic."""
    rng = np.random.default_rng(seed)
    problems = []
    for idx, (n, d) in enumerate(_BASE_SHAPES):
        a = rng.standard_normal((n, d))
        if idx == _NEAR_SINGULAR_INDEX:
            u, sv, vt = np.linalg.svd(a, full_matrices=False)
            sv[-1] = sv[0] * 1e-3
            a = u @ np.diag(sv) @ vt
        if idx % 2:
            w = rng.uniform(0.5, 2.0, size=n) / n
        else:
            w = np.full(n, 1.0 / n)
        labels = rng.standard_normal(n)
        mu = float(np.linalg.eigvalsh((a * w[:, None]).T @ a).min())
        problems.append(squared_loss_problem(a, labels, w, mu=mu))
    for n, d, gamma in [(4, 2, 0.05), (6, 3, 0.5)]:
        a = rng.standard_normal((n, d))
        labels = rng.choice([-1.0, 1.0], size=n)
        problems.append(logistic_loss_problem(
            a, labels, np.full(n, 1.0 / n), mu=gamma, explicit_l2=gamma))
    return problems


def battery_instances(seed: int = BATTERY_SEED):
    """The 50 (problem, lam) pairs of the standard battery."""
    pairs = []
    for p in battery_problems(seed):
        reg = p.estimate_regularity()
        mu = p.mu
        for lam in (mu / 2.0, mu, 2.0 * mu, 10.0 * mu,
                    reg.smoothness * reg.radius ** 2):
            pairs.append((p, float(lam)))
    return pairs


_PAIR_CHECKS = (
    check_proximal_progress,
    check_contraction,
    check_outer_lower_bound,
    check_dual_bounds_primal_lemma,
    check_gap_identity,
    check_initial_dual_error_lemma,
    check_recenter_bound,
)


def run_all_checks(seed: int = BATTERY_SEED) -> list[LemmaReport]:
    """Every lemma over the seeded battery; all should report ok."""
    rng = np.random.default_rng(seed ^ 0x5EED5)
    merged: dict[str, LemmaReport] = {}

    def add(rep: LemmaReport):
        prev = merged.get(rep.lemma_id)
        merged[rep.lemma_id] = rep if prev is None else prev.merged(rep)

    pairs = battery_instances(seed)
    for problem, lam in pairs:
        add(check_smooth_sc_bounds(problem, rng))
        for fn in _PAIR_CHECKS:
            add(fn(problem, lam, rng))
    for _ in range(len(pairs)):
        add(check_add_linear(rng))
        add(check_merge_quadratic(rng))
    order = ["smooth-sc-bounds", "add-linear", "merge-quadratic",
             "proximal-progress", "outer-lower-bound", "appa-contraction",
             "dual-bounds-primal", "gap-identity", "initial-dual-error",
             "recenter-dual-error"]
    return [merged[k] for k in order]


def reports_to_csv(reports) -> str:
    lines = ["lemmaId,instances,violations,worstSlack,tolerance"]
    for r in reports:
        lines.append(f"{r.lemma_id},{r.instances},{r.violations},"
                     f"{r.worst_slack:.17g},{r.tolerance:.17g}")
    return "\n".join(lines) + "\n"
