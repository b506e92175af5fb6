"""High-precision reference solutions.

Squared-loss problems admit closed-form optima through the normal
equations; anything else gets a damped Newton run to tiny gradient
norm.  These back diagnostics (excess loss columns, lemma checks) and
the exact proximal oracle used in tests; the iterative solvers under
test never call into this module.
"""

from __future__ import annotations

import numpy as np

from .duality import RegularizedProblem, primal_to_dual
from .problem import SQUARED, ErmProblem


def is_quadratic(problem: ErmProblem) -> bool:
    return bool((problem.kinds == SQUARED).all())


def _normal_equations(problem: ErmProblem, extra_ridge: float, rhs_shift: np.ndarray | None):
    a = problem.matrix
    w = problem.weights
    h = (a * w[:, None]).T @ a
    ridge = problem.explicit_l2 + extra_ridge
    if ridge > 0:
        h = h + ridge * np.eye(problem.dim)
    rhs = a.T @ (w * problem.labels)
    if rhs_shift is not None:
        rhs = rhs + rhs_shift
    return np.linalg.solve(h, rhs)


def _newton(value, gradient, hessian, x0, grad_tol=1e-12, max_iter=200):
    x = np.array(x0, dtype=np.float64)
    fx = value(x)
    for _ in range(max_iter):
        g = gradient(x)
        if float(np.linalg.norm(g)) <= grad_tol:
            break
        step = np.linalg.solve(hessian(x), g)
        t = 1.0
        while t > 1e-16:
            x_new = x - t * step
            f_new = value(x_new)
            if f_new <= fx - 0.25 * t * float(g @ step):
                x, fx = x_new, f_new
                break
            t *= 0.5
        else:
            break
    return x


def minimize_erm(problem: ErmProblem, grad_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Minimizer and optimal value of the full objective."""
    if is_quadratic(problem):
        x = _normal_equations(problem, 0.0, None)
    else:
        x = _newton(
            problem.value, problem.gradient, problem.hessian,
            np.zeros(problem.dim), grad_tol,
        )
    return x, problem.value(x)


def minimize_regularized(rp: RegularizedProblem, grad_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Minimizer and optimal value of the proximal subproblem."""
    p = rp.base
    if is_quadratic(p):
        x = _normal_equations(p, rp.lam, rp.lam * rp.center)
    else:
        def hess(x):
            return p.hessian(x) + rp.lam * np.eye(p.dim)
        x = _newton(rp.value, rp.gradient, hess, np.array(rp.center), grad_tol)
    return x, rp.value(x)


def dual_optimum(rp: RegularizedProblem) -> tuple[np.ndarray, float]:
    """Optimal dual vector (via the primal optimum) and its dual value."""
    x_star, _ = minimize_regularized(rp)
    y_star = primal_to_dual(rp.base, x_star, clamp=False)
    return y_star, rp.dual_value(y_star)
