"""Independent reference computations backing the test suite.

Everything here reads only raw instance data (matrix, labels, weights,
loss kinds, explicit l2 coefficient) and redoes the math from scratch
with plain numpy/scipy: normal equations for quadratic objectives,
damped Newton for logistic ones, golden-section search for 1-D
minimization, central differences for gradients.  Expected values in
tests come from these, never from the code under test.
"""

import numpy as np
from scipy.special import expit


# ------------------------------------------------------- scalar losses

def raw_loss_values(kinds, labels, weights, z):
    z = np.asarray(z, dtype=np.float64)
    sq = 0.5 * weights * (z - labels) ** 2
    lg = weights * np.logaddexp(0.0, -z * labels)
    return np.where(kinds == 0, sq, lg)


def raw_loss_derivs(kinds, labels, weights, z):
    z = np.asarray(z, dtype=np.float64)
    sq = weights * (z - labels)
    lg = -weights * labels * expit(-z * labels)
    return np.where(kinds == 0, sq, lg)


def raw_loss_curvs(kinds, labels, weights, z):
    z = np.asarray(z, dtype=np.float64)
    s = expit(-z * labels)
    return np.where(kinds == 0, weights, weights * s * (1.0 - s))


def _plogp(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def raw_conjugates(kinds, labels, weights, u):
    """Fenchel conjugates, elementwise; logistic u must be in domain."""
    u = np.asarray(u, dtype=np.float64)
    sq = u * u / (2.0 * weights) + labels * u
    p = np.where(kinds == 0, 0.5, -u * labels / weights)
    lg = weights * (_plogp(p) + _plogp(1.0 - p))
    return np.where(kinds == 0, sq, lg)


# ------------------------------------------------ objective evaluation

def raw_value(problem, x, lam=0.0, center=None):
    """F(x) plus an optional (lam/2)||x - center||^2 proximal term."""
    x = np.asarray(x, dtype=np.float64)
    z = problem.matrix @ x
    total = float(raw_loss_values(problem.kinds, problem.labels,
                                  problem.weights, z).sum())
    if problem.explicit_l2 > 0:
        total += 0.5 * problem.explicit_l2 * float(x @ x)
    if lam > 0:
        d = x - (np.zeros_like(x) if center is None else np.asarray(center))
        total += 0.5 * lam * float(d @ d)
    return total


def raw_gradient(problem, x, lam=0.0, center=None):
    x = np.asarray(x, dtype=np.float64)
    z = problem.matrix @ x
    g = problem.matrix.T @ raw_loss_derivs(problem.kinds, problem.labels,
                                           problem.weights, z)
    g = g + problem.explicit_l2 * x
    if lam > 0:
        d = x - (np.zeros_like(x) if center is None else np.asarray(center))
        g = g + lam * d
    return g


def raw_dual_value(problem, center, lam, y):
    """g_{s,lam}(y) for instances without an explicit l2 term."""
    assert problem.explicit_l2 == 0.0
    y = np.asarray(y, dtype=np.float64)
    aty = problem.matrix.T @ y
    conj = float(raw_conjugates(problem.kinds, problem.labels,
                                problem.weights, y).sum())
    s = np.asarray(center, dtype=np.float64)
    return conj + float(aty @ aty) / (2.0 * lam) - float(s @ aty)


# --------------------------------------------------------- optimizers

def is_quadratic(problem) -> bool:
    return bool((problem.kinds == 0).all())


def solve_quadratic(problem, lam=0.0, center=None):
    """Normal-equations minimizer of F + (lam/2)||x - center||^2."""
    a = problem.matrix
    w = problem.weights
    h = (a * w[:, None]).T @ a
    ridge = problem.explicit_l2 + lam
    if ridge > 0:
        h = h + ridge * np.eye(a.shape[1])
    rhs = a.T @ (w * problem.labels)
    if lam > 0 and center is not None:
        rhs = rhs + lam * np.asarray(center, dtype=np.float64)
    return np.linalg.solve(h, rhs)


def solve_newton(problem, lam=0.0, center=None, tol=1e-13, iters=200):
    """Damped Newton on raw calculus; handles any smooth instance."""
    a = problem.matrix
    d = a.shape[1]
    x = np.zeros(d)
    fx = raw_value(problem, x, lam, center)
    for _ in range(iters):
        g = raw_gradient(problem, x, lam, center)
        if float(np.linalg.norm(g)) <= tol:
            break
        z = a @ x
        curv = raw_loss_curvs(problem.kinds, problem.labels,
                              problem.weights, z)
        h = (a * curv[:, None]).T @ a
        h = h + (problem.explicit_l2 + lam) * np.eye(d)
        step = np.linalg.solve(h, g)
        t = 1.0
        while t > 1e-16:
            x_try = x - t * step
            f_try = raw_value(problem, x_try, lam, center)
            if f_try <= fx - 0.25 * t * float(g @ step):
                x, fx = x_try, f_try
                break
            t *= 0.5
        else:
            break
    return x


def best_point(problem, lam=0.0, center=None):
    """(argmin, min) of F + (lam/2)||. - center||^2, independent route."""
    if is_quadratic(problem):
        x = solve_quadratic(problem, lam, center)
    else:
        x = solve_newton(problem, lam, center)
    return x, raw_value(problem, x, lam, center)


def dual_best(problem, center, lam):
    """(y*, g*) of the subproblem dual; strong duality gives g* = -f*."""
    x_star, f_star = best_point(problem, lam, center)
    z = problem.matrix @ x_star
    y_star = raw_loss_derivs(problem.kinds, problem.labels,
                             problem.weights, z)
    return y_star, -f_star


def golden_section(fn, lo, hi, tol=1e-12, iters=300):
    """Scalar minimizer of a unimodal function on [lo, hi]."""
    inv = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if abs(b - a) < tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    return 0.5 * (a + b)


def fd_gradient(fn, x):
    """Central finite differences with per-coordinate step 1e-6(1+|x_i|)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        up = x.copy()
        dn = x.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (fn(up) - fn(dn)) / (2.0 * h)
    return g


def exact_mu(problem) -> float:
    """Smallest eigenvalue of the quadratic part, dense eigensolver."""
    a = problem.matrix
    h = (a * problem.weights[:, None]).T @ a
    if is_quadratic(problem):
        return float(np.linalg.eigvalsh(h).min()) + problem.explicit_l2
    return problem.explicit_l2
