"""Compiled inner loops.

Everything here is numba-jitted and operates on plain float64/int64
arrays passed in from the Python layer.  Index sequences are sampled
outside the kernels so randomness stays under a single seeded
Generator per run.

Loss kind codes match problem.py: 0 = squared, 1 = logistic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_EDGE = 1e-15


@njit(cache=True, inline="always")
def _sigmoid(t):
    if t >= 0.0:
        return 1.0 / (1.0 + np.exp(-t))
    e = np.exp(t)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _weighted_deriv(kind, label, weight, z):
    # w * phi'(z)
    if kind == 0:
        return weight * (z - label)
    return -weight * label * _sigmoid(-z * label)


@njit(cache=True, inline="always")
def _conj_deriv_logistic(label, weight, u):
    p = -u * label / weight
    return label * np.log((1.0 - p) / p)


@njit(cache=True, inline="always")
def _conj_curv_logistic(label, weight, u):
    p = -u * label / weight
    return 1.0 / (weight * p * (1.0 - p))


@njit(cache=True)
def _solve_conjugate_newton(label, weight, q, ell):
    """Root of  conj'(u) + q*u + ell = 0  for a logistic coordinate.

    The map is strictly increasing on the conjugate domain whenever
    q > -4/weight, which every caller satisfies, so a bracketed Newton
    cannot escape.  Roots pushed outside the open domain are clamped
    to its edge; the resulting dual suboptimality is O(weight * 1e-15).
    """
    if label > 0.0:
        lo = -weight * (1.0 - _EDGE)
        hi = -weight * _EDGE
    else:
        lo = weight * _EDGE
        hi = weight * (1.0 - _EDGE)
    if _conj_deriv_logistic(label, weight, lo) + q * lo + ell >= 0.0:
        return lo
    if _conj_deriv_logistic(label, weight, hi) + q * hi + ell <= 0.0:
        return hi
    u = 0.5 * (lo + hi)
    for _ in range(100):
        h = _conj_deriv_logistic(label, weight, u) + q * u + ell
        if h > 0.0:
            hi = u
        else:
            lo = u
        width = hi - lo
        if width <= 1e-14 * weight:
            break
        step = h / (_conj_curv_logistic(label, weight, u) + q)
        u_new = u - step
        if u_new <= lo or u_new >= hi:
            u_new = 0.5 * (lo + hi)
        if u_new == u:
            break
        u = u_new
    return u


@njit(cache=True)
def sdca_pass(a, kinds, labels, weights, y, aty, center_eff, lam_eff, row_sq, order):
    """One pass of exact dual coordinate ascent, in place on (y, aty)."""
    n, d = a.shape
    for t in range(order.shape[0]):
        i = order[t]
        dot_aty = 0.0
        dot_c = 0.0
        for j in range(d):
            dot_aty += a[i, j] * aty[j]
            dot_c += a[i, j] * center_eff[j]
        q = row_sq[i] / lam_eff
        w = weights[i]
        if kinds[i] == 0:
            num = dot_c - labels[i] - dot_aty / lam_eff - y[i] / w
            delta = num / (1.0 / w + q)
        else:
            ell = dot_aty / lam_eff - y[i] * q - dot_c
            u = _solve_conjugate_newton(labels[i], w, q, ell)
            delta = u - y[i]
        if delta != 0.0:
            y[i] += delta
            for j in range(d):
                aty[j] += delta * a[i, j]


@njit(cache=True)
def svrg_inner(a, kinds, labels, weights, x, anchor_x, anchor_wderiv,
               anchor_grad, ridge, eta, idx):
    """Variance-reduced stochastic steps on a ridge-augmented objective.

    anchor_grad must be the full gradient at anchor_x including the
    ridge term; the per-step correction ridge*(x - anchor_x) keeps the
    estimator exact for the quadratic part.  Runs in place on x.
    """
    n, d = a.shape
    for t in range(idx.shape[0]):
        i = idx[t]
        z = 0.0
        for j in range(d):
            z += a[i, j] * x[j]
        if not np.isfinite(z):
            break
        coef = n * (_weighted_deriv(kinds[i], labels[i], weights[i], z)
                    - anchor_wderiv[i])
        for j in range(d):
            g = coef * a[i, j] + anchor_grad[j] + ridge * (x[j] - anchor_x[j])
            x[j] -= eta * g
        if np.abs(x[0]) > 1e140:
            break


@njit(cache=True)
def sgd_pass(a, kinds, labels, weights, x, l2, step0, step_power, t0, idx):
    """Plain stochastic gradient steps, stepsize step0 * (t0+t)^(-step_power).

    Only the explicit l2 term enters deterministically; with
    step_power = 0 the stepsize is constant.  Runs in place on x.
    Bails out once iterates leave the float-safe range so overflow
    shows up as a large-but-finite objective.
    """
    n, d = a.shape
    for t in range(idx.shape[0]):
        i = idx[t]
        z = 0.0
        for j in range(d):
            z += a[i, j] * x[j]
        if not np.isfinite(z):
            break
        coef = n * _weighted_deriv(kinds[i], labels[i], weights[i], z)
        eta = step0
        if step_power > 0.0:
            eta = step0 / (t0 + t + 1.0) ** step_power
        for j in range(d):
            x[j] -= eta * (coef * a[i, j] + l2 * x[j])
        if np.abs(x[0]) > 1e140:
            break


@njit(cache=True)
def apcg_pass(a, kinds, labels, weights, sigma, nal, u_hat, v, p, q_cache,
              t_u, r, c_u, c_v, lam_eff, row_dot_center, order):
    """One pass of accelerated dual coordinate steps.

    State is the split y_pair = v + t_u * u_hat (momentum difference in
    u_hat, scaled by t_u; midpoint in v) with cached back-projections
    p = A^T u_hat and q_cache = A^T v.  Per step: the interpolation
    point is v + r*t_u*u_hat, one coordinate of a proximal step moves
    both halves, and t_u absorbs the geometric momentum decay.  Returns
    the updated t_u; everything else is modified in place.
    """
    n, d = a.shape
    for t in range(order.shape[0]):
        i = order[t]
        ap = 0.0
        aq = 0.0
        for j in range(d):
            ap += a[i, j] * p[j]
            aq += a[i, j] * q_cache[j]
        ru = r * t_u
        grad = (aq + ru * ap) / lam_eff - row_dot_center[i] \
            + sigma[i] * (v[i] + ru * u_hat[i])
        ztil = v[i] - ru * u_hat[i]
        nal_i = nal[i]
        if kinds[i] == 0:
            delta = -(grad + labels[i]) / nal_i
        else:
            qq = nal_i - sigma[i]
            ell = grad - nal_i * ztil
            u_root = _solve_conjugate_newton(labels[i], weights[i], qq, ell)
            delta = u_root - ztil
        t_u *= r
        if delta != 0.0:
            su = c_u * delta / t_u
            sv = c_v * delta
            u_hat[i] += su
            v[i] += sv
            for j in range(d):
                p[j] += su * a[i, j]
                q_cache[j] += sv * a[i, j]
        if t_u < 1e-130:
            for j in range(n):
                u_hat[j] *= t_u
            for j in range(d):
                p[j] *= t_u
            t_u = 1.0
    return t_u
