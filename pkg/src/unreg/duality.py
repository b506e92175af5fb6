"""Proximal subproblems of an ERM objective and their Fenchel duals.

For a problem F and center s, the regularized primal subproblem is

    f_{s,lam}(x) = F(x) + (lam/2) ||x - s||^2.

When F carries an explicit l2 term, that term is folded into the
quadratic, giving an equivalent "pure" subproblem

    sum_i phi_i(a_i' x) + (lam_eff/2) ||x - s_eff||^2 + offset

with lam_eff = lam + explicit_l2 and s_eff = lam*s/lam_eff.  The dual
of the pure subproblem over y in R^n is

    g(y) = sum_i phi_i*(y_i) + ||A'y||^2 / (2 lam_eff) - s_eff' A' y

and we subtract the constant offset from g so that
f_{s,lam}(x) + g(y) >= 0 always, with equality at the optimal pair.
The mappings between the spaces are

    x(y) = s_eff - A'y / lam_eff          (dual to primal)
    y(x)_i = phi_i'(a_i' x)               (primal to dual).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .problem import (
    LOGISTIC,
    ErmProblem,
    GeneralErmProblem,
    loss_conjugates,
    loss_derivatives,
)


@dataclass(frozen=True)
class RegularizedProblem:
    base: ErmProblem
    center: np.ndarray
    lam: float

    def __post_init__(self):
        s = np.asarray(self.center, dtype=np.float64)
        if s.shape != (self.base.dim,):
            raise ValueError(f"center has shape {s.shape}, expected ({self.base.dim},)")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "center", s)

    @property
    def lam_eff(self) -> float:
        return self.lam + self.base.explicit_l2

    @property
    def center_eff(self) -> np.ndarray:
        if self.base.explicit_l2 == 0:
            return self.center
        return (self.lam / self.lam_eff) * self.center

    @property
    def offset(self) -> float:
        if self.base.explicit_l2 == 0:
            return 0.0
        g = self.base.explicit_l2
        return 0.5 * self.lam * g / (self.lam + g) * float(self.center @ self.center)

    @property
    def kappa_lambda(self) -> int:
        smooth = self.base.smoothness
        r = self.base.radius
        return max(1, math.ceil(smooth * r * r / self.lam_eff))

    @property
    def strong_convexity(self) -> float:
        return self.base.mu + self.lam

    @property
    def smoothness_bound(self) -> float:
        """Upper bound n L R^2 + lam_eff on the smoothness of the subproblem."""
        b = self.base
        return b.n * b.smoothness * b.radius ** 2 + self.lam_eff

    def value(self, x: np.ndarray) -> float:
        diff = x - self.center
        return self.base.value(x) + 0.5 * self.lam * float(diff @ diff)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.base.gradient(x) + self.lam * (x - self.center)

    def dual_value(self, y: np.ndarray, aty: np.ndarray | None = None) -> float:
        b = self.base
        if aty is None:
            aty = b.matrix.T @ y
        conj = float(loss_conjugates(b.kinds, b.labels, b.weights, y).sum())
        quad = float(aty @ aty) / (2.0 * self.lam_eff)
        lin = float(self.center_eff @ aty)
        return conj + quad - lin - self.offset

    def minimizer_from_dual(self, aty: np.ndarray) -> np.ndarray:
        return self.center_eff - aty / self.lam_eff


@dataclass(frozen=True)
class GeneralRegularizedProblem:
    """Proximal subproblem of a black-box finite sum; no dual machinery."""

    base: GeneralErmProblem
    center: np.ndarray
    lam: float

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")
        s = np.array(self.center, dtype=np.float64)
        s.flags.writeable = False
        object.__setattr__(self, "center", s)

    @property
    def strong_convexity(self) -> float:
        return self.base.mu + self.lam

    def value(self, x: np.ndarray) -> float:
        d = x - self.center
        return self.base.value(x) + 0.5 * self.lam * float(d @ d)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.base.gradient(x) + self.lam * (x - self.center)


def make_subproblem(problem, center: np.ndarray, lam: float):
    """Proximal subproblem for either problem flavor."""
    if isinstance(problem, ErmProblem):
        return RegularizedProblem(problem, center, lam)
    return GeneralRegularizedProblem(problem, center, lam)


@dataclass
class DualState:
    """Dual vector with a cached A'y, refreshed every n incremental updates.

    The cache makes single-coordinate updates O(d); the periodic full
    recomputation keeps float drift from accumulating across passes.
    """

    y: np.ndarray
    aty: np.ndarray
    updates_since_refresh: int = 0

    @classmethod
    def create(cls, matrix: np.ndarray, y: np.ndarray) -> "DualState":
        y = np.array(y, dtype=np.float64)
        return cls(y=y, aty=matrix.T @ y)

    def update_coordinate(self, matrix: np.ndarray, i: int, delta: float):
        self.y[i] += delta
        self.aty += delta * matrix[i]
        self.updates_since_refresh += 1
        if self.updates_since_refresh >= matrix.shape[0]:
            self.refresh(matrix)

    def refresh(self, matrix: np.ndarray):
        self.aty = matrix.T @ self.y
        self.updates_since_refresh = 0

    def copy(self) -> "DualState":
        return DualState(self.y.copy(), self.aty.copy(), self.updates_since_refresh)


def primal_to_dual(problem: ErmProblem, x: np.ndarray, clamp: bool = True,
                   margins: np.ndarray | None = None) -> np.ndarray:
    """Map a primal point to the dual vector y_i = phi_i'(a_i' x).

    Saturated logistic margins can land exactly on the boundary of the
    conjugate domain; with ``clamp`` they are pulled a relative 1e-12
    into the interior so that conjugate evaluations stay finite.
    Precomputed ``margins`` (= matrix @ x) skip the matvec.
    """
    b = problem
    z = b.matrix @ x if margins is None else margins
    y = loss_derivatives(b.kinds, b.labels, b.weights, z)
    if clamp:
        lg = b.kinds == LOGISTIC
        if lg.any():
            w = b.weights[lg]
            lab = b.labels[lg]
            p = -y[lg] * lab / w
            eps = 1e-12
            clipped = np.clip(p, eps, 1.0 - eps)
            if (clipped != p).any():
                warnings.warn(
                    "clamped saturated logistic dual coordinates into the "
                    "conjugate domain interior",
                    RuntimeWarning,
                )
            y[lg] = -clipped * w * lab
    return y


def dual_to_primal(rp: RegularizedProblem, state: DualState | np.ndarray) -> np.ndarray:
    if isinstance(state, DualState):
        aty = state.aty
    else:
        aty = rp.base.matrix.T @ np.asarray(state)
    return rp.minimizer_from_dual(aty)


def duality_gap(rp: RegularizedProblem, x: np.ndarray, state: DualState | np.ndarray) -> float:
    """Certified optimality gap f_{s,lam}(x) + g(y), nonnegative for feasible y."""
    if isinstance(state, DualState):
        return rp.value(x) + rp.dual_value(state.y, state.aty)
    y = np.asarray(state)
    return rp.value(x) + rp.dual_value(y)


@dataclass(frozen=True)
class CheckResult:
    """One verified inequality: lhs <= rhs up to relative float slack."""

    lhs: float
    rhs: float

    @property
    def tolerance(self) -> float:
        return 1e-9 * (1.0 + abs(self.lhs) + abs(self.rhs))

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs + self.tolerance


def check_dual_bounds_primal(
    rp: RegularizedProblem,
    y: np.ndarray,
    reg_opt_value: float,
    dual_opt_value: float,
) -> CheckResult:
    """Primal error of the mapped point vs 2 (n kappa_lambda)^2 times dual error."""
    x_hat = dual_to_primal(rp, y)
    lhs = rp.value(x_hat) - reg_opt_value
    factor = 2.0 * (rp.base.n * rp.kappa_lambda) ** 2
    rhs = factor * (rp.dual_value(y) - dual_opt_value)
    return CheckResult(lhs, rhs)


def check_initial_dual_error(
    rp: RegularizedProblem,
    reg_opt_value: float,
    dual_opt_value: float,
) -> CheckResult:
    """Dual error of the mapped center vs 2 n kappa_lambda times primal error.

    The factor carries the extra n that the smoothness argument
    actually produces: the mapped-center gap equals
    ||grad F(s)||^2 / (2 lam) and smoothness of the subproblem is only
    bounded by n L R^2 + lam_eff, giving (n L R^2 + lam_eff)/lam_eff
    <= 2 n kappa_lambda.
    """
    s = rp.center
    y0 = primal_to_dual(rp.base, s, clamp=False)
    lhs = rp.dual_value(y0) - dual_opt_value
    rhs = 2.0 * rp.base.n * rp.kappa_lambda * (rp.value(s) - reg_opt_value)
    return CheckResult(lhs, rhs)


def check_recenter_error_bound(
    base: ErmProblem,
    lam: float,
    x: np.ndarray,
    y: np.ndarray,
    erm_opt_value: float,
    dual_opt_old: float,
    dual_opt_new: float,
) -> CheckResult:
    """Dual error growth when the center moves to the mapped primal point.

    With x' the primal image of y under the center-x subproblem, the
    dual error at center x' is at most twice the error at center x
    plus 4 n kappa times the primal suboptimality of both centers.
    """
    rp_old = RegularizedProblem(base, x, lam)
    x_new = dual_to_primal(rp_old, np.asarray(y))
    rp_new = RegularizedProblem(base, x_new, lam)
    lhs = rp_new.dual_value(y) - dual_opt_new
    kappa = base.estimate_regularity().kappa
    rhs = 2.0 * (rp_old.dual_value(y) - dual_opt_old) + 4.0 * base.n * kappa * (
        (base.value(x_new) - erm_opt_value) + (base.value(x) - erm_opt_value)
    )
    return CheckResult(lhs, rhs)
