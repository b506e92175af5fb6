"""Finite-sum empirical risk minimization problems.

The central object is an objective of the form

    F(x) = sum_i phi_i(a_i' x) + (explicit_l2 / 2) ||x||^2

where each scalar loss ``phi_i`` is smooth and convex and ``a_i`` are the
rows of a dense data matrix.  Everything downstream (regularized
subproblems, duality, inner solvers, outer reductions) consumes these
problem objects and never mutates them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, xlogy

SQUARED = 0
LOGISTIC = 1

_KIND_NAMES = {"squared": SQUARED, "logistic": LOGISTIC}


class ConjugateDomainError(ValueError):
    """Raised when a conjugate loss is evaluated outside its domain."""

    def __init__(self, index: int, value: float, message: str):
        self.index = index
        self.value = value
        super().__init__(message)


@dataclass(frozen=True)
class ScalarLoss:
    """One smooth convex scalar loss phi(z).

    Parameters
    ----------
    kind : str
        Either ``"squared"`` for ``(weight/2) (z - label)^2`` or
        ``"logistic"`` for ``weight * log(1 + exp(-z * label))``.
    label : float
        Target value.  Logistic losses require ``label in {-1, +1}`` so
        that the smoothness constant ``weight / 4`` is exact.
    weight : float
        Positive scale factor, typically ``1/n``.
    """

    kind: str
    label: float
    weight: float

    def __post_init__(self):
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ValueError(f"loss weight must be positive and finite, got {self.weight}")
        if not math.isfinite(self.label):
            raise ValueError("loss label must be finite")
        if self.kind == "logistic" and self.label not in (-1.0, 1.0):
            raise ValueError("logistic losses require labels in {-1, +1}")

    @property
    def code(self) -> int:
        return _KIND_NAMES[self.kind]

    @property
    def smoothness(self) -> float:
        """Lipschitz constant of phi'."""
        if self.code == SQUARED:
            return self.weight
        return self.weight / 4.0

    def value(self, z: float) -> float:
        if self.code == SQUARED:
            r = z - self.label
            return 0.5 * self.weight * r * r
        return self.weight * float(np.logaddexp(0.0, -z * self.label))

    def derivative(self, z: float) -> float:
        if self.code == SQUARED:
            return self.weight * (z - self.label)
        return -self.weight * self.label * float(expit(-z * self.label))

    def second_derivative(self, z: float) -> float:
        if self.code == SQUARED:
            return self.weight
        s = float(expit(-z * self.label))
        return self.weight * s * (1.0 - s)

    def conjugate(self, u: float) -> float:
        """Fenchel conjugate phi*(u) = sup_z (u z - phi(z))."""
        if self.code == SQUARED:
            return u * u / (2.0 * self.weight) + self.label * u
        p = -u * self.label / self.weight
        if p < 0.0 or p > 1.0:
            raise ConjugateDomainError(
                0, u, f"logistic conjugate argument {u} outside domain"
            )
        return self.weight * (float(xlogy(p, p)) + float(xlogy(1.0 - p, 1.0 - p)))

    def conjugate_bounds(self) -> tuple[float, float]:
        """Closed domain [lo, hi] of the conjugate."""
        if self.code == SQUARED:
            return (-math.inf, math.inf)
        if self.label > 0:
            return (-self.weight, 0.0)
        return (0.0, self.weight)

    def prox(self, gamma: float, center: float) -> float:
        """argmin_z phi(z) + (gamma/2) (z - center)^2 for gamma > 0."""
        if gamma <= 0:
            raise ValueError("prox weight must be positive")
        if self.code == SQUARED:
            return (gamma * center + self.weight * self.label) / (gamma + self.weight)
        return _logistic_prox(self.label, self.weight, gamma, center)


def _logistic_prox(label: float, weight: float, gamma: float, center: float) -> float:
    # Root of h(z) = -weight*label*sigmoid(-z*label) + gamma*(z - center),
    # strictly increasing.  The root lies between center and
    # center + weight*label/gamma, so Newton is guarded by that bracket.
    lo = min(center, center + weight * label / gamma)
    hi = max(center, center + weight * label / gamma)
    z = 0.5 * (lo + hi)
    for _ in range(200):
        s = float(expit(-z * label))
        h = -weight * label * s + gamma * (z - center)
        if h > 0:
            hi = z
        else:
            lo = z
        hp = weight * s * (1.0 - s) + gamma
        step = h / hp
        z_new = z - step
        if not (lo < z_new < hi):
            z_new = 0.5 * (lo + hi)
        if abs(z_new - z) < 1e-15 * (1.0 + abs(z)):
            return z_new
        z = z_new
    return z


# Vectorized loss calculus over parallel arrays (kinds, labels, weights).
# These back every objective evaluation, so they stay allocation-light.

def loss_values(kinds, labels, weights, z):
    out = np.empty_like(z)
    sq = kinds == SQUARED
    if sq.any():
        r = z[sq] - labels[sq]
        out[sq] = 0.5 * weights[sq] * r * r
    lg = ~sq
    if lg.any():
        out[lg] = weights[lg] * np.logaddexp(0.0, -z[lg] * labels[lg])
    return out


def loss_derivatives(kinds, labels, weights, z):
    out = np.empty_like(z)
    sq = kinds == SQUARED
    if sq.any():
        out[sq] = weights[sq] * (z[sq] - labels[sq])
    lg = ~sq
    if lg.any():
        out[lg] = -weights[lg] * labels[lg] * expit(-z[lg] * labels[lg])
    return out


def loss_second_derivatives(kinds, labels, weights, z):
    out = np.empty_like(z)
    sq = kinds == SQUARED
    if sq.any():
        out[sq] = weights[sq]
    lg = ~sq
    if lg.any():
        s = expit(-z[lg] * labels[lg])
        out[lg] = weights[lg] * s * (1.0 - s)
    return out


def loss_conjugates(kinds, labels, weights, u):
    """Vectorized phi_i*(u_i); raises naming the first offending coordinate."""
    out = np.empty_like(u)
    sq = kinds == SQUARED
    if sq.any():
        out[sq] = u[sq] * u[sq] / (2.0 * weights[sq]) + labels[sq] * u[sq]
    lg = ~sq
    if lg.any():
        p = -u[lg] * labels[lg] / weights[lg]
        bad = (p < 0.0) | (p > 1.0)
        if bad.any():
            idx = np.flatnonzero(lg)[np.argmax(bad)]
            raise ConjugateDomainError(
                int(idx), float(u[idx]),
                f"logistic conjugate argument out of domain at coordinate {int(idx)}",
            )
        out[lg] = weights[lg] * (xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))
    return out


@dataclass(frozen=True)
class RegularityInfo:
    smoothness: float  # max_i Lipschitz constant of phi_i'
    radius: float      # max_i ||a_i||_2
    kappa: int         # ceil(smoothness * radius^2 / mu)


@dataclass(frozen=True)
class ErmProblem:
    """Dense finite-sum ERM problem with user-supplied strong convexity.

    Parameters
    ----------
    matrix : np.ndarray
        Dense (n, d) data matrix, one example per row.
    losses : sequence of ScalarLoss
        One loss per row of ``matrix``.
    mu : float
        Strong convexity constant of the full objective.  The library
        trusts this value; tests construct instances where it is exact.
    explicit_l2 : float
        Coefficient of an explicit (explicit_l2/2)||x||^2 term.  Needed
        for losses (logistic) that are not strongly convex on their own.
    """

    matrix: np.ndarray
    losses: tuple
    mu: float
    explicit_l2: float = 0.0

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.matrix, dtype=np.float64))
        if a.ndim != 2:
            raise ValueError("data matrix must be 2-dimensional")
        if not np.isfinite(a).all():
            raise ValueError("data matrix contains non-finite entries")
        losses = tuple(self.losses)
        if len(losses) != a.shape[0]:
            raise ValueError(
                f"{len(losses)} losses for {a.shape[0]} rows"
            )
        if not losses:
            raise ValueError("problem needs at least one loss")
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be positive and finite")
        if self.explicit_l2 < 0:
            raise ValueError("explicit_l2 must be nonnegative")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "losses", losses)
        kinds = np.array([l.code for l in losses], dtype=np.int64)
        labels = np.array([l.label for l in losses], dtype=np.float64)
        weights = np.array([l.weight for l in losses], dtype=np.float64)
        for arr in (a, kinds, labels, weights):
            arr.flags.writeable = False
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def smoothness(self) -> float:
        return max(l.smoothness for l in self.losses)

    @property
    def radius(self) -> float:
        return float(np.sqrt((self.matrix * self.matrix).sum(axis=1).max()))

    @property
    def kappa(self) -> int:
        return self.estimate_regularity().kappa

    def estimate_regularity(self) -> RegularityInfo:
        smooth = self.smoothness
        radius = self.radius
        kappa = max(1, math.ceil(smooth * radius * radius / self.mu))
        return RegularityInfo(smooth, radius, kappa)

    def margins(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x

    def value(self, x: np.ndarray) -> float:
        z = self.matrix @ x
        total = float(loss_values(self.kinds, self.labels, self.weights, z).sum())
        if self.explicit_l2 > 0:
            total += 0.5 * self.explicit_l2 * float(x @ x)
        return total

    def gradient(self, x: np.ndarray) -> np.ndarray:
        z = self.matrix @ x
        g = self.matrix.T @ loss_derivatives(self.kinds, self.labels, self.weights, z)
        if self.explicit_l2 > 0:
            g = g + self.explicit_l2 * x
        return g

    def hessian(self, x: np.ndarray) -> np.ndarray:
        """Dense d x d Hessian; intended for small reference solves."""
        z = self.matrix @ x
        h = loss_second_derivatives(self.kinds, self.labels, self.weights, z)
        hess = (self.matrix * h[:, None]).T @ self.matrix
        if self.explicit_l2 > 0:
            hess = hess + self.explicit_l2 * np.eye(self.dim)
        return hess

    def component_smoothness(self) -> float:
        """Smoothness of the sum-convention stochastic gradient n*phi_i'(a_i'x)a_i."""
        sq_norms = (self.matrix * self.matrix).sum(axis=1)
        per_loss = np.array([l.smoothness for l in self.losses])
        return float(self.n * (per_loss * sq_norms).max())


@dataclass(frozen=True)
class GeneralErmProblem:
    """Sum of black-box smooth convex components with known strong convexity.

    ``components`` is a sequence of (value, gradient) callable pairs.
    ``component_smoothness`` bounds the smoothness of each n-scaled
    component gradient; stochastic solvers need it for their stepsize.
    """

    components: Sequence[tuple[Callable, Callable]]
    mu: float
    component_smoothness: float | None = None

    def __post_init__(self):
        if not (self.mu > 0 and math.isfinite(self.mu)):
            raise ValueError("mu must be positive and finite")
        if len(self.components) == 0:
            raise ValueError("problem needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def n(self) -> int:
        return len(self.components)

    def value(self, x: np.ndarray) -> float:
        return float(sum(v(x) for v, _ in self.components))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x, dtype=np.float64)
        for _, grad in self.components:
            g = g + grad(x)
        return g


def squared_loss_problem(matrix, labels, weights, mu, explicit_l2=0.0) -> ErmProblem:
    """Convenience constructor for uniform squared-loss problems."""
    labels = np.asarray(labels, dtype=np.float64)
    if np.isscalar(weights):
        weights = np.full(labels.shape, float(weights))
    losses = tuple(
        ScalarLoss("squared", float(b), float(w)) for b, w in zip(labels, weights)
    )
    return ErmProblem(matrix=matrix, losses=losses, mu=mu, explicit_l2=explicit_l2)


def logistic_loss_problem(matrix, labels, weights, mu, explicit_l2) -> ErmProblem:
    """Convenience constructor for uniform logistic-loss problems."""
    labels = np.asarray(labels, dtype=np.float64)
    if np.isscalar(weights):
        weights = np.full(labels.shape, float(weights))
    losses = tuple(
        ScalarLoss("logistic", float(b), float(w)) for b, w in zip(labels, weights)
    )
    return ErmProblem(matrix=matrix, losses=losses, mu=mu, explicit_l2=explicit_l2)
