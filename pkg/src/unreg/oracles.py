"""Pluggable inner solvers for proximal subproblems.

Primal oracles implement ``solve(rp, start, factor)``: return a point
whose expected subproblem error is at most ``1/factor`` times the error
at ``start``.  Dual oracles implement ``advance(rp, state, factor)``
with the same promise for the dual objective, warm-started from the
given dual state.

Two modes.  ``theory`` runs the worst-case iteration budget implied by
the solver's convergence rate and returns without certificates (the
promise then holds in expectation over the sampled indices).
``practical`` measures duality gaps and stops once the initial
certified gap has shrunk by the requested factor.

Pass accounting: one pass equals n scalar component evaluations (loss
values, derivatives, or conjugates), so a full gradient costs one pass,
a stochastic or coordinate step 1/n, and a duality-gap certificate two
passes.  Matrix-vector bookkeeping that touches no loss component
(cache refreshes, dual-to-primal mapping) is free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ._kernels import apcg_pass, sdca_pass, sgd_pass, svrg_inner
from .duality import DualState, RegularizedProblem, primal_to_dual
from .problem import SQUARED, ErmProblem, loss_derivatives, loss_values
from .reference import minimize_regularized


@dataclass(frozen=True)
class OracleSpec:
    """Promise attached to a proximal oracle call.

    Invoked on a subproblem with proximal weight ``lam`` from a start
    point x0, the oracle returns x with
    E[f(x)] - min f <= (f(x0) - min f) / factor.
    """

    factor: float
    lam: float


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "practical"
    max_passes: float = float("inf")
    gap_check_every: int = 1
    step: float | None = None         # stepsize override where meaningful
    inner_steps: int | None = None    # epoch length override (svrg) / pass length

    def __post_init__(self):
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.gap_check_every < 1:
            raise ValueError("gap_check_every must be >= 1")


@dataclass
class OracleResult:
    point: np.ndarray
    passes: float
    converged: bool
    certified_gap: float | None = None
    steps: int = 0
    exact: bool = False
    extra: dict = field(default_factory=dict)


class ProximalOracle(Protocol):
    def solve(self, rp: RegularizedProblem, start: np.ndarray,
              factor: float) -> OracleResult: ...


def certified_gap(rp: RegularizedProblem, x: np.ndarray) -> tuple[float, float]:
    """Duality gap at (x, y(x)) and the primal value; two passes."""
    base = rp.base
    z = base.margins(x)
    fval = float(loss_values(base.kinds, base.labels, base.weights, z).sum())
    if base.explicit_l2 > 0.0:
        fval += 0.5 * base.explicit_l2 * float(x @ x)
    diff = x - rp.center
    fval += 0.5 * rp.lam * float(diff @ diff)
    y = primal_to_dual(base, x, margins=z)
    aty = base.matrix.T @ y
    return fval + rp.dual_value(y, aty), fval


# ------------------------------------------------------------------ rates

def component_gradient_smoothness(rp: RegularizedProblem) -> float:
    """Smoothness of the per-example stochastic gradient of the subproblem."""
    return rp.base.component_smoothness() + rp.lam_eff


def loss_smoothness_vector(problem: ErmProblem) -> np.ndarray:
    return np.where(problem.kinds == SQUARED, problem.weights, problem.weights / 4.0)


def coordinate_convexity(rp: RegularizedProblem) -> float:
    """Strong convexity of the dual in the coordinate-smoothness norm.

    Equals min_i lam_eff / (lam_eff + L_i ||a_i||^2) in (0, 1]; the
    accelerated coordinate momentum is its square root divided by n.
    """
    smooth = loss_smoothness_vector(rp.base)
    row_sq = (rp.base.matrix * rp.base.matrix).sum(axis=1)
    return float((rp.lam_eff / (rp.lam_eff + smooth * row_sq)).min())


def apcg_momentum(rp: RegularizedProblem) -> float:
    return math.sqrt(coordinate_convexity(rp)) / rp.base.n


def svrg_theory_plan(rp: RegularizedProblem) -> tuple[float, int, float]:
    """(stepsize, epoch length, per-epoch error factor) for the worst case."""
    big_l = component_gradient_smoothness(rp)
    eta = 1.0 / (10.0 * big_l)
    m = max(1, math.ceil(100.0 * big_l / rp.strong_convexity))
    return eta, m, 0.375


def svrg_theory_epochs(factor: float) -> int:
    if factor <= 1.0:
        return 0
    return max(1, math.ceil(math.log(factor) / math.log(8.0 / 3.0)))


def sdca_theory_steps(rp: RegularizedProblem, factor: float) -> int:
    if factor <= 1.0:
        return 0
    rate = -math.log1p(-coordinate_convexity(rp) / rp.base.n)
    return max(1, math.ceil(math.log(factor) / rate))


def apcg_theory_steps(rp: RegularizedProblem, factor: float) -> int:
    # error after k steps is at most 2 (1 - alpha)^k times the initial one
    if factor <= 0.5:
        return 0
    rate = -math.log1p(-apcg_momentum(rp))
    return max(1, math.ceil(math.log(2.0 * factor) / rate))


def gd_theory_steps(rp: RegularizedProblem, factor: float) -> int:
    if factor <= 1.0:
        return 0
    kappa = max(1.0, rp.smoothness_bound / rp.strong_convexity)
    return max(1, math.ceil(kappa * math.log(factor)))


def agd_theory_steps(rp: RegularizedProblem, factor: float) -> int:
    if factor <= 0.5:
        return 0
    kappa = max(1.0, rp.smoothness_bound / rp.strong_convexity)
    return max(1, math.ceil(math.sqrt(kappa) * math.log(2.0 * factor)))


def primal_via_dual_factor(rp: RegularizedProblem, factor: float) -> float:
    """Dual reduction factor sufficient for a primal factor via mapping.

    Chains the warm-start bound on the initial dual error with the
    bound on the mapped primal error; at most 4 n^3 kappa_lambda^3
    times the primal factor.
    """
    nk = rp.base.n * rp.kappa_lambda
    return factor * 4.0 * (rp.smoothness_bound / rp.lam_eff) * nk * nk


# --------------------------------------------------------------- oracles

def _rng_or_default(rng) -> np.random.Generator:
    return rng if rng is not None else np.random.default_rng()


class ExactProxOracle:
    """Solves the subproblem to numerical optimality; for diagnostics."""

    name = "exact"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig(mode="theory")

    def solve(self, rp, start, factor):
        x, _ = minimize_regularized(rp)
        return OracleResult(x, passes=0.0, converged=True,
                            certified_gap=0.0, exact=True)


class SvrgPrimalOracle:
    """Variance-reduced stochastic gradient on the subproblem."""

    name = "svrg"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()
        self.rng = _rng_or_default(rng)

    def _epoch(self, rp, x, steps):
        base = rp.base
        z = base.margins(x)
        wderiv = _weighted_derivs(base, z)
        grad = base.matrix.T @ wderiv + rp.lam * (x - rp.center)
        if base.explicit_l2 > 0.0:
            grad = grad + base.explicit_l2 * x
        anchor = x.copy()
        idx = self.rng.integers(0, base.n, size=steps)
        eta = self._eta
        svrg_inner(base.matrix, base.kinds, base.labels, base.weights, x,
                   anchor, wderiv, grad, rp.lam_eff, eta, idx)
        return 1.0 + steps / base.n

    def solve(self, rp, start, factor):
        cfg = self.config
        x = np.array(start, dtype=np.float64)
        if factor <= 1.0:
            return OracleResult(x, 0.0, True)
        big_l = component_gradient_smoothness(rp)
        self._eta = cfg.step if cfg.step is not None else 1.0 / (10.0 * big_l)
        passes = 0.0
        n = rp.base.n
        if cfg.mode == "theory":
            eta, m, _ = svrg_theory_plan(rp)
            if cfg.step is not None:
                eta = cfg.step
            if cfg.inner_steps is not None:
                m = cfg.inner_steps
            self._eta = eta
            for _ in range(svrg_theory_epochs(factor)):
                if passes >= cfg.max_passes:
                    return OracleResult(x, passes, False)
                # random inner stopping index makes the per-epoch factor valid
                steps = int(self.rng.integers(0, m)) + 1
                passes += self._epoch(rp, x, steps)
            return OracleResult(x, passes, True)
        m = cfg.inner_steps if cfg.inner_steps is not None else n
        gap0, f0 = certified_gap(rp, x)
        passes += 2.0
        if gap0 <= 0.0:
            return OracleResult(x, passes, True, certified_gap=gap0)
        target = gap0 / factor
        gap = gap0
        epoch = 0
        while passes < cfg.max_passes:
            passes += self._epoch(rp, x, m)
            epoch += 1
            if epoch % cfg.gap_check_every:
                continue
            gap, fval = certified_gap(rp, x)
            passes += 2.0
            if not np.isfinite(fval):
                return OracleResult(x, passes, False, certified_gap=float("inf"))
            if gap <= target:
                return OracleResult(x, passes, True, certified_gap=gap)
        return OracleResult(x, passes, False, certified_gap=gap)


def _weighted_derivs(problem: ErmProblem, z: np.ndarray) -> np.ndarray:
    return loss_derivatives(problem.kinds, problem.labels, problem.weights, z)


class GeneralSvrgOracle:
    """Variance-reduced steps on a black-box finite sum.

    Pure Python, meant for small diagnostic instances.  Practical mode
    certifies progress through the gradient-norm bound
    ||grad f(x)||^2 / (2 (mu + lam)) since no dual is available.
    """

    name = "svrg-general"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()
        self.rng = _rng_or_default(rng)

    def _epoch(self, grp, x, steps):
        base = grp.base
        n = base.n
        anchor = x.copy()
        anchor_grads = [np.asarray(g(anchor), dtype=np.float64)
                        for _, g in base.components]
        full = sum(anchor_grads) + grp.lam * (anchor - grp.center)
        for i in self.rng.integers(0, n, size=steps):
            v = (n * (np.asarray(base.components[i][1](x)) - anchor_grads[i])
                 + full + grp.lam * (x - anchor))
            x -= self._eta * v
        return 1.0 + steps / n

    def _certificate(self, grp, x) -> float:
        g = grp.gradient(x)
        return float(g @ g) / (2.0 * grp.strong_convexity)

    def solve(self, grp, start, factor):
        cfg = self.config
        x = np.array(start, dtype=np.float64)
        if factor <= 1.0:
            return OracleResult(x, 0.0, True)
        if grp.base.component_smoothness is None and cfg.step is None:
            raise ValueError(
                "black-box svrg needs component_smoothness or an explicit step")
        big_l = ((grp.base.component_smoothness or 0.0) + grp.lam)
        self._eta = cfg.step if cfg.step is not None else 1.0 / (10.0 * big_l)
        mu_f = grp.strong_convexity
        n = grp.base.n
        passes = 0.0
        if cfg.mode == "theory":
            m = cfg.inner_steps or max(1, math.ceil(100.0 * big_l / mu_f))
            for _ in range(svrg_theory_epochs(factor)):
                if passes >= cfg.max_passes:
                    return OracleResult(x, passes, False)
                steps = int(self.rng.integers(0, m)) + 1
                passes += self._epoch(grp, x, steps)
            return OracleResult(x, passes, True)
        m = cfg.inner_steps if cfg.inner_steps is not None else n
        cert0 = self._certificate(grp, x)
        passes += 1.0
        if cert0 <= 0.0:
            return OracleResult(x, passes, True, certified_gap=cert0)
        target = cert0 / factor
        cert = cert0
        epoch = 0
        while passes < cfg.max_passes:
            passes += self._epoch(grp, x, m)
            epoch += 1
            if epoch % cfg.gap_check_every:
                continue
            cert = self._certificate(grp, x)
            passes += 1.0
            if cert <= target:
                return OracleResult(x, passes, True, certified_gap=cert)
        return OracleResult(x, passes, False, certified_gap=cert)


class _FullGradientOracle:
    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()

    def _steps_for(self, rp, factor) -> int:
        raise NotImplementedError

    def _run(self, rp, x0, steps, gap_target=None, max_passes=float("inf"),
             check_every=1):
        raise NotImplementedError

    def solve(self, rp, start, factor):
        cfg = self.config
        x = np.array(start, dtype=np.float64)
        if factor <= 1.0:
            return OracleResult(x, 0.0, True)
        if cfg.mode == "theory":
            steps = self._steps_for(rp, factor)
            x, passes, gap, ok = self._run(rp, x, steps,
                                           max_passes=cfg.max_passes)
            return OracleResult(x, passes, ok and passes <= cfg.max_passes,
                                certified_gap=gap, steps=steps)
        gap0, _ = certified_gap(rp, x)
        if gap0 <= 0.0:
            return OracleResult(x, 2.0, True, certified_gap=gap0)
        x, passes, gap, ok = self._run(
            rp, x, None, gap_target=gap0 / factor,
            max_passes=cfg.max_passes, check_every=cfg.gap_check_every)
        return OracleResult(x, passes + 2.0, ok, certified_gap=gap)


class GdPrimalOracle(_FullGradientOracle):
    """Plain gradient descent with stepsize 1/L on the subproblem."""

    name = "gd"

    def _steps_for(self, rp, factor):
        return gd_theory_steps(rp, factor)

    def _run(self, rp, x, steps, gap_target=None, max_passes=float("inf"),
             check_every=1):
        eta = 1.0 / rp.smoothness_bound
        passes = 0.0
        gap = None
        k = 0
        while True:
            if steps is not None and k >= steps:
                return x, passes, gap, True
            if passes >= max_passes:
                return x, passes, gap, False
            x = x - eta * rp.gradient(x)
            passes += 1.0
            k += 1
            if gap_target is not None and k % check_every == 0:
                gap, _ = certified_gap(rp, x)
                passes += 2.0
                if gap <= gap_target:
                    return x, passes, gap, True


class AgdPrimalOracle(_FullGradientOracle):
    """Nesterov's accelerated gradient for strongly convex objectives."""

    name = "agd"

    def _steps_for(self, rp, factor):
        return agd_theory_steps(rp, factor)

    def _run(self, rp, x, steps, gap_target=None, max_passes=float("inf"),
             check_every=1):
        kappa = max(1.0, rp.smoothness_bound / rp.strong_convexity)
        eta = 1.0 / rp.smoothness_bound
        beta = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
        y = x.copy()
        passes = 0.0
        gap = None
        k = 0
        while True:
            if steps is not None and k >= steps:
                return x, passes, gap, True
            if passes >= max_passes:
                return x, passes, gap, False
            x_new = y - eta * rp.gradient(y)
            passes += 1.0
            y = x_new + beta * (x_new - x)
            x = x_new
            k += 1
            if gap_target is not None and k % check_every == 0:
                gap, _ = certified_gap(rp, x)
                passes += 2.0
                if gap <= gap_target:
                    return x, passes, gap, True


# ------------------------------------------------------- coordinate duals

class _ApcgRun:
    """Accelerated coordinate state in the scaled split representation."""

    def __init__(self, rp: RegularizedProblem, y0: np.ndarray, rng):
        base = rp.base
        self.rp = rp
        self.rng = rng
        smooth = loss_smoothness_vector(base)
        row_sq = (base.matrix * base.matrix).sum(axis=1)
        self.sigma = np.ascontiguousarray(1.0 / smooth)
        sc = float((rp.lam_eff / (rp.lam_eff + smooth * row_sq)).min())
        self.alpha = math.sqrt(sc) / base.n
        n_alpha = base.n * self.alpha
        ltilde = row_sq / rp.lam_eff + self.sigma
        self.nal = np.ascontiguousarray(n_alpha * ltilde)
        self.r = (1.0 - self.alpha) / (1.0 + self.alpha)
        self.c_u = 0.5 * (n_alpha - 1.0)
        self.c_v = 0.5 * (n_alpha + 1.0)
        self.row_dot_center = np.ascontiguousarray(base.matrix @ rp.center_eff)
        self.u_hat = np.zeros(base.n)
        self.v = np.array(y0, dtype=np.float64)
        self.p = np.zeros(base.dim)
        self.q = base.matrix.T @ self.v
        self.t_u = 1.0
        self._since_refresh = 0

    def run_steps(self, steps: int):
        base = self.rp.base
        done = 0
        while done < steps:
            chunk = min(steps - done, 16 * base.n)
            order = self.rng.integers(0, base.n, size=chunk)
            self.t_u = apcg_pass(
                base.matrix, base.kinds, base.labels, base.weights,
                self.sigma, self.nal, self.u_hat, self.v, self.p, self.q,
                self.t_u, self.r, self.c_u, self.c_v, self.rp.lam_eff,
                self.row_dot_center, order)
            done += chunk
            self._since_refresh += chunk
            if self._since_refresh >= 10 * base.n:
                self.p = base.matrix.T @ self.u_hat
                self.q = base.matrix.T @ self.v
                self._since_refresh = 0

    def current(self) -> tuple[np.ndarray, np.ndarray]:
        y = self.v + self.t_u * self.u_hat
        aty = self.q + self.t_u * self.p
        return y, aty


def _dual_gap(rp: RegularizedProblem, y, aty) -> tuple[float, float, float]:
    """(gap, primal value at mapped point, dual value); two passes."""
    x = rp.minimizer_from_dual(aty)
    fval = rp.value(x)
    gval = rp.dual_value(y, aty)
    return fval + gval, fval, gval


class ApcgDualOracle:
    """Accelerated randomized coordinate ascent on the dual."""

    name = "apcg"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()
        self.rng = _rng_or_default(rng)

    def advance(self, rp, state: DualState, factor):
        cfg = self.config
        n = rp.base.n
        run = _ApcgRun(rp, state.y, self.rng)
        passes = 0.0
        if cfg.mode == "theory":
            steps = apcg_theory_steps(rp, factor)
            if steps / n > cfg.max_passes:
                steps = int(cfg.max_passes * n)
                converged = False
            else:
                converged = True
            run.run_steps(steps)
            passes += steps / n
            y, aty = run.current()
            return DualState(y, aty, 0), OracleResult(
                rp.minimizer_from_dual(aty), passes, converged, steps=steps)
        gap0, _, _ = _dual_gap(rp, state.y, state.aty)
        passes += 2.0
        if gap0 <= 0.0:
            return state, OracleResult(
                rp.minimizer_from_dual(state.aty), passes, True,
                certified_gap=gap0)
        target = gap0 / factor
        block = (cfg.inner_steps or n) * cfg.gap_check_every
        gap = gap0
        steps = 0
        while passes < cfg.max_passes:
            run.run_steps(block)
            steps += block
            passes += block / n
            y, aty = run.current()
            gap, fval, _ = _dual_gap(rp, y, aty)
            passes += 2.0
            if gap <= target:
                return DualState(y, aty, 0), OracleResult(
                    rp.minimizer_from_dual(aty), passes, True,
                    certified_gap=gap, steps=steps)
        y, aty = run.current()
        return DualState(y, aty, 0), OracleResult(
            rp.minimizer_from_dual(aty), passes, False,
            certified_gap=gap, steps=steps)


class SdcaDualOracle:
    """Exact stochastic dual coordinate ascent."""

    name = "sdca"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()
        self.rng = _rng_or_default(rng)

    def _pass(self, rp, state, steps):
        base = rp.base
        row_sq = (base.matrix * base.matrix).sum(axis=1)
        order = self.rng.integers(0, base.n, size=steps)
        sdca_pass(base.matrix, base.kinds, base.labels, base.weights,
                  state.y, state.aty, rp.center_eff, rp.lam_eff,
                  row_sq, order)
        state.updates_since_refresh += steps
        if state.updates_since_refresh >= 10 * base.n:
            state.refresh(base.matrix)

    def advance(self, rp, state: DualState, factor):
        cfg = self.config
        n = rp.base.n
        state = state.copy()
        passes = 0.0
        if cfg.mode == "theory":
            steps = sdca_theory_steps(rp, factor)
            if steps / n > cfg.max_passes:
                steps = int(cfg.max_passes * n)
                converged = False
            else:
                converged = True
            self._pass(rp, state, steps)
            return state, OracleResult(
                rp.minimizer_from_dual(state.aty), steps / n, converged,
                steps=steps)
        gap0, _, _ = _dual_gap(rp, state.y, state.aty)
        passes += 2.0
        if gap0 <= 0.0:
            return state, OracleResult(
                rp.minimizer_from_dual(state.aty), passes, True,
                certified_gap=gap0)
        target = gap0 / factor
        block = (cfg.inner_steps or n) * cfg.gap_check_every
        gap = gap0
        steps = 0
        while passes < cfg.max_passes:
            self._pass(rp, state, block)
            steps += block
            passes += block / n
            gap, fval, _ = _dual_gap(rp, state.y, state.aty)
            passes += 2.0
            if gap <= target:
                return state, OracleResult(
                    rp.minimizer_from_dual(state.aty), passes, True,
                    certified_gap=gap, steps=steps)
        return state, OracleResult(
            rp.minimizer_from_dual(state.aty), passes, False,
            certified_gap=gap, steps=steps)


def sdca_coordinate_step(rp: RegularizedProblem, state: DualState, i: int) -> float:
    """Exactly maximize the dual over coordinate i, in place; returns the move."""
    base = rp.base
    row_sq = (base.matrix * base.matrix).sum(axis=1)
    before = state.y[i]
    order = np.array([i], dtype=np.int64)
    sdca_pass(base.matrix, base.kinds, base.labels, base.weights,
              state.y, state.aty, rp.center_eff, rp.lam_eff, row_sq, order)
    state.updates_since_refresh += 1
    return float(state.y[i] - before)


class ApcgPrimalOracle:
    """Primal oracle that solves the dual with accelerated coordinate
    ascent and maps the result back through the dual-optimal point."""

    name = "apcg"

    def __init__(self, config: SolverConfig | None = None, rng=None):
        self.config = config or SolverConfig()
        self.rng = _rng_or_default(rng)

    def solve(self, rp, start, factor):
        cfg = self.config
        n = rp.base.n
        if factor <= 1.0:
            return OracleResult(np.array(start, dtype=np.float64), 0.0, True)
        y0 = primal_to_dual(rp.base, start)
        passes = 1.0
        run = _ApcgRun(rp, y0, self.rng)
        if cfg.mode == "theory":
            steps = apcg_theory_steps(rp, primal_via_dual_factor(rp, factor))
            if steps / n > cfg.max_passes:
                steps = int(cfg.max_passes * n)
                converged = False
            else:
                converged = True
            run.run_steps(steps)
            passes += steps / n
            y, aty = run.current()
            return OracleResult(rp.minimizer_from_dual(aty), passes,
                                converged, steps=steps, extra={"y": y})
        aty0 = rp.base.matrix.T @ y0
        gap0 = rp.value(start) + rp.dual_value(y0, aty0)
        passes += 2.0
        if gap0 <= 0.0:
            return OracleResult(np.array(start, dtype=np.float64), passes,
                                True, certified_gap=gap0)
        target = gap0 / factor
        block = (cfg.inner_steps or n) * cfg.gap_check_every
        gap = gap0
        steps = 0
        best_x, best_gap = np.array(start, dtype=np.float64), gap0
        while passes < cfg.max_passes:
            run.run_steps(block)
            steps += block
            passes += block / n
            y, aty = run.current()
            gap, fval, _ = _dual_gap(rp, y, aty)
            passes += 2.0
            if gap < best_gap:
                best_x, best_gap = rp.minimizer_from_dual(aty), gap
            if gap <= target:
                return OracleResult(best_x, passes, True,
                                    certified_gap=best_gap, steps=steps,
                                    extra={"y": y})
        return OracleResult(best_x, passes, False, certified_gap=best_gap,
                            steps=steps)


# ------------------------------------------------------ standalone loops

def run_svrg_epoch(problem: ErmProblem, x: np.ndarray, step: float, rng,
                   inner_steps: int | None = None) -> float:
    """One anchored epoch directly on the full objective, in place on x.

    Returns the pass cost.  The explicit l2 term is handled exactly;
    abstract strong convexity contributes nothing to the estimator.
    """
    z = problem.margins(x)
    wderiv = _weighted_derivs(problem, z)
    grad = problem.matrix.T @ wderiv
    if problem.explicit_l2 > 0.0:
        grad = grad + problem.explicit_l2 * x
    anchor = x.copy()
    steps = inner_steps if inner_steps is not None else problem.n
    idx = rng.integers(0, problem.n, size=steps)
    svrg_inner(problem.matrix, problem.kinds, problem.labels, problem.weights,
               x, anchor, wderiv, grad, problem.explicit_l2, step, idx)
    return 1.0 + steps / problem.n


def run_sdca_pass(rp: RegularizedProblem, state: DualState, rng,
                  inner_steps: int | None = None) -> float:
    """One pass of exact dual coordinate steps in place on state.

    Standalone counterpart of the dual oracle for benchmarking a fixed
    regularized problem; returns the pass cost.
    """
    base = rp.base
    steps = inner_steps if inner_steps is not None else base.n
    row_sq = (base.matrix * base.matrix).sum(axis=1)
    order = rng.integers(0, base.n, size=steps)
    sdca_pass(base.matrix, base.kinds, base.labels, base.weights,
              state.y, state.aty, rp.center_eff, rp.lam_eff, row_sq, order)
    state.updates_since_refresh += steps
    if state.updates_since_refresh >= 10 * base.n:
        state.refresh(base.matrix)
    return steps / base.n


def run_sgd_pass(problem: ErmProblem, x: np.ndarray, step0: float,
                 step_power: float, done_steps: int, rng) -> int:
    """One pass of stochastic gradient steps in place on x.

    Returns the updated global step counter (feeds the decaying
    stepsize on the next call).
    """
    idx = rng.integers(0, problem.n, size=problem.n)
    sgd_pass(problem.matrix, problem.kinds, problem.labels, problem.weights,
             x, problem.explicit_l2, step0, step_power, float(done_steps), idx)
    return done_steps + problem.n


PRIMAL_ORACLES = {
    "svrg": SvrgPrimalOracle,
    "apcg": ApcgPrimalOracle,
    "gd": GdPrimalOracle,
    "agd": AgdPrimalOracle,
    "exact": ExactProxOracle,
}

DUAL_ORACLES = {
    "sdca": SdcaDualOracle,
    "apcg": ApcgDualOracle,
}
