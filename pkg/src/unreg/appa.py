"""Outer loops that accelerate strongly convex ERM through proximal
subproblems.

Three drivers share the same skeleton: repeatedly hand a well
conditioned subproblem  F + (lam/2)||. - center||^2  to an inner
oracle, then move the center.

- ``appa_run``: center at the current iterate; a factor
  (lam + mu) / (c' mu) oracle contracts the error by
  (lam + c' mu) / (lam + mu) per stage.
- ``accelerated_appa_run``: momentum on the centers; per stage the
  gap to a tracked quadratic lower bound contracts by
  1 - 1/(2 sqrt(rho)) with rho = (mu + 2 lam) / mu.
- ``dual_appa_run``: the subproblem is attacked in its dual, warm
  starting the dual vector across center moves; the primal iterate is
  recovered in O(d) from the cached back-projection.

Stage bookkeeping: one stage is one oracle invocation; passes count
data access as documented in oracles.py.  Trace diagnostics (objective
values, gradient norms, tracked lower bounds) are free: they observe
the run and are not part of any algorithm's budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .duality import (
    DualState,
    RegularizedProblem,
    make_subproblem,
    primal_to_dual,
)
from .problem import ErmProblem
from .reference import minimize_regularized
from .trace import ConvergenceTrace, TraceRow


@dataclass(frozen=True)
class AppaConfig:
    lam: float
    outer_iterations: int
    target_epsilon: float | None = None
    c_prime: float = 0.5

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")
        if self.outer_iterations < 0:
            raise ValueError("outer_iterations must be nonnegative")
        if not 0.0 < self.c_prime < 1.0:
            raise ValueError("c_prime must lie in (0, 1)")

    def oracle_factor(self, mu: float) -> float:
        """Required inner reduction; 2(lam+mu)/mu at the default slack."""
        return (self.lam + mu) / (self.c_prime * mu)


@dataclass(frozen=True)
class DualAppaConfig:
    lam: float
    outer_iterations: int
    sigma: float | None = None           # theory-mode dual oracle factor
    mode: str = "practical"
    practical_gap_factor: float = 1e3
    target_epsilon: float | None = None
    c_prime: float = 0.5

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ValueError("lam must be positive and finite")
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "theory" and self.sigma is None:
            raise ValueError("theory mode needs sigma")

    def contraction(self, mu: float) -> float:
        return (self.lam + self.c_prime * mu) / (self.lam + mu)


@dataclass
class AcceleratedState:
    """Iterate pair plus the constants of the accelerated outer loop.

    ``psi_star`` is the constant of the tracked quadratic lower bound
    psi(x) = psi_star + (mu_prime/2)||x - v||^2 <= F(x); maintained for
    diagnostics only, never used by the updates."""

    x: np.ndarray
    v: np.ndarray
    rho: float
    zeta: float
    mu_prime: float
    beta: float
    gamma: float
    psi_star: float | None = None

    @classmethod
    def create(cls, x0: np.ndarray, mu: float, lam: float,
               psi_star: float | None = None) -> "AcceleratedState":
        if lam <= 2.0 * mu:
            raise ValueError("accelerated outer loop requires lam > 2*mu")
        rho = (mu + 2.0 * lam) / mu
        mu_prime = mu / 2.0
        state = cls(
            x=np.array(x0, dtype=np.float64),
            v=np.array(x0, dtype=np.float64),
            rho=rho,
            zeta=2.0 / mu + 1.0 / lam,
            mu_prime=mu_prime,
            beta=1.0 - rho ** -0.5,
            gamma=1.0 + mu_prime / lam,
            psi_star=psi_star,
        )
        return state

    def lower_bound(self, x: np.ndarray) -> float:
        if self.psi_star is None:
            raise ValueError("lower bound not tracked (no optimal value given)")
        d = x - self.v
        return self.psi_star + 0.5 * self.mu_prime * float(d @ d)


def accelerated_oracle_factor(mu: float, lam: float) -> float:
    rho = (mu + 2.0 * lam) / mu
    return 4.0 * rho ** 1.5


def _grad_certificate(problem, x) -> tuple[float, float]:
    g = problem.gradient(x)
    gn = float(np.linalg.norm(g))
    return gn, gn * gn / (2.0 * problem.mu)


def appa_run(problem, x0, cfg: AppaConfig, oracle):
    """Proximal point outer loop with re-centering at every stage."""
    x = np.array(x0, dtype=np.float64)
    factor = cfg.oracle_factor(problem.mu)
    trace = ConvergenceTrace("appa", meta={"lambda": cfg.lam})
    passes = 0.0
    gn, cert = _grad_certificate(problem, x)
    trace.append(TraceRow(0, passes, problem.value(x), grad_norm=gn,
                          certified_gap=cert, lam=cfg.lam,
                          extra={"x": x.copy()}))
    for t in range(1, cfg.outer_iterations + 1):
        rp = make_subproblem(problem, x, cfg.lam)
        res = oracle.solve(rp, x, factor)
        x = np.asarray(res.point, dtype=np.float64)
        passes += res.passes
        val = problem.value(x)
        gn, cert = _grad_certificate(problem, x)
        trace.append(TraceRow(
            t, passes, val, grad_norm=gn, certified_gap=cert, lam=cfg.lam,
            oracle_converged=res.converged,
            diverged=not np.isfinite(val),
            extra={"inner_gap": res.certified_gap, "x": x.copy()},
        ))
        if trace.final.diverged:
            break
        if cfg.target_epsilon is not None and cert <= cfg.target_epsilon:
            break
    return x, trace


def accelerated_appa_run(problem, x0, cfg: AppaConfig, oracle,
                         f_star: float | None = None,
                         inner_opt=None):
    """Momentum over proximal centers.

    The subproblem at stage t is centered at the extrapolated point and
    solved warm from the current iterate with a factor
    4 rho^{3/2} oracle.  With ``f_star`` supplied, the quadratic lower
    bound is tracked so tests can watch F(x_t) - psi*_t contract; the
    inner optimum needed for its update comes from ``inner_opt`` (a
    callable returning min of a subproblem, default: the high-precision
    reference solver).
    """
    mu = problem.mu
    lam = cfg.lam
    psi0 = None
    x0 = np.array(x0, dtype=np.float64)
    f0 = problem.value(x0)
    if f_star is not None:
        # lower-bound constant that a factor-(rho+1) inflation of the
        # initial error certifies
        psi0 = f0 - (lam + mu) / (mu / 2.0) * (f0 - f_star)
    state = AcceleratedState.create(x0, mu, lam, psi_star=psi0)
    if inner_opt is None:
        if f_star is not None and not isinstance(problem, ErmProblem):
            raise ValueError(
                "lower-bound tracking on a black-box problem needs inner_opt")
        inner_opt = lambda rp: minimize_regularized(rp)[1]
    factor = accelerated_oracle_factor(mu, lam)
    rsq = state.rho ** -0.5
    trace = ConvergenceTrace("accel-appa", meta={"lambda": lam})
    passes = 0.0
    gn, cert = _grad_certificate(problem, x0)
    trace.append(TraceRow(
        0, passes, f0, grad_norm=gn, certified_gap=cert, lam=lam,
        extra={"psi_star": psi0, "v": state.v.copy(), "x": x0.copy(),
               "potential": None if psi0 is None else f0 - psi0}))
    for t in range(1, cfg.outer_iterations + 1):
        y = (state.x + rsq * state.v) / (1.0 + rsq)
        rp = make_subproblem(problem, y, lam)
        res = oracle.solve(rp, state.x, factor)
        x_new = np.asarray(res.point, dtype=np.float64)
        g = lam * (y - x_new)
        v_old = state.v
        state.v = (1.0 - rsq) * v_old + rsq * (y - state.zeta * g)
        state.x = x_new
        passes += res.passes
        val = problem.value(x_new)
        extra = {"inner_gap": res.certified_gap, "x": x_new.copy()}
        if state.psi_star is not None:
            inner_err = max(rp.value(x_new) - inner_opt(rp), 0.0)
            mu_p = state.mu_prime
            beta = state.beta
            fresh = (val - float(g @ g) / (2.0 * mu_p)
                     - (lam + 2.0 * mu_p) / mu_p * inner_err)
            drift = v_old - y + state.zeta * g
            state.psi_star = (beta * state.psi_star + (1.0 - beta) * fresh
                              + beta * (1.0 - beta) * 0.5 * mu_p
                              * float(drift @ drift))
            extra.update(psi_star=state.psi_star, v=state.v.copy(),
                         potential=val - state.psi_star,
                         inner_error=inner_err)
        gn, cert = _grad_certificate(problem, x_new)
        trace.append(TraceRow(
            t, passes, val, grad_norm=gn, certified_gap=cert, lam=lam,
            oracle_converged=res.converged,
            diverged=not np.isfinite(val), extra=extra))
        if trace.final.diverged:
            break
        if cfg.target_epsilon is not None and cert <= cfg.target_epsilon:
            break
    return state.x, trace


def reduction_stage_count(mu: float, lam: float, c: float) -> int:
    """Outer stages sufficient to cut the objective error by factor c.

    Zero when c <= 1.  Otherwise combines the per-stage contraction
    1 - 1/(2 sqrt(rho)) with the initial inflation rho + 1 of the
    tracked lower-bound gap relative to the true error.
    """
    if c <= 1.0:
        return 0
    rho = (mu + 2.0 * lam) / mu
    per_stage = 1.0 - 0.5 * rho ** -0.5
    return max(1, math.ceil(math.log(c * (rho + 1.0)) / -math.log(per_stage)))


def accelerated_error_reduction(problem, x0, c: float, lam: float, oracle,
                                f_star: float | None = None,
                                inner_opt=None) -> np.ndarray:
    """Reduce F(x0) - F* by the factor c via the accelerated outer loop."""
    stages = reduction_stage_count(problem.mu, lam, c)
    if stages == 0:
        return np.array(x0, dtype=np.float64)
    cfg = AppaConfig(lam=lam, outer_iterations=stages)
    x, _ = accelerated_appa_run(problem, x0, cfg, oracle, f_star=f_star,
                                inner_opt=inner_opt)
    return x


def dual_appa_theory_sigma(problem: ErmProblem, lam: float,
                           c_prime: float = 0.5) -> float:
    """Dual oracle factor under which the stagewise invariants hold."""
    rp = RegularizedProblem(problem, np.zeros(problem.dim), lam)
    n = problem.n
    kl = rp.kappa_lambda
    kap = problem.kappa
    return (40.0 / c_prime) * n * n * kl * kl * max(kap, kl) \
        * math.ceil(lam / problem.mu)


def dual_appa_run(problem: ErmProblem, x0, cfg: DualAppaConfig, dual_oracle,
                  f_star: float | None = None, dual_opt_oracle=None):
    """Proximal point outer loop driven entirely through the dual.

    The dual vector is mapped once from x0 upfront; each stage advances
    it on the current subproblem's dual and recovers the next center
    from the cached back-projection in O(d).  When the centers carry no
    explicit l2 term, the recovered center must equal 2x - s exactly;
    this is asserted each stage against a freshly recomputed mapping.

    With ``f_star`` and ``dual_opt_oracle`` (a callable giving the dual
    optimum of a subproblem) supplied, each stage records its error
    decomposition next to the stagewise bound
    r^{t-1} (F(x0) - F*), r = (lam + c' mu)/(lam + mu).
    """
    if not isinstance(problem, ErmProblem):
        raise TypeError("the dual outer loop needs the linear-predictor structure")
    x = np.array(x0, dtype=np.float64)
    lam = cfg.lam
    factor = cfg.sigma if cfg.mode == "theory" else cfg.practical_gap_factor
    y0 = primal_to_dual(problem, x)
    state = DualState.create(problem.matrix, y0)
    passes = 1.0
    f0 = problem.value(x)
    eps0 = None if f_star is None else f0 - f_star
    r = cfg.contraction(problem.mu)
    trace = ConvergenceTrace("dual-appa", meta={"lambda": lam,
                                                "mode": cfg.mode})
    gn, cert = _grad_certificate(problem, x)
    trace.append(TraceRow(0, passes, f0, grad_norm=gn, certified_gap=cert,
                          lam=lam, extra={"x": x.copy()}))
    for t in range(1, cfg.outer_iterations + 1):
        rp = RegularizedProblem(problem, x, lam)
        f_prev = trace.final.train_loss
        state, res = dual_oracle.advance(rp, state, factor)
        passes += res.passes
        x_prev = x
        x = np.asarray(res.point, dtype=np.float64)
        extra = {"dual_value": rp.dual_value(state.y, state.aty),
                 "inner_gap": res.certified_gap, "x": x.copy()}
        if problem.explicit_l2 == 0.0:
            fresh_aty = problem.matrix.T @ state.y
            fresh_map = x - fresh_aty / lam  # minimizer for center moved to x
            jump = 2.0 * x - x_prev
            scale = 1.0 + float(np.linalg.norm(jump))
            if float(np.linalg.norm(fresh_map - jump)) > 1e-10 * scale:
                raise RuntimeError(
                    "re-centered dual mapping drifted from the 2x - s identity")
        if eps0 is not None and dual_opt_oracle is not None:
            bound = r ** (t - 1) * eps0
            extra.update(
                f_excess_prev=f_prev - f_star,
                dual_error=extra["dual_value"] - dual_opt_oracle(rp),
                invariant_bound=bound,
            )
        val = problem.value(x)
        gn, cert = _grad_certificate(problem, x)
        trace.append(TraceRow(
            t, passes, val, grad_norm=gn, certified_gap=cert, lam=lam,
            oracle_converged=res.converged,
            diverged=not np.isfinite(val), extra=extra))
        if trace.final.diverged:
            break
        if cfg.target_epsilon is not None and cert <= cfg.target_epsilon:
            break
    return x, trace


def lambda_decrease_schedule(trace: ConvergenceTrace, current_lam: float,
                             mu_estimate: float) -> float:
    """Cut lam tenfold when recent stages stopped making progress.

    Progress is estimated from the drops of the recorded objective over
    the last three stage pairs; once their ratio exceeds
    (lam + mu)/(lam + 2 mu) the subproblems are considered too easy to
    help and lam moves down, floored at 2*mu.
    """
    if len(trace.rows) < 3:
        raise ValueError("need at least two completed stages")
    floor = 2.0 * mu_estimate
    if current_lam <= floor:
        return current_lam
    values = trace.values()[-4:]
    drops = [values[i] - values[i + 1] for i in range(len(values) - 1)]
    scale = 1.0 + abs(values[-1])
    ratios = []
    for prev, nxt in zip(drops, drops[1:]):
        if prev <= 1e-15 * scale:
            ratios.append(1.0)
        else:
            ratios.append(max(nxt, 0.0) / prev)
    observed = sum(ratios) / len(ratios)
    threshold = (current_lam + mu_estimate) / (current_lam + 2.0 * mu_estimate)
    if observed > threshold:
        return max(current_lam / 10.0, floor)
    return current_lam
