"""Experiment orchestration and the ``unreg`` command line front end.

Stage semantics: the flat baselines (sdca, svrg, sgd, gd, agd) spend
one dataset pass per stage; the proximal outer loops (appa,
accel-appa, dual-appa) spend one inner-oracle call per stage, whose
budget is a few passes.  Trace diagnostics (train loss, gradient norm,
the standalone gap column) are free; certificates an oracle consumes
for its own stopping rule are billed inside the oracle.

For sgd and svrg the --lambda value doubles as the stepsize (sgd decays
it as lam/sqrt(t+1)) unless --step overrides it, matching the sweep
protocol where one grid serves every algorithm.  Logistic runs add
--mu as an explicit l2 ridge; squared runs take their strong convexity
from the data (exact smallest eigenvalue unless --mu is given).
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .appa import (AppaConfig, DualAppaConfig, accelerated_appa_run, appa_run,
                   dual_appa_run, dual_appa_theory_sigma)
from .data import (Dataset, append_affine_feature, load_dataset,
                   random_fourier_features, row_normalize, save_dataset_csv,
                   split_dataset, synth_least_squares, synth_logistic)
from .duality import DualState, RegularizedProblem, primal_to_dual
from .lemmacheck import BATTERY_SEED, reports_to_csv, run_all_checks
from .oracles import (DUAL_ORACLES, PRIMAL_ORACLES, SolverConfig,
                      run_sdca_pass, run_sgd_pass, run_svrg_epoch)
from .problem import ErmProblem, logistic_loss_problem, squared_loss_problem
from .reference import is_quadratic, minimize_erm
from .trace import ConvergenceTrace, TraceRow

ALGORITHMS = ("appa", "accel-appa", "dual-appa", "sdca", "svrg", "sgd",
              "gd", "agd")
SWEEP_HEADER = "# unreg-sweep-v1"
DIVERGENCE_FACTOR = 1e12


def build_problem(ds: Dataset, loss: str, mu: float | None = None) -> ErmProblem:
    """Uniform-weight training problem from a dataset."""
    a = ds.train_features
    b = ds.train_labels
    n = a.shape[0]
    if n == 0:
        raise ValueError("dataset has no training rows")
    w = np.full(n, 1.0 / n)
    if loss == "squared":
        if mu is None:
            mu = float(np.linalg.eigvalsh((a * w[:, None]).T @ a).min())
            if mu <= 0.0:
                raise ValueError(
                    "training matrix is singular; pass an explicit --mu")
        return squared_loss_problem(a, b, w, mu=mu)
    if loss == "logistic":
        if mu is None:
            raise ValueError("logistic runs need --mu (added as an l2 ridge)")
        return logistic_loss_problem(a, b, w, mu=mu, explicit_l2=mu)
    raise ValueError(f"unknown loss {loss!r}")


def full_gradient_smoothness(problem: ErmProblem) -> float:
    sq = (problem.matrix * problem.matrix).sum(axis=1)
    per = np.array([l.smoothness for l in problem.losses])
    return float((per * sq).sum() + problem.explicit_l2)


_FSTAR_CACHE: dict[bytes, float] = {}


def _problem_digest(problem: ErmProblem) -> bytes:
    h = hashlib.sha256()
    for arr in (problem.matrix, problem.labels, problem.weights,
                problem.kinds):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(np.float64(problem.explicit_l2).tobytes())
    return h.digest()


def erm_optimum_value(problem: ErmProblem, grad_tol: float = 1e-12,
                      max_iters: int = 2_000_000) -> float:
    """Optimal-value oracle behind the excess-loss column.

    Quadratic objectives use the closed-form normal-equations solution;
    anything else runs accelerated full-gradient descent until the
    gradient norm falls under grad_tol, cached per dataset.
    """
    if is_quadratic(problem):
        return minimize_erm(problem)[1]
    key = _problem_digest(problem)
    if key in _FSTAR_CACHE:
        return _FSTAR_CACHE[key]
    big_l = full_gradient_smoothness(problem)
    kappa = max(1.0, big_l / problem.mu)
    beta = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
    x = np.zeros(problem.dim)
    v = x.copy()
    done = False
    for it in range(max_iters):
        g = problem.gradient(v)
        x_new = v - g / big_l
        v = x_new + beta * (x_new - x)
        x = x_new
        if it % 100 == 99:
            gn = float(np.linalg.norm(problem.gradient(x)))
            if gn <= grad_tol:
                done = True
                break
    if not done:
        raise RuntimeError(
            f"optimum oracle stalled above gradient tolerance {grad_tol:g}")
    val = problem.value(x)
    _FSTAR_CACHE[key] = val
    return val


def _classification_error(ds: Dataset, x: np.ndarray) -> float:
    pred = np.where(ds.test_features @ x >= 0.0, 1.0, -1.0)
    return float(np.mean(pred != ds.test_labels))


def _run_flat(problem: ErmProblem, x0, algorithm: str, lam: float,
              stages: int, rng, step: float | None) -> ConvergenceTrace:
    x = x0.copy()
    passes = 0.0
    f0 = problem.value(x)
    trace = ConvergenceTrace(algorithm, meta={"lambda": lam})
    gn = float(np.linalg.norm(problem.gradient(x)))
    trace.append(TraceRow(0, passes, f0, grad_norm=gn, lam=lam,
                          extra={"x": x.copy()}))
    rp = state = None
    done_steps = 0
    if algorithm == "sdca":
        rp = RegularizedProblem(problem, x0, lam)
        state = DualState.create(problem.matrix, primal_to_dual(problem, x))
        passes += 1.0
    svrg_step = step if step is not None else lam
    if algorithm in ("gd", "agd"):
        big_l = full_gradient_smoothness(problem)
        kappa = max(1.0, big_l / problem.mu)
        beta = (math.sqrt(kappa) - 1.0) / (math.sqrt(kappa) + 1.0)
        v = x.copy()
    for t in range(1, stages + 1):
        cert = None
        if algorithm == "sdca":
            passes += run_sdca_pass(rp, state, rng)
            x = rp.minimizer_from_dual(state.aty)
            cert = rp.value(x) + rp.dual_value(state.y, state.aty)
        elif algorithm == "svrg":
            passes += run_svrg_epoch(problem, x, svrg_step, rng)
        elif algorithm == "sgd":
            done_steps = run_sgd_pass(problem, x, lam if step is None else step,
                                      0.5, done_steps, rng)
            passes += 1.0
        elif algorithm == "gd":
            x = x - problem.gradient(x) / big_l
            passes += 1.0
        elif algorithm == "agd":
            x_new = v - problem.gradient(v) / big_l
            v = x_new + beta * (x_new - x)
            x = x_new
            passes += 1.0
        val = problem.value(x)
        diverged = (not np.isfinite(val)
                    or val > DIVERGENCE_FACTOR * (1.0 + abs(f0)))
        gn = float(np.linalg.norm(problem.gradient(x))) if not diverged else None
        trace.append(TraceRow(t, passes, val, grad_norm=gn,
                              certified_gap=cert, lam=lam, diverged=diverged,
                              extra={"x": x.copy()}))
        if diverged:
            break
    return trace


def _run_outer(problem: ErmProblem, x0, algorithm: str, lam: float,
               stages: int, rng, mode: str, sigma, gap_factor: float,
               stage_passes: float, oracle_name, step) -> ConvergenceTrace:
    max_passes = float("inf") if mode == "theory" else stage_passes
    inner_cfg = SolverConfig(mode=mode, max_passes=max_passes,
                             gap_check_every=1, step=step)
    if algorithm == "dual-appa":
        oracle = DUAL_ORACLES[oracle_name or "apcg"](inner_cfg, rng=rng)
        if mode == "theory":
            cfg = DualAppaConfig(
                lam, stages, mode="theory",
                sigma=sigma if sigma is not None
                else dual_appa_theory_sigma(problem, lam))
        else:
            cfg = DualAppaConfig(lam, stages, mode="practical",
                                 practical_gap_factor=gap_factor)
        _, trace = dual_appa_run(problem, x0, cfg, oracle)
        return trace
    oracle = PRIMAL_ORACLES[oracle_name or "svrg"](inner_cfg, rng=rng)
    cfg = AppaConfig(lam, stages)
    if algorithm == "appa":
        _, trace = appa_run(problem, x0, cfg, oracle)
    else:
        _, trace = accelerated_appa_run(problem, x0, cfg, oracle)
    return trace


def run_experiment(ds: Dataset, algorithm: str, loss: str, lam: float,
                   stages: int, seed: int, f_star_oracle=None,
                   mu: float | None = None, oracle: str | None = None,
                   mode: str = "practical", sigma: float | None = None,
                   gap_factor: float = 1e3, stage_passes: float = 5.0,
                   step: float | None = None,
                   collect_wall: bool = False) -> ConvergenceTrace:
    """One solver run on a dataset, one trace row per stage."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if stages < 0:
        raise ValueError("stages must be nonnegative")
    problem = build_problem(ds, loss, mu=mu)
    rng = np.random.default_rng(seed)
    x0 = np.zeros(problem.dim)
    f_star = None if f_star_oracle is None else float(f_star_oracle(problem))
    started = time.perf_counter()
    if algorithm in ("appa", "accel-appa", "dual-appa"):
        trace = _run_outer(problem, x0, algorithm, lam, stages, rng, mode,
                           sigma, gap_factor, stage_passes, oracle, step)
    else:
        trace = _run_flat(problem, x0, algorithm, lam, stages, rng, step)
    f0 = trace.rows[0].train_loss
    for row in trace.rows:
        if row.train_loss > DIVERGENCE_FACTOR * (1.0 + abs(f0)):
            row.diverged = True
        if f_star is not None:
            row.excess_loss = row.train_loss - f_star
        xr = row.extra.get("x")
        if ds.test_idx.size and xr is not None and not row.diverged:
            row.test_error = _classification_error(ds, xr)
    if collect_wall:
        trace.final.wall_seconds = time.perf_counter() - started
    trace.meta.update(algorithm=algorithm, loss=loss, seed=seed,
                      stages=stages)
    return trace


# ---------------------------------------------------------------- sweeps

def _sweep_cell(args):
    ds, algorithm, lam, stages, seed, loss, mu = args
    try:
        trace = run_experiment(ds, algorithm, loss, lam, stages, seed, mu=mu)
    except ValueError:
        # infeasible configuration for this cell (e.g. accel-appa needs
        # lam > 2 mu); the sweep keeps going
        return (algorithm, lam, float("nan"), 0.0, True)
    return (algorithm, lam, trace.final.train_loss, trace.total_passes,
            trace.diverged)


def sweep_lambda(ds: Dataset, algorithms, lambda_grid, stages: int = 20,
                 seed: int = 0, loss: str = "squared",
                 mu: float | None = None, workers: int | None = None):
    """Final objective per (algorithm, lambda) cell; divergence recorded."""
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    cells = [(ds, algo, lam, stages, seed, loss, mu)
             for algo in algorithms for lam in grid]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1:
        return [_sweep_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_cell, cells))


def sweep_to_csv(rows) -> str:
    out = [SWEEP_HEADER, "algorithm,lambda,finalTrainLoss,passes,diverged"]
    for algo, lam, val, passes, div in rows:
        out.append(f"{algo},{lam:.17g},{val:.17g},{passes:.17g},"
                   f"{1 if div else 0}")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------------ CLI

def _add_data_args(p):
    p.add_argument("--data", required=True, help="dataset file")
    p.add_argument("--format", choices=("libsvm", "csv"), default="csv")
    p.add_argument("--loss", choices=("squared", "logistic"),
                   default="squared")
    p.add_argument("--test-fraction", type=float, default=0.0,
                   help="held-out fraction; enables the testError column")
    p.add_argument("--rff", type=int, metavar="D",
                   help="map features through D random Fourier features "
                        "(the usual protocol takes D = n/5)")
    p.add_argument("--bandwidth", type=float, default=1.0,
                   help="Gaussian kernel bandwidth for --rff")
    p.add_argument("--row-normalize", action="store_true",
                   help="scale the matrix by the inverse mean train row norm")
    p.add_argument("--affine", action="store_true",
                   help="append a constant-1 feature")


def _load_and_transform(args) -> Dataset:
    ds = load_dataset(args.data, args.format)
    if args.test_fraction:
        ds = split_dataset(ds, args.test_fraction, args.seed)
    if args.rff is not None:
        ds = random_fourier_features(ds, args.rff, args.bandwidth, args.seed)
    if args.row_normalize:
        ds = row_normalize(ds)
    if args.affine:
        ds = append_affine_feature(ds)
    return ds


def _cmd_solve(args) -> int:
    ds = _load_and_transform(args)
    f_star_oracle = erm_optimum_value if args.excess else None
    trace = run_experiment(
        ds, args.algo, args.loss, args.lam, args.stages, args.seed,
        f_star_oracle=f_star_oracle, mu=args.mu, oracle=args.oracle,
        mode=args.mode, sigma=args.sigma, gap_factor=args.gap_factor,
        stage_passes=args.stage_passes, step=args.step,
        collect_wall=args.wall)
    text = trace.to_csv(include_wall_seconds=args.wall)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 3 if trace.diverged else 0


def _parse_grid_exp(spec: str):
    lo, _, hi = spec.partition(":")
    try:
        lo_i, hi_i = int(lo), int(hi)
    except ValueError:
        raise ValueError(f"bad --grid-exp {spec!r}, expected LO:HI")
    if hi_i < lo_i:
        raise ValueError("--grid-exp upper bound below lower bound")
    return [10.0 ** e for e in range(lo_i, hi_i + 1)]


def _cmd_sweep(args) -> int:
    ds = _load_and_transform(args)
    algorithms = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    build_problem(ds, args.loss, mu=args.mu)  # fail fast on bad config
    grid = _parse_grid_exp(args.grid_exp)
    rows = sweep_lambda(ds, algorithms, grid, stages=args.stages,
                        seed=args.seed, loss=args.loss, mu=args.mu,
                        workers=args.workers)
    text = sweep_to_csv(rows)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_check_lemmas(args) -> int:
    reports = run_all_checks(args.seed)
    text = reports_to_csv(reports)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    for r in reports:
        status = "ok" if r.ok else "VIOLATED"
        print(f"{r.lemma_id}: {status} ({r.instances} instances, "
              f"worst slack {r.worst_slack:.3e})")
    return 0 if all(r.ok for r in reports) else 3


def _cmd_synth(args) -> int:
    if args.kind == "ls":
        ds, info = synth_least_squares(args.n, args.d, args.kappa, args.seed)
    else:
        ds, info = synth_logistic(args.n, args.d, args.kappa, args.seed)
    save_dataset_csv(ds, args.out)
    print(" ".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}"
                   for k, v in sorted(info.items())))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="unreg",
        description="Proximal-point reductions for stochastic ERM solvers")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run one solver, write a trace CSV")
    _add_data_args(solve)
    solve.add_argument("--algo", required=True, choices=ALGORITHMS)
    solve.add_argument("--lambda", dest="lam", type=float, required=True,
                       help="proximal weight (stepsize for sgd/svrg)")
    solve.add_argument("--mu", type=float,
                       help="strong convexity (logistic: also the ridge)")
    solve.add_argument("--stages", type=int, default=20)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--out", help="trace CSV path (default stdout)")
    solve.add_argument("--oracle",
                       choices=sorted(set(PRIMAL_ORACLES) | set(DUAL_ORACLES)),
                       help="inner solver for the outer loops")
    solve.add_argument("--mode", choices=("practical", "theory"),
                       default="practical")
    solve.add_argument("--sigma", type=float,
                       help="theory-mode dual oracle factor override")
    solve.add_argument("--gap-factor", type=float, default=1e3,
                       help="practical per-stage gap reduction target")
    solve.add_argument("--stage-passes", type=float, default=5.0,
                       help="pass budget per oracle call in practical mode")
    solve.add_argument("--step", type=float, help="stepsize override")
    solve.add_argument("--excess", action="store_true",
                       help="fill excessLoss against the optimum oracle")
    solve.add_argument("--wall", action="store_true",
                       help="include wall time (breaks byte determinism)")

    sweep = sub.add_parser("sweep", help="final loss over a lambda grid")
    _add_data_args(sweep)
    sweep.add_argument("--algos", default="appa,sdca,svrg,sgd",
                       help="comma-separated algorithm list")
    sweep.add_argument("--grid-exp", default="-8:8", metavar="LO:HI",
                       help="lambda grid 10^LO .. 10^HI")
    sweep.add_argument("--mu", type=float)
    sweep.add_argument("--stages", type=int, default=20)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--out", help="sweep CSV path (default stdout)")
    sweep.add_argument("--workers", type=int,
                       help="parallel cells (default: cpu count)")

    check = sub.add_parser("check-lemmas",
                           help="run the seeded inequality battery")
    check.add_argument("--seed", type=int, default=BATTERY_SEED)
    check.add_argument("--out", help="report CSV path")

    synth = sub.add_parser("synth", help="generate a benchmark dataset")
    synth.add_argument("--kind", choices=("ls", "logistic"), required=True)
    synth.add_argument("--n", type=int, default=2000)
    synth.add_argument("--d", type=int, default=50)
    synth.add_argument("--kappa", type=float, default=1e4)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    handlers = {"solve": _cmd_solve, "sweep": _cmd_sweep,
                "check-lemmas": _cmd_check_lemmas, "synth": _cmd_synth}
    try:
        return handlers[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
