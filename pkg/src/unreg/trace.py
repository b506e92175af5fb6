"""Per-stage convergence records and their CSV serialization.

The on-disk format is versioned ("unreg-trace-v1").  Rows are written
with repr-faithful float formatting so a rerun with the same seed
produces byte-identical files; wall-clock times are collected in
memory but only serialized on request since they never replay.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

TRACE_HEADER = "# unreg-trace-v1"

_COLUMNS = (
    "stage", "passes", "trainLoss", "excessLoss", "gradNorm",
    "certifiedGap", "testError", "lambda", "oracleConverged", "diverged",
)


@dataclass
class TraceRow:
    stage: int
    passes: float
    train_loss: float
    grad_norm: float | None = None
    certified_gap: float | None = None
    excess_loss: float | None = None
    test_error: float | None = None
    lam: float | None = None
    oracle_converged: bool = True
    diverged: bool = False
    wall_seconds: float | None = None
    extra: dict = field(default_factory=dict)  # diagnostics, not serialized

    def _fields(self):
        return (self.stage, self.passes, self.train_loss, self.excess_loss,
                self.grad_norm, self.certified_gap, self.test_error,
                self.lam, self.oracle_converged, self.diverged)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def _parse(col: str, text: str):
    if text == "":
        return None
    if col == "stage":
        return int(text)
    if col in ("oracleConverged", "diverged"):
        return text == "1"
    return float(text)


@dataclass
class ConvergenceTrace:
    algorithm: str
    rows: list[TraceRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, row: TraceRow):
        self.rows.append(row)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def values(self) -> list[float]:
        return [r.train_loss for r in self.rows]

    @property
    def total_passes(self) -> float:
        return self.rows[-1].passes if self.rows else 0.0

    @property
    def diverged(self) -> bool:
        return any(r.diverged for r in self.rows)

    def to_csv(self, include_wall_seconds: bool = False) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        meta = dict(self.meta)
        meta.setdefault("algorithm", self.algorithm)
        buf.write("# " + " ".join(
            f"{k}={_fmt(v) if not isinstance(v, str) else v}"
            for k, v in sorted(meta.items())) + "\n")
        cols = _COLUMNS + (("wallSeconds",) if include_wall_seconds else ())
        buf.write(",".join(cols) + "\n")
        for r in self.rows:
            cells = [_fmt(v) for v in r._fields()]
            if include_wall_seconds:
                cells.append(_fmt(r.wall_seconds))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()

    def write_csv(self, path, include_wall_seconds: bool = False):
        with open(path, "w") as fh:
            fh.write(self.to_csv(include_wall_seconds))


def read_trace_csv(path) -> ConvergenceTrace:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"{path}: not a recognized trace file")
    meta: dict = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("#"):
            for tok in ln[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        elif ln:
            body.append(ln)
    header = body[0].split(",")
    rows = []
    for ln in body[1:]:
        vals = dict(zip(header, (_parse(c, t) for c, t in
                                 zip(header, ln.split(",")))))
        rows.append(TraceRow(
            stage=vals.get("stage", 0) or 0,
            passes=vals.get("passes") or 0.0,
            train_loss=vals.get("trainLoss", float("nan")),
            excess_loss=vals.get("excessLoss"),
            grad_norm=vals.get("gradNorm"),
            certified_gap=vals.get("certifiedGap"),
            test_error=vals.get("testError"),
            lam=vals.get("lambda"),
            oracle_converged=bool(vals.get("oracleConverged", True)),
            diverged=bool(vals.get("diverged", False)),
            wall_seconds=vals.get("wallSeconds"),
        ))
    return ConvergenceTrace(meta.get("algorithm", ""), rows, meta)
