"""Dataset loading, feature transforms and synthetic benchmark instances.

Datasets are dense float64 matrices with a train/test index split; the
split is all-train until one is made.  Loaders accept LIBSVM text (one
"label idx:val ..." line per row, 1-based indices, densified) and CSV
with a header whose label column is named "label".  Synthetic
generators produce least-squares and logistic instances whose condition
number ceil(L R^2 / mu) is hit exactly by a short fixed-point rescale
of the smallest singular value.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray = field(default=None)  # type: ignore[assignment]
    test_idx: np.ndarray = field(default=None)   # type: ignore[assignment]

    def __post_init__(self):
        f = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        l = np.asarray(self.labels, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if l.shape != (f.shape[0],):
            raise ValueError("labels must match the number of rows")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", l)
        tr = self.train_idx
        te = self.test_idx
        tr = np.arange(f.shape[0]) if tr is None else np.asarray(tr, dtype=np.int64)
        te = np.empty(0, dtype=np.int64) if te is None else np.asarray(te, dtype=np.int64)
        object.__setattr__(self, "train_idx", tr)
        object.__setattr__(self, "test_idx", te)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def train_features(self) -> np.ndarray:
        return self.features[self.train_idx]

    @property
    def train_labels(self) -> np.ndarray:
        return self.labels[self.train_idx]

    @property
    def test_features(self) -> np.ndarray:
        return self.features[self.test_idx]

    @property
    def test_labels(self) -> np.ndarray:
        return self.labels[self.test_idx]


def _parse_error(path, line_no: int, detail: str) -> ValueError:
    return ValueError(f"{path}:{line_no}: {detail}")


def _load_libsvm(path, text: str) -> Dataset:
    rows = []
    labels = []
    width = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            labels.append(float(parts[0]))
        except ValueError:
            raise _parse_error(path, line_no, f"bad label {parts[0]!r}")
        entries = []
        for tok in parts[1:]:
            idx, _, val = tok.partition(":")
            try:
                j = int(idx)
                v = float(val)
            except ValueError:
                raise _parse_error(path, line_no, f"bad feature entry {tok!r}")
            if j < 1:
                raise _parse_error(path, line_no, f"feature index {j} < 1")
            entries.append((j, v))
            width = max(width, j)
        rows.append(entries)
    if not rows:
        raise _parse_error(path, 1, "no data rows")
    features = np.zeros((len(rows), width), dtype=np.float64)
    for i, entries in enumerate(rows):
        for j, v in entries:
            features[i, j - 1] = v
    return Dataset(features, np.array(labels))


def _load_csv(path, text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise _parse_error(path, 1, "no data rows")
    header = [h.strip() for h in header]
    if "label" not in header:
        raise _parse_error(path, 1, 'no column named "label"')
    label_col = header.index("label")
    rows = []
    labels = []
    for line_no, rec in enumerate(reader, start=2):
        if not rec or (len(rec) == 1 and not rec[0].strip()):
            continue
        if len(rec) != len(header):
            raise _parse_error(path, line_no,
                               f"expected {len(header)} fields, got {len(rec)}")
        try:
            vals = [float(v) for v in rec]
        except ValueError:
            raise _parse_error(path, line_no, "non-numeric field")
        labels.append(vals.pop(label_col))
        rows.append(vals)
    if not rows:
        raise _parse_error(path, 1, "no data rows")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels))


def load_dataset(path, fmt: str) -> Dataset:
    """Read a dense dataset from LIBSVM text or headered CSV."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "libsvm":
        return _load_libsvm(path, text)
    if fmt == "csv":
        return _load_csv(path, text)
    raise ValueError(f"unknown format {fmt!r}")


def save_dataset_csv(ds: Dataset, path) -> None:
    """Write label + feature columns; %.17g keeps the round trip exact."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["label"] + [f"f{j}" for j in range(ds.dim)]) + "\n")
        for i in range(ds.n):
            cells = [f"{ds.labels[i]:.17g}"]
            cells += [f"{v:.17g}" for v in ds.features[i]]
            fh.write(",".join(cells) + "\n")


def split_dataset(ds: Dataset, test_fraction: float, seed: int) -> Dataset:
    """Random train/test partition over all rows."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    if test_fraction == 0.0:
        return ds
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.n)
    n_test = int(round(test_fraction * ds.n))
    return replace(ds, test_idx=np.sort(perm[:n_test]),
                   train_idx=np.sort(perm[n_test:]))


def row_normalize(ds: Dataset) -> Dataset:
    """Scale the whole matrix by the inverse mean l2 norm of train rows."""
    norms = np.linalg.norm(ds.train_features, axis=1)
    mean = float(norms.mean()) if norms.size else 0.0
    if mean == 0.0:
        raise ValueError("cannot normalize: mean train row norm is zero")
    return replace(ds, features=ds.features / mean)


def random_fourier_features(ds: Dataset, out_dim: int, bandwidth: float,
                            seed: int, weights=None,
                            offsets=None) -> Dataset:
    """Gaussian-kernel feature map sqrt(2/D) cos(Wx + b).

    W has independent N(0, bandwidth^-2) entries and b is uniform on
    [0, 2pi), both drawn from the given seed; ``weights``/``offsets``
    override them for tests.
    """
    if out_dim < 1:
        raise ValueError("out_dim must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 1.0 / bandwidth, size=(out_dim, ds.dim))
    b = rng.uniform(0.0, 2.0 * np.pi, size=out_dim)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64).reshape(out_dim, ds.dim)
    if offsets is not None:
        b = np.asarray(offsets, dtype=np.float64).reshape(out_dim)
    z = math.sqrt(2.0 / out_dim) * np.cos(ds.features @ w.T + b)
    return replace(ds, features=z)


def append_affine_feature(ds: Dataset) -> Dataset:
    if ds.n == 0:
        raise ValueError("cannot append a feature to an empty dataset")
    ones = np.ones((ds.n, 1))
    return replace(ds, features=np.hstack([ds.features, ones]))


# ------------------------------------------------------- synthetic suite

def _conditioned_matrix(n: int, d: int, kappa: float, rng,
                        curvature_scale: float) -> tuple[np.ndarray, float]:
    """Matrix with ceil(L R^2 / mu) = kappa exactly, plus its exact mu.

    L is the loss curvature per unit weight times 1/n (uniform weights),
    so kappa reduces to curvature_scale * R^2 / lambda_min(A'A / n);
    the smallest singular value is rescaled to land the real ratio at
    kappa - 1/2, whose ceiling is kappa, and iterated because the max
    row norm moves slightly with it.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    g = rng.standard_normal((n, d))
    u, _ = np.linalg.qr(g)
    vt, _ = np.linalg.qr(rng.standard_normal((d, d)))
    sv = np.geomspace(1.0, 1.0 / math.sqrt(kappa), d)
    for _ in range(60):
        a = (u * sv) @ vt.T
        r_sq = float((a * a).sum(axis=1).max())
        target = math.sqrt(r_sq / (kappa - 0.5))
        if abs(sv[-1] - target) <= 1e-15 * target:
            break
        sv[-1] = target
    a = (u * sv) @ vt.T
    r_sq = float((a * a).sum(axis=1).max())
    mu = curvature_scale * sv[-1] ** 2
    ratio = curvature_scale * r_sq / mu
    if not kappa - 1.0 < ratio <= kappa:
        raise RuntimeError("conditioning fixed point did not settle")
    return a, mu


def synth_least_squares(n: int, d: int, kappa: float, seed: int,
                        noise: float = 0.1) -> tuple[Dataset, dict]:
    """Gaussian least-squares instance with exact condition number.

    Uniform weights 1/n; info carries the exact strong convexity
    mu = lambda_min(A'A)/n of the resulting objective.
    """
    rng = np.random.default_rng(seed)
    a, mu = _conditioned_matrix(n, d, kappa, rng, curvature_scale=1.0 / n)
    x_true = rng.standard_normal(d)
    labels = a @ x_true + noise * rng.standard_normal(n)
    info = {"mu": mu, "kappa": float(kappa), "loss": "squared",
            "explicit_l2": 0.0}
    return Dataset(a, labels), info


def synth_logistic(n: int, d: int, kappa: float, seed: int,
                   flip_noise: float = 0.5) -> tuple[Dataset, dict]:
    """Binary logistic instance, strong convexity supplied by a ridge.

    Rows are unit-scale Gaussian; the ridge gamma = L R^2 / (kappa - .5)
    makes the condition number exactly kappa with mu = gamma.
    """
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, d)) / math.sqrt(d)
    x_true = math.sqrt(d) * rng.standard_normal(d)
    margins = a @ x_true + flip_noise * rng.standard_normal(n)
    labels = np.where(margins >= 0.0, 1.0, -1.0)
    r_sq = float((a * a).sum(axis=1).max())
    gamma = (r_sq / (4.0 * n)) / (kappa - 0.5)
    info = {"mu": gamma, "kappa": float(kappa), "loss": "logistic",
            "explicit_l2": gamma}
    return Dataset(a, labels), info
