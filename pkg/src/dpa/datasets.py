"""Synthetic data generators, preprocessing, and dataset file formats.

Binary dataset layout: header ``<4sHQQB`` = magic b"DPAD", format version,
n, p, labels flag; then n*p little-endian float64 row-major; then n int64
labels if flagged. CSV: one header row, one sample per line, optional final
integer column named "label".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

MAGIC = b"DPAD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHQQB")
SQRT_NEG_TOL = -1e-9
PREPROCESS_STEPS = ("center", "standardize", "sqrt")


@dataclass
class Dataset:
    name: str
    X: np.ndarray
    labels: np.ndarray | None = None
    preprocessing: list = field(default_factory=list)
    factors: np.ndarray | None = None  # generative factors, when synthetic

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.X.shape[0],):
                raise ValueError(
                    f"labels length {self.labels.shape} does not match n={self.n}")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def gen_disk(n: int, size: int = 32, seed: int = 0,
             radius_range: tuple[float, float] = (2.0, 6.0),
             margin_rule: str = "inside") -> Dataset:
    """Binary images of two filled disks, flattened row-major to p=size^2.

    Radii are uniform on radius_range and each center is uniform on
    [r, size - r] per axis, keeping the disk fully inside the frame. A pixel
    at row i, column j is lit when its center (j+0.5, i+0.5) lies inside
    either disk. The six generative factors per image are stored as
    ``factors`` columns (x1, y1, r1, x2, y2, r2).
    """
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    rmin, rmax = float(radius_range[0]), float(radius_range[1])
    if not 0.0 < rmin <= rmax < size / 2.0:
        raise ValueError(
            f"radius_range must satisfy 0 < rmin <= rmax < size/2, got {radius_range}")
    if margin_rule != "inside":
        raise ValueError(f"unknown margin_rule {margin_rule!r}")
    rng = np.random.default_rng(seed)
    # per image, per disk: radius then center x then center y
    r = rng.uniform(rmin, rmax, size=(n, 2))
    cx = r + rng.uniform(size=(n, 2)) * (size - 2.0 * r)
    cy = r + rng.uniform(size=(n, 2)) * (size - 2.0 * r)

    centers = np.arange(size) + 0.5
    px, py = np.meshgrid(centers, centers)  # px varies along columns
    px = px.ravel()
    py = py.ravel()
    X = np.zeros((n, size * size))
    for d in range(2):
        dist2 = (px[None, :] - cx[:, d, None]) ** 2 + (py[None, :] - cy[:, d, None]) ** 2
        X = np.maximum(X, (dist2 <= r[:, d, None] ** 2).astype(np.float64))
    factors = np.column_stack([cx[:, 0], cy[:, 0], r[:, 0],
                               cx[:, 1], cy[:, 1], r[:, 1]])
    return Dataset(name=f"disk{size}", X=X, factors=factors)


def gen_gaussian(n: int, mean, covariance, seed: int = 0) -> Dataset:
    """Multivariate normal sample; covariance must be symmetric PSD."""
    mean = np.asarray(mean, dtype=np.float64).ravel()
    cov = np.asarray(covariance, dtype=np.float64)
    p = mean.size
    if cov.shape != (p, p):
        raise ValueError(f"covariance shape {cov.shape} does not match mean length {p}")
    if np.max(np.abs(cov - cov.T)) > 1e-10:
        raise ValueError("covariance must be symmetric")
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        # PSD but singular: factor through the eigendecomposition instead,
        # so degenerate directions stay exactly degenerate
        w, V = np.linalg.eigh(cov)
        if w.min() < -1e-8 * max(1.0, w.max()):
            raise ValueError("covariance is not positive semi-definite") from None
        L = V * np.sqrt(np.maximum(w, 0.0))
    rng = np.random.default_rng(seed)
    X = mean + rng.standard_normal((n, p)) @ L.T
    return Dataset(name="gaussian", X=X)


# ---------------------------------------------------------------------------
# preprocessing
# ---------------------------------------------------------------------------


def _fit_step(kind: str, X: np.ndarray):
    if kind == "center":
        mu = X.mean(axis=0)
        return {"kind": "center", "mean": mu.tolist()}, X - mu
    if kind == "standardize":
        mu = X.mean(axis=0)
        sd = X.std(axis=0)
        sd = np.where(sd > 1e-12, sd, 1.0)
        return ({"kind": "standardize", "mean": mu.tolist(), "scale": sd.tolist()},
                (X - mu) / sd)
    if kind == "sqrt":
        low = X.min()
        if low < SQRT_NEG_TOL:
            raise ValueError(
                f"sqrt preprocessing needs non-negative data, found {low}")
        clamped = int(np.count_nonzero(X < 0))
        return {"kind": "sqrt", "clamped": clamped}, np.sqrt(np.maximum(X, 0.0))
    raise ValueError(f"unknown preprocessing step {kind!r}")


def apply_step(stats: dict, X: np.ndarray) -> np.ndarray:
    """Apply one fitted step to new data (no refitting)."""
    kind = stats.get("kind")
    if kind == "center":
        return X - np.asarray(stats["mean"])
    if kind == "standardize":
        return (X - np.asarray(stats["mean"])) / np.asarray(stats["scale"])
    if kind == "sqrt":
        low = X.min() if X.size else 0.0
        if low < SQRT_NEG_TOL:
            raise ValueError(f"sqrt preprocessing needs non-negative data, found {low}")
        return np.sqrt(np.maximum(X, 0.0))
    raise ValueError(f"unknown preprocessing step {kind!r}")


def invert_step(stats: dict, X: np.ndarray) -> np.ndarray:
    kind = stats.get("kind")
    if kind == "center":
        return X + np.asarray(stats["mean"])
    if kind == "standardize":
        return X * np.asarray(stats["scale"]) + np.asarray(stats["mean"])
    if kind == "sqrt":
        return X * X
    raise ValueError(f"unknown preprocessing step {kind!r}")


def preprocess(dataset: Dataset, steps) -> Dataset:
    """Fit and apply the listed steps in order; stats ride along on the result."""
    X = dataset.X
    fitted = list(dataset.preprocessing)
    for kind in steps:
        stats, X = _fit_step(kind, X)
        fitted.append(stats)
    return replace(dataset, X=X, preprocessing=fitted)


def apply_preprocessing(stats_list, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    for stats in stats_list:
        X = apply_step(stats, X)
    return X


def inverse_preprocess(dataset_or_stats, Xhat: np.ndarray) -> np.ndarray:
    """Undo recorded preprocessing, newest step first."""
    stats_list = getattr(dataset_or_stats, "preprocessing", dataset_or_stats)
    X = np.asarray(Xhat, dtype=np.float64)
    for stats in reversed(list(stats_list)):
        X = invert_step(stats, X)
    return X


# ---------------------------------------------------------------------------
# io
# ---------------------------------------------------------------------------


def save_dataset(dataset: Dataset, path) -> Path:
    """Write the binary format (factors and preprocessing are not persisted)."""
    path = Path(path)
    has_labels = dataset.labels is not None
    parts = [HEADER.pack(MAGIC, FORMAT_VERSION, dataset.n, dataset.p,
                         1 if has_labels else 0)]
    parts.append(np.ascontiguousarray(dataset.X, dtype="<f8").tobytes())
    if has_labels:
        parts.append(np.ascontiguousarray(dataset.labels, dtype="<i8").tobytes())
    path.write_bytes(b"".join(parts))
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise ValueError(f"{path}: bad magic (file too short)")
    magic, version, n, p, flag = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    need = HEADER.size + 8 * n * p + (8 * n if flag else 0)
    if len(raw) != need:
        raise ValueError(f"{path}: truncated payload ({len(raw)} of {need} bytes)")
    off = HEADER.size
    X = np.frombuffer(raw, dtype="<f8", count=n * p, offset=off).reshape(n, p)
    labels = None
    if flag:
        labels = np.frombuffer(raw, dtype="<i8", count=n, offset=off + 8 * n * p)
    return Dataset(name=path.stem, X=X.astype(np.float64),
                   labels=None if labels is None else labels.astype(np.int64))


def export_csv(dataset: Dataset, path) -> Path:
    path = Path(path)
    cols = [f"x{j}" for j in range(dataset.p)]
    if dataset.labels is not None:
        cols.append("label")
    lines = [",".join(cols)]
    for i in range(dataset.n):
        vals = [repr(float(v)) for v in dataset.X[i]]
        if dataset.labels is not None:
            vals.append(str(int(dataset.labels[i])))
        lines.append(",".join(vals))
    path.write_text("\n".join(lines) + "\n")
    return path


def import_csv(path) -> Dataset:
    path = Path(path)
    lines = path.read_text().strip().split("\n")
    if not lines or not lines[0]:
        raise ValueError(f"{path}: empty CSV")
    header = [h.strip() for h in lines[0].split(",")]
    has_labels = header and header[-1] == "label"
    ncol = len(header)
    rows = []
    labels = []
    for i, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != ncol:
            raise ValueError(f"{path}: row {i} has {len(cells)} cells, expected {ncol}")
        vals = []
        for j, cell in enumerate(cells[:-1] if has_labels else cells):
            try:
                vals.append(float(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric value {cell.strip()!r} at row {i}, "
                    f"column {j}") from None
        if has_labels:
            cell = cells[-1].strip()
            try:
                labels.append(int(cell))
            except ValueError:
                raise ValueError(
                    f"{path}: non-integer label {cell!r} at row {i}, "
                    f"column {ncol - 1}") from None
        rows.append(vals)
    X = np.array(rows, dtype=np.float64).reshape(len(rows), ncol - (1 if has_labels else 0))
    return Dataset(name=path.stem, X=X,
                   labels=np.array(labels, dtype=np.int64) if has_labels else None)


def split(dataset: Dataset, test_fraction: float, seed: int = 0
          ) -> tuple[Dataset, Dataset]:
    """Disjoint shuffled train/test split, deterministic in the seed."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = dataset.n
    n_test = min(n - 1, max(1, int(round(n * test_fraction))))
    perm = np.random.default_rng(seed).permutation(n)
    te, tr = perm[:n_test], perm[n_test:]

    def take(idx, suffix):
        return Dataset(name=dataset.name + suffix, X=dataset.X[idx],
                       labels=None if dataset.labels is None else dataset.labels[idx],
                       preprocessing=list(dataset.preprocessing),
                       factors=None if dataset.factors is None else dataset.factors[idx])

    return take(tr, "-train"), take(te, "-test")
