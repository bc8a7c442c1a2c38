"""Distributional evaluation metrics over trained models and raw samples.

All norms here are plain Euclidean distances (exponent 1), regardless of the
beta used in training. Conditional metrics compare each sample with its own
reconstruction draws; unconditional ones compare whole samples as sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import DpaModel, draw_reconstructions

MAX_PAIRS_DEFAULT = 2_000_000
CSV_HEADER = "k,cond_energy,cond_mse,uncond_ed,marg_w1,n_eval,n_draws"
_CHUNK_ENTRIES = 4_000_000  # cap on rows*cols touched per distance block


def _check_k_range(model: DpaModel, k: int) -> None:
    kmax = model.schedule.max_k
    if not 0 <= k <= kmax:
        raise ValueError(f"k={k} outside trained range 0..{kmax}")


def energy_score_terms(X: np.ndarray, Y1: np.ndarray, Y2: np.ndarray) -> np.ndarray:
    """Per-sample two-draw energy score (||X-Y||/2 terms symmetrised)."""
    d1 = np.linalg.norm(X - Y1, axis=1)
    d2 = np.linalg.norm(X - Y2, axis=1)
    spread = np.linalg.norm(Y1 - Y2, axis=1)
    return 0.5 * (d1 + d2) - 0.5 * spread


def conditional_energy_loss(model: DpaModel, X: np.ndarray, k: int,
                            rng: np.random.Generator) -> float:
    """Two-draw estimate of E[||X - Y|| - ||Y - Y'||/2] at latent level k."""
    _check_k_range(model, k)
    X = np.asarray(X, dtype=np.float64)
    draws = draw_reconstructions(model, X, k, 2, rng)
    return float(np.mean(energy_score_terms(X, draws[0], draws[1])))


@dataclass
class CondMse:
    single_draw: float
    mean_of_draws: float


def conditional_mse(model: DpaModel, X: np.ndarray, k: int, n_draws: int,
                    rng: np.random.Generator) -> CondMse:
    """Squared reconstruction error, per draw and for the averaged draw."""
    _check_k_range(model, k)
    if n_draws < 1:
        raise ValueError(f"n_draws must be >= 1, got {n_draws}")
    X = np.asarray(X, dtype=np.float64)
    draws = draw_reconstructions(model, X, k, n_draws, rng)
    per_draw = [float(np.mean(np.sum((X - d) ** 2, axis=1))) for d in draws]
    avg = draws.mean(axis=0)
    return CondMse(single_draw=float(np.mean(per_draw)),
                   mean_of_draws=float(np.mean(np.sum((X - avg) ** 2, axis=1))))


def _pair_distance_sum(A: np.ndarray, B: np.ndarray, idx_a: np.ndarray,
                       idx_b: np.ndarray) -> float:
    """Order-invariant exact sum of ||A[i] - B[j]|| over the given pairs."""
    parts: list[float] = []
    step = max(1, _CHUNK_ENTRIES // max(1, A.shape[1]))
    for lo in range(0, idx_a.size, step):
        ai = A[idx_a[lo:lo + step]]
        bj = B[idx_b[lo:lo + step]]
        sq = np.sum(ai * ai, axis=1) + np.sum(bj * bj, axis=1) \
            - 2.0 * np.einsum("ij,ij->i", ai, bj)
        parts.extend(np.sqrt(np.maximum(sq, 0.0)).tolist())
    return math.fsum(parts)


def _within_pairs(n: int, cap: int, rng: np.random.Generator):
    total = n * (n - 1) // 2
    if total <= cap:
        iu = np.triu_indices(n, k=1)
        return iu[0], iu[1], total
    ii = np.empty(0, dtype=np.int64)
    jj = np.empty(0, dtype=np.int64)
    while ii.size < cap:
        need = cap - ii.size
        a = rng.integers(0, n, size=int(need * 1.1) + 8)
        b = rng.integers(0, n, size=a.size)
        keep = a != b
        ii = np.concatenate([ii, a[keep]])
        jj = np.concatenate([jj, b[keep]])
    return ii[:cap], jj[:cap], cap


def _cross_pairs(na: int, nb: int, cap: int, rng: np.random.Generator):
    # identical-size inputs skip the aligned diagonal so that comparing a
    # sample with itself scores exactly zero
    skip_diag = na == nb
    total = na * nb - (na if skip_diag else 0)
    if total <= cap:
        ii, jj = np.divmod(np.arange(na * nb, dtype=np.int64), nb)
        if skip_diag:
            keep = ii != jj
            ii, jj = ii[keep], jj[keep]
        return ii, jj, total
    ii = np.empty(0, dtype=np.int64)
    jj = np.empty(0, dtype=np.int64)
    while ii.size < cap:
        need = cap - ii.size
        a = rng.integers(0, na, size=int(need * 1.1) + 8)
        b = rng.integers(0, nb, size=a.size)
        if skip_diag:
            keep = a != b
            a, b = a[keep], b[keep]
        ii = np.concatenate([ii, a])
        jj = np.concatenate([jj, b])
    return ii[:cap], jj[:cap], cap


def unconditional_energy_distance(A: np.ndarray, B: np.ndarray,
                                  max_pairs: int = MAX_PAIRS_DEFAULT,
                                  rng: np.random.Generator | None = None) -> float:
    """Energy distance E||X-Y|| - E||X-X'||/2 - E||Y-Y'||/2 between samples.

    Distinct-pair U-statistic; groups larger than max_pairs are uniformly
    subsampled with ``rng``. Below the cap the result is exactly symmetric
    in (A, B), and exactly zero when A and B hold the same rows.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts disagree: {A.shape} vs {B.shape}")
    if A.shape[0] < 2 or B.shape[0] < 2:
        raise ValueError("each sample needs at least 2 rows")
    if rng is None:
        rng = np.random.default_rng(0)
    ia, ja, ca = _within_pairs(A.shape[0], max_pairs, rng)
    s_aa = _pair_distance_sum(A, A, ia, ja) / ca
    ib, jb, cb = _within_pairs(B.shape[0], max_pairs, rng)
    s_bb = _pair_distance_sum(B, B, ib, jb) / cb
    ic, jc, cc = _cross_pairs(A.shape[0], B.shape[0], max_pairs, rng)
    s_ab = _pair_distance_sum(A, B, ic, jc) / cc
    return s_ab - 0.5 * s_aa - 0.5 * s_bb


def marginal_wasserstein1(A: np.ndarray, B: np.ndarray,
                          rng: np.random.Generator | None = None) -> float:
    """Mean over columns of the 1-D W1 distance between empirical marginals.

    Unequal row counts are evened out by subsampling the larger set without
    replacement.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"column counts disagree: {A.shape} vs {B.shape}")
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("empty sample")
    if A.shape[0] != B.shape[0]:
        if rng is None:
            rng = np.random.default_rng(0)
        n = min(A.shape[0], B.shape[0])
        if A.shape[0] > n:
            A = A[rng.choice(A.shape[0], size=n, replace=False)]
        else:
            B = B[rng.choice(B.shape[0], size=n, replace=False)]
    sa = np.sort(A, axis=0)
    sb = np.sort(B, axis=0)
    return float(np.mean(np.abs(sa - sb)))


def knn_accuracy(Z_train: np.ndarray, y_train, Z_test: np.ndarray, y_test,
                 neighbors: int = 5) -> float:
    """Brute-force Euclidean k-nearest-neighbour classification accuracy.

    Neighbour ties resolve to the lower training index, vote ties to the
    smaller class label.
    """
    Z_train = np.atleast_2d(np.asarray(Z_train, dtype=np.float64))
    Z_test = np.atleast_2d(np.asarray(Z_test, dtype=np.float64))
    y_train = np.asarray(y_train, dtype=np.int64)
    y_test = np.asarray(y_test, dtype=np.int64)
    if Z_train.shape[0] == 0:
        raise ValueError("empty training set")
    if neighbors < 1:
        raise ValueError("neighbors must be >= 1")
    k = min(neighbors, Z_train.shape[0])
    correct = 0
    step = max(1, _CHUNK_ENTRIES // max(1, Z_train.shape[0]))
    tr_sq = np.sum(Z_train * Z_train, axis=1)
    for lo in range(0, Z_test.shape[0], step):
        zt = Z_test[lo:lo + step]
        sq = tr_sq[None, :] + np.sum(zt * zt, axis=1)[:, None] - 2.0 * zt @ Z_train.T
        # stable sort keeps lower train indices first among exact ties
        near = np.argsort(sq, axis=1, kind="stable")[:, :k]
        for row, truth in zip(near, y_test[lo:lo + step]):
            votes = np.bincount(y_train[row])
            if int(np.argmax(votes)) == truth:
                correct += 1
    return correct / Z_test.shape[0]


def qq_table(samples_true, samples_fit, n_quantiles: int) -> np.ndarray:
    """Columns (level, quantile of true, quantile of fit) at n_quantiles levels.

    Levels are i/(n_quantiles+1) for i = 1..n_quantiles; quantiles use linear
    interpolation.
    """
    if n_quantiles < 2:
        raise ValueError("n_quantiles must be >= 2")
    a = np.asarray(samples_true, dtype=np.float64).ravel()
    b = np.asarray(samples_fit, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("empty sample")
    levels = np.arange(1, n_quantiles + 1) / (n_quantiles + 1)
    return np.column_stack([levels, np.quantile(a, levels), np.quantile(b, levels)])


# ---------------------------------------------------------------------------
# per-k report
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    k: int
    cond_energy: float
    cond_mse: float
    uncond_ed: float
    marg_w1: float
    n_eval: int
    n_draws: int


def evaluate_model(model: DpaModel, X: np.ndarray, ks, n_draws: int,
                   rng: np.random.Generator,
                   max_pairs: int = MAX_PAIRS_DEFAULT) -> list[MetricReport]:
    """One MetricReport per k. Unconditional metrics compare X against a
    single fresh reconstruction per sample; cond_mse stores the single-draw
    value (the averaged-draw variant is available via conditional_mse)."""
    X = np.asarray(X, dtype=np.float64)
    reports = []
    for k in ks:
        _check_k_range(model, k)
        ce = conditional_energy_loss(model, X, k, rng)
        cm = conditional_mse(model, X, k, n_draws, rng)
        recon = draw_reconstructions(model, X, k, 1, rng)[0]
        ed = unconditional_energy_distance(X, recon, max_pairs, rng)
        w1 = marginal_wasserstein1(X, recon, rng)
        reports.append(MetricReport(int(k), ce, cm.single_draw, ed, w1,
                                    X.shape[0], n_draws))
    return reports


def write_report_csv(reports: list[MetricReport], path) -> None:
    lines = [CSV_HEADER]
    for r in reports:
        lines.append(f"{r.k},{float(r.cond_energy)!r},{float(r.cond_mse)!r},"
                     f"{float(r.uncond_ed)!r},{float(r.marg_w1)!r},"
                     f"{r.n_eval},{r.n_draws}")
    Path(path).write_text("\n".join(lines) + "\n")
