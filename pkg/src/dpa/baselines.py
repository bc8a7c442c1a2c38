"""Linear baselines and closed-form references: PCA, the ordered autoencoder,
and the conditional-Gaussian machinery used as an exact oracle in tests.

For a Gaussian X ~ N(0, Sigma) and an orthonormal frame M, conditioning on
M^T X is available in closed form:

    E[X | M^T X]   = Sigma M (M^T Sigma M)^-1 M^T X
    Cov[X | M^T X] = G = Sigma - Sigma M (M^T Sigma M)^-1 M^T Sigma

tr(G) is the squared-error objective a rank-k linear summary leaves behind,
which is what PCA's leading eigenvectors minimise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-8
COND_LIMIT = 1e12


@dataclass
class PcaModel:
    """Sample mean, eigenbasis (columns, eigenvalue-descending), eigenvalues."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    preprocessing: dict = field(default_factory=dict)
    kind: str = "pca"

    @property
    def p(self) -> int:
        return self.components.shape[0]

    def checkpoint_payload(self):
        meta = {
            "format_version": 1,
            "kind": "pca",
            "p": self.p,
            "preprocessing": self.preprocessing,
        }
        return meta, [self.mean, self.components, self.eigenvalues]


def pca_from_checkpoint(meta: dict, raw: bytes) -> PcaModel:
    p = int(meta["p"])
    flat = np.frombuffer(raw, dtype="<f8")
    need = p + p * p + p
    if flat.size != need:
        raise ValueError(f"model.bin holds {flat.size} values, expected {need}")
    mean = flat[:p].astype(np.float64)
    comp = flat[p:p + p * p].reshape(p, p).astype(np.float64)
    eig = flat[p + p * p:].astype(np.float64)
    return PcaModel(mean, comp, eig, meta.get("preprocessing", {}))


def pca_fit(X: np.ndarray) -> PcaModel:
    """Eigendecomposition of the sample covariance (denominator n-1).

    Columns are ordered by descending eigenvalue (stable under ties) and
    signed so each column's largest-magnitude entry is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    n, p = X.shape
    if n < 2:
        raise ValueError(f"pca_fit needs at least 2 rows, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = (Xc.T @ Xc) / (n - 1)
    w, V = np.linalg.eigh(cov)
    order = np.argsort(-w, kind="stable")
    w = np.maximum(w[order], 0.0)
    V = V[:, order]
    for j in range(p):
        lead = np.argmax(np.abs(V[:, j]))
        if V[lead, j] < 0:
            V[:, j] = -V[:, j]
    return PcaModel(mean, V, w)


def _check_k(model: PcaModel, k: int) -> None:
    if not 0 <= k <= model.p:
        raise ValueError(f"k={k} outside [0, {model.p}]")


def pca_transform(model: PcaModel, X: np.ndarray, k: int) -> np.ndarray:
    _check_k(model, k)
    X = np.asarray(X, dtype=np.float64)
    return (X - model.mean) @ model.components[:, :k]


def pca_reconstruct(model: PcaModel, X: np.ndarray, k: int) -> np.ndarray:
    _check_k(model, k)
    Z = pca_transform(model, X, k)
    return model.mean + Z @ model.components[:, :k].T


def ordered_ae_train(data, arch, cfg):
    """Train the zero-fill nested autoencoder; returns (model, history)."""
    from .training import train

    return train(data, arch, cfg, kind="ae")


# ---------------------------------------------------------------------------
# closed-form conditional-Gaussian references
# ---------------------------------------------------------------------------


def _check_frame(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError(f"frame must be 2-D, got shape {M.shape}")
    k = M.shape[1]
    if k and np.max(np.abs(M.T @ M - np.eye(k))) > ORTHO_TOL:
        raise ValueError("frame columns are not orthonormal")
    return M


def _conditional_pieces(Sigma: np.ndarray, M: np.ndarray):
    Sigma = np.asarray(Sigma, dtype=np.float64)
    M = _check_frame(M)
    if Sigma.shape[0] != Sigma.shape[1] or Sigma.shape[0] != M.shape[0]:
        raise ValueError(f"shape mismatch: Sigma {Sigma.shape}, M {M.shape}")
    core = M.T @ Sigma @ M
    if core.size and np.linalg.cond(core) > COND_LIMIT:
        raise ValueError("M^T Sigma M is singular")
    SM = Sigma @ M
    # A = Sigma M (M^T Sigma M)^-1 M^T,  G = Sigma - A Sigma
    A = SM @ np.linalg.solve(core, M.T) if core.size else np.zeros_like(Sigma)
    G = Sigma - A @ Sigma
    return A, G


def objective_trace_G(M: np.ndarray, Sigma: np.ndarray) -> float:
    """Residual conditional variance tr(G) left by conditioning on M^T X."""
    _, G = _conditional_pieces(Sigma, M)
    return float(np.trace(G))


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric factor L with L L^T = A (eigenvalues clipped at zero)."""
    w, V = np.linalg.eigh(np.asarray(A, dtype=np.float64))
    return V * np.sqrt(np.maximum(w, 0.0))


@dataclass
class ConditionalGaussian:
    """Exact sampler for X | M^T X when X ~ N(0, Sigma)."""

    Sigma: np.ndarray
    M: np.ndarray
    mean_map: np.ndarray  # A with E[X | M^T X = M^T x] = A x
    cov: np.ndarray       # G
    _factor: np.ndarray

    def mean(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.mean_map.T

    def sample(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mu = self.mean(X)
        eps = rng.standard_normal(mu.shape)
        return mu + eps @ self._factor.T


def conditional_gaussian(Sigma: np.ndarray, M: np.ndarray) -> ConditionalGaussian:
    A, G = _conditional_pieces(Sigma, M)
    return ConditionalGaussian(np.asarray(Sigma, float), np.asarray(M, float),
                               A, G, psd_sqrt(G))


def random_frame(p: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random p-by-k orthonormal frame via QR of a Gaussian matrix."""
    if not 0 <= k <= p:
        raise ValueError(f"k={k} outside [0, {p}]")
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    Q = Q * np.sign(np.where(np.diag(R) == 0, 1.0, np.diag(R)))
    return Q[:, :k]
