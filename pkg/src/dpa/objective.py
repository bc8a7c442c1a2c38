"""The training objective: nested latent masking plus a per-k energy loss.

For each retained dimension count k, the latent code keeps its first k
columns and fills the rest with standard normal noise, and the decoder draws
m reconstructions per sample. The per-k loss is the sample energy score

    (1/m) sum_j ||X - Xhat_j||^beta
        - (1/(2 m (m-1))) sum_{j != j'} ||Xhat_j - Xhat_j'||^beta

averaged over the batch, which is minimised exactly when the reconstruction
draws match the conditional law of X given the kept latents. The full
objective is a weighted average of the per-k losses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, Tape
from .networks import MlpParams, forward_tape, param_leaves

WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class LatentSchedule:
    """Which latent sizes to train on, and how much each one counts."""

    k_values: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        ws = tuple(float(w) for w in self.weights)
        object.__setattr__(self, "k_values", ks)
        object.__setattr__(self, "weights", ws)
        if len(ks) == 0:
            raise ValueError("schedule needs at least one k")
        if len(ks) != len(set(ks)):
            raise ValueError(f"duplicate k values in {ks}")
        if any(k < 0 for k in ks):
            raise ValueError(f"negative k in {ks}")
        if len(ws) != len(ks):
            raise ValueError("one weight per k required")
        if any(not 0.0 <= w <= 1.0 for w in ws):
            raise ValueError(f"weights must lie in [0, 1], got {ws}")
        if abs(sum(ws) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(ws)!r}")

    @classmethod
    def uniform(cls, k_values) -> "LatentSchedule":
        ks = tuple(int(k) for k in k_values)
        return cls(ks, tuple(1.0 / len(ks) for _ in ks))

    def weight_of(self, k: int) -> float:
        return self.weights[self.k_values.index(k)]

    @property
    def max_k(self) -> int:
        return max(self.k_values)


@dataclass
class LossReport:
    """Per-k losses and their schedule-weighted total."""

    per_k: dict[int, float] = field(default_factory=dict)
    total: float = 0.0


def mask_latent(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Keep the first k latent columns, refill the rest with N(0,1) draws."""
    Z = np.asarray(Z, dtype=np.float64)
    n, K = Z.shape
    if not 0 <= k <= K:
        raise ValueError(f"k={k} outside [0, {K}]")
    if k == K:
        return Z.copy()
    out = np.empty_like(Z)
    out[:, :k] = Z[:, :k]
    out[:, k:] = rng.standard_normal((n, K - k))
    return out


def _check_loss_args(beta: float, m: int) -> None:
    if not 0.0 < beta < 2.0:
        raise ValueError(f"beta must be in (0, 2), got {beta}")
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")


def masked_latent_node(tape: Tape, z: Node, k: int, rng: np.random.Generator) -> Node:
    """Taped version of mask_latent; the noise fill enters as a fresh leaf."""
    K = z.value.shape[1]
    if not 0 <= k <= K:
        raise ValueError(f"k={k} outside [0, {K}]")
    if k == K:
        return z
    fill = tape.leaf(rng.standard_normal((z.value.shape[0], K - k)), op="latent_fill")
    if k == 0:
        return fill
    return tape.concat_cols(tape.slice_cols(z, 0, k), fill)


def energy_loss_node(tape: Tape, dec: MlpParams, x: Node, z: Node, k: int,
                     beta: float, m: int, rng: np.random.Generator,
                     dec_leaves=None) -> Node:
    """Build the per-k loss as a differentiable node.

    Per sample and draw j, the latent fill is sampled first and the per-layer
    decoder noise after it, so a single rng stream fixes everything.
    """
    _check_loss_args(beta, m)
    n = x.value.shape[0]
    arch = dec.arch
    if dec_leaves is None:
        dec_leaves = param_leaves(tape, dec)
    draws = []
    for _ in range(m):
        zt = masked_latent_node(tape, z, k, rng)
        noise = None
        if arch.noise_per_layer > 0:
            noise = [tape.leaf(rng.standard_normal((n, arch.noise_per_layer)),
                               op="layer_noise") for _ in range(arch.depth)]
        draws.append(forward_tape(tape, dec, zt, noise, leaves=dec_leaves))

    acc = None
    for xhat in draws:
        term = tape.row_norm_pow(tape.sub(x, xhat), beta)
        acc = term if acc is None else tape.add(acc, term)
    loss = tape.scale(acc, 1.0 / m)

    spread = None
    for j in range(m):
        for j2 in range(j + 1, m):
            term = tape.row_norm_pow(tape.sub(draws[j], draws[j2]), beta)
            spread = term if spread is None else tape.add(spread, term)
    loss = tape.sub(loss, tape.scale(spread, 1.0 / (m * (m - 1))))
    return tape.mean_reduce(loss)


def energy_loss_k(enc: MlpParams, dec: MlpParams, X: np.ndarray, k: int,
                  beta: float, m: int, rng: np.random.Generator) -> float:
    """Evaluate the per-k loss for one batch (no gradients retained)."""
    tape = Tape()
    x = tape.leaf(X)
    z = forward_tape(tape, enc, x)
    node = energy_loss_node(tape, dec, x, z, k, beta, m, rng)
    return float(node.value[0, 0])


def build_dpa_loss(tape: Tape, enc: MlpParams, dec: MlpParams, X: np.ndarray,
                   schedule: LatentSchedule, beta: float, m: int,
                   rng: np.random.Generator):
    """Assemble the full weighted loss graph for one batch.

    Returns (total node, per-k nodes, encoder leaves, decoder leaves). The
    rng is split into one child stream per k, assigned in ascending k order,
    so the result does not depend on the order k values are listed in.
    """
    _check_loss_args(beta, m)
    K = dec.arch.latent_dim
    if schedule.max_k > K:
        raise ValueError(f"schedule max k {schedule.max_k} exceeds latent_dim {K}")
    x = tape.leaf(X)
    enc_leaves = param_leaves(tape, enc)
    dec_leaves = param_leaves(tape, dec)
    z = forward_tape(tape, enc, x, leaves=enc_leaves)

    ordered = sorted(schedule.k_values)
    streams = dict(zip(ordered, rng.spawn(len(ordered))))
    per_k: dict[int, Node] = {}
    total = None
    for k in ordered:
        node = energy_loss_node(tape, dec, x, z, k, beta, m, streams[k],
                                dec_leaves=dec_leaves)
        per_k[k] = node
        weighted = tape.scale(node, schedule.weight_of(k))
        total = weighted if total is None else tape.add(total, weighted)
    return total, per_k, enc_leaves, dec_leaves


def dpa_loss(enc: MlpParams, dec: MlpParams, X: np.ndarray,
             schedule: LatentSchedule, beta: float, m: int,
             rng: np.random.Generator) -> LossReport:
    """Evaluate the weighted multi-k loss for one batch."""
    tape = Tape()
    total, per_k, _, _ = build_dpa_loss(tape, enc, dec, X, schedule, beta, m, rng)
    return LossReport(per_k={k: float(v.value[0, 0]) for k, v in per_k.items()},
                      total=float(total.value[0, 0]))


def build_ae_loss(tape: Tape, enc: MlpParams, dec: MlpParams, X: np.ndarray,
                  schedule: LatentSchedule):
    """Ordered-autoencoder loss graph: zero-filled masking, squared error.

    Per k the term is mean ||X - d(Z_1:k, zero fill)||^2; the decoder must be
    noise-free. Returns the same tuple layout as build_dpa_loss.
    """
    if dec.arch.noise_per_layer != 0:
        raise ValueError("ordered-AE loss needs a noise-free decoder (eta=0)")
    K = dec.arch.latent_dim
    if schedule.max_k > K:
        raise ValueError(f"schedule max k {schedule.max_k} exceeds latent_dim {K}")
    x = tape.leaf(X)
    enc_leaves = param_leaves(tape, enc)
    dec_leaves = param_leaves(tape, dec)
    z = forward_tape(tape, enc, x, leaves=enc_leaves)
    n = x.value.shape[0]
    per_k: dict[int, Node] = {}
    total = None
    for k in sorted(schedule.k_values):
        if k == K:
            zt = z
        else:
            fill = tape.leaf(np.zeros((n, K - k)), op="latent_fill")
            zt = fill if k == 0 else tape.concat_cols(tape.slice_cols(z, 0, k), fill)
        xhat = forward_tape(tape, dec, zt, leaves=dec_leaves)
        node = tape.mean_reduce(tape.row_norm_pow(tape.sub(x, xhat), 2.0))
        per_k[k] = node
        weighted = tape.scale(node, schedule.weight_of(k))
        total = weighted if total is None else tape.add(total, weighted)
    return total, per_k, enc_leaves, dec_leaves


def loss_terms(enc: MlpParams, dec: MlpParams, X: np.ndarray, k: int, beta: float,
               m: int, rng: np.random.Generator, fill: str = "noise"
               ) -> tuple[float, float]:
    """Diagnostic split of the per-k loss into its two terms (plain numpy).

    Returns (reconstruction term, spread term); the loss is their difference.
    Unlike the trainable loss, beta may be 2 and the latent fill may be
    "zeros", which together reproduce the ordered-AE objective.
    """
    if not 0.0 < beta <= 2.0:
        raise ValueError(f"beta must be in (0, 2], got {beta}")
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m}")
    if fill not in ("noise", "zeros"):
        raise ValueError(f"fill must be 'noise' or 'zeros', got {fill!r}")
    from .autodiff import row_norm_pow
    from .networks import draw_layer_noise, encode, forward

    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    Z = encode(enc, X)
    K = dec.arch.latent_dim
    draws = []
    for _ in range(m):
        if fill == "noise":
            zt = mask_latent(Z, k, rng)
        else:
            zt = np.concatenate([Z[:, :k], np.zeros((n, K - k))], axis=1)
        draws.append(forward(dec, zt, draw_layer_noise(dec.arch, n, rng)))
    term1 = float(np.mean(sum(row_norm_pow(X - d, beta) for d in draws))) / m
    spread = sum(row_norm_pow(draws[j] - draws[j2], beta)
                 for j in range(m) for j2 in range(j + 1, m))
    term2 = float(np.mean(spread)) / (m * (m - 1))
    return term1, term2
