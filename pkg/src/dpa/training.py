"""Minibatch Adam training loop for the energy-score objective.

One gradient step per minibatch: build the loss graph on a fresh tape, run
the backward sweep, and apply a bias-corrected Adam update to every weight
and bias. All randomness (shuffling, latent fills, decoder noise) is keyed
off the config seed, so a run is reproducible bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .model import DpaModel
from .networks import Architecture, init_params
from .objective import LatentSchedule, build_ae_loss, build_dpa_loss

SHUFFLE_STREAM = 0
NOISE_STREAM = 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    schedule: LatentSchedule
    batch_size: int = 512
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    beta: float = 1.0
    m: int = 2

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")


@dataclass
class TrainHistory:
    """Per-epoch averages of the total and per-k losses, plus wall time."""

    k_values: tuple[int, ...]
    total: list[float] = field(default_factory=list)
    per_k: dict[int, list[float]] = field(default_factory=dict)
    seconds: list[float] = field(default_factory=list)

    def __post_init__(self):
        for k in self.k_values:
            self.per_k.setdefault(k, [])

    def append(self, total: float, per_k: dict[int, float], secs: float) -> None:
        self.total.append(total)
        for k in self.k_values:
            self.per_k[k].append(per_k[k])
        self.seconds.append(secs)

    def write_csv(self, path) -> None:
        cols = ["epoch", "total"] + [f"k{k}" for k in self.k_values]
        lines = [",".join(cols)]
        for e, t in enumerate(self.total):
            row = [str(e), repr(float(t))] + [
                repr(float(self.per_k[k][e])) for k in self.k_values]
            lines.append(",".join(row))
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class AdamState:
    step: int
    m1: list[np.ndarray]
    m2: list[np.ndarray]


def adam_init(arrays) -> AdamState:
    return AdamState(0, [np.zeros_like(a) for a in arrays],
                     [np.zeros_like(a) for a in arrays])


def adam_step(arrays, grads, state: AdamState, cfg: TrainConfig) -> AdamState:
    """One in-place Adam update over a flat list of parameter arrays."""
    if len(arrays) != len(grads) or len(arrays) != len(state.m1):
        raise ValueError("adam_step: parameter/gradient/state lengths disagree")
    b1, b2, eps = cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
    state.step += 1
    t = state.step
    for a, g, m1, m2 in zip(arrays, grads, state.m1, state.m2):
        if a.shape != g.shape:
            raise ValueError(f"adam_step: shape mismatch {a.shape} vs {g.shape}")
        m1 *= b1
        m1 += (1.0 - b1) * g
        m2 *= b2
        m2 += (1.0 - b2) * (g * g)
        mhat = m1 / (1.0 - b1 ** t)
        vhat = m2 / (1.0 - b2 ** t)
        a -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
    return state


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def train(data, arch: Architecture, cfg: TrainConfig, kind: str = "dpa",
          init=None, on_epoch=None) -> tuple[DpaModel, TrainHistory]:
    """Fit a model of the given kind ("dpa" or "ae") and return it + history.

    ``data`` is an n-by-p array (or anything with an ``.X`` attribute).
    ``on_epoch(epoch, total, per_k)`` is called after each epoch if given.
    """
    X = np.asarray(getattr(data, "X", data), dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training data must be a non-empty n-by-p matrix")
    if X.shape[1] != arch.input_dim:
        raise ValueError(
            f"data has {X.shape[1]} columns but architecture expects {arch.input_dim}")
    if kind not in ("dpa", "ae"):
        raise ValueError(f"unknown model kind {kind!r}")
    if kind == "ae" and arch.noise_per_layer != 0:
        raise ValueError("ordered-AE training requires noise_per_layer=0")

    enc, dec = init_params(arch, cfg.seed) if init is None else init
    params = enc.flat_arrays() + dec.flat_arrays()
    state = adam_init(params)
    history = TrainHistory(tuple(cfg.schedule.k_values))
    n = X.shape[0]
    guard_streak = 0
    initial_total = None

    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        order = _stream(cfg.seed, SHUFFLE_STREAM, epoch).permutation(n)
        ep_total = 0.0
        ep_per_k = {k: 0.0 for k in cfg.schedule.k_values}
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            Xb = X[idx]
            tape = Tape()
            noise_rng = _stream(cfg.seed, NOISE_STREAM, epoch, b)
            if kind == "dpa":
                total, per_k, enc_leaves, dec_leaves = build_dpa_loss(
                    tape, enc, dec, Xb, cfg.schedule, cfg.beta, cfg.m, noise_rng)
            else:
                total, per_k, enc_leaves, dec_leaves = build_ae_loss(
                    tape, enc, dec, Xb, cfg.schedule)
            val = float(total.value[0, 0])
            if not np.isfinite(val):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, batch {b}")
            tape.backward(total)
            grads = [node.grad for pair in enc_leaves + dec_leaves for node in pair]
            adam_step(params, grads, state, cfg)
            w = len(idx) / n
            ep_total += w * val
            for k, node in per_k.items():
                ep_per_k[k] += w * float(node.value[0, 0])
        history.append(ep_total, ep_per_k, time.perf_counter() - tic)
        if on_epoch is not None:
            on_epoch(epoch, ep_total, ep_per_k)
        if initial_total is None:
            initial_total = ep_total
        elif ep_total > 10.0 * initial_total:
            guard_streak += 1
            if guard_streak >= 5:
                raise RuntimeError(
                    f"training diverged: loss above 10x its initial value for 5 "
                    f"consecutive epochs (epoch {epoch})")
        else:
            guard_streak = 0

    model = DpaModel(enc, dec, cfg.schedule, cfg.beta, cfg.seed, {}, kind)
    return model, history
