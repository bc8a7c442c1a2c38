"""MLP encoder and noise-injecting stochastic decoder.

Both nets are plain fully-connected stacks. The decoder concatenates fresh
standard-normal noise columns to every layer's input, which is what makes a
single latent code decode to a whole conditional distribution. Skip
connections add the output of layer j-skip_every to the pre-activation of
layer j (stride skip_every, only where the widths agree).

Two forward paths are provided: a plain numpy one for evaluation and a taped
one for training. They share the arithmetic order, so outputs agree bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, Tape, as_matrix

ACTIVATIONS = ("leaky_relu", "relu")
LEAKY_SLOPE = 0.01


@dataclass(frozen=True)
class Architecture:
    """Sizes shared by the encoder/decoder pair."""

    input_dim: int
    latent_dim: int
    depth: int = 4
    width: int = 128
    noise_per_layer: int = 16
    skip_every: int = 2
    activation: str = "leaky_relu"

    def __post_init__(self):
        if self.latent_dim > self.input_dim:
            raise ValueError(
                f"latent_dim {self.latent_dim} exceeds input_dim {self.input_dim}")
        if self.latent_dim < 0 or self.input_dim < 1:
            raise ValueError("dimensions must be positive (latent_dim may be 0)")
        if self.depth < 1 or self.width < 1:
            raise ValueError("depth and width must be >= 1")
        if self.noise_per_layer < 0:
            raise ValueError("noise_per_layer must be >= 0")
        if self.skip_every < 1:
            raise ValueError("skip_every must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    def layer_dims(self, role: str) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer; decoder fan_in includes noise columns."""
        if role == "encoder":
            outs = [self.width] * (self.depth - 1) + [self.latent_dim]
            ins = [self.input_dim] + outs[:-1]
            return list(zip(ins, outs))
        if role == "decoder":
            outs = [self.width] * (self.depth - 1) + [self.input_dim]
            ins = [self.latent_dim] + outs[:-1]
            return [(i + self.noise_per_layer, o) for i, o in zip(ins, outs)]
        raise ValueError(f"unknown role {role!r}")


@dataclass
class MlpParams:
    """Weights and biases for one net, plus the architecture they belong to."""

    arch: Architecture
    role: str  # "encoder" or "decoder"
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def copy(self) -> "MlpParams":
        return MlpParams(self.arch, self.role,
                         [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def flat_arrays(self) -> list[np.ndarray]:
        """Weight then bias for each layer, in layer order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_params(arch: Architecture, seed: int) -> tuple[MlpParams, MlpParams]:
    """Fresh (encoder, decoder) parameters, deterministic in the seed.

    Weights are uniform(-a, a) with a = sqrt(6 / fan_in); biases start at zero.
    """
    rng = np.random.default_rng(seed)
    pair = []
    for role in ("encoder", "decoder"):
        params = MlpParams(arch, role)
        for fan_in, fan_out in arch.layer_dims(role):
            a = np.sqrt(6.0 / fan_in)
            params.weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
            params.biases.append(np.zeros((1, fan_out)))
        pair.append(params)
    return pair[0], pair[1]


def _skip_source(j: int, skip_every: int) -> int | None:
    """Index of the layer whose output feeds layer j's pre-activation, if any."""
    if j >= skip_every and j % skip_every == 0:
        return j - skip_every
    return None


def forward(params: MlpParams, X: np.ndarray,
            noise: list[np.ndarray] | None = None) -> np.ndarray:
    """Plain numpy forward pass. ``noise`` holds one n-by-eta block per layer."""
    x = as_matrix(X)
    arch = params.arch
    depth = arch.depth
    eta = arch.noise_per_layer if params.role == "decoder" else 0
    outputs = []
    h = x
    for j in range(depth):
        inp = h
        if eta > 0:
            inp = np.concatenate([inp, noise[j]], axis=1)
        if inp.shape[1] != params.weights[j].shape[0]:
            raise ValueError(
                f"{params.role} layer {j}: input has {inp.shape[1]} columns, "
                f"weight expects {params.weights[j].shape[0]}")
        t = (inp @ params.weights[j]) + params.biases[j]
        src = _skip_source(j, arch.skip_every)
        if src is not None and outputs[src].shape[1] == t.shape[1]:
            t = t + outputs[src]
        if j < depth - 1:
            if arch.activation == "relu":
                t = np.maximum(t, 0.0)
            else:
                t = np.where(t > 0, t, LEAKY_SLOPE * t)
        outputs.append(t)
        h = t
    return h


def param_leaves(tape: Tape, params: MlpParams) -> list[tuple[Node, Node]]:
    """Record one (weight, bias) leaf pair per layer on the tape.

    Reusing the same leaves across several forward passes makes the tape
    accumulate each parameter's gradient in one place.
    """
    return [
        (tape.leaf(w, op=f"{params.role}_w{j}"), tape.leaf(b, op=f"{params.role}_b{j}"))
        for j, (w, b) in enumerate(zip(params.weights, params.biases))
    ]


def forward_tape(tape: Tape, params: MlpParams, x: Node,
                 noise: list[Node] | None = None,
                 leaves: list[tuple[Node, Node]] | None = None) -> Node:
    """Taped forward pass, mirroring ``forward`` op for op."""
    arch = params.arch
    depth = arch.depth
    eta = arch.noise_per_layer if params.role == "decoder" else 0
    if leaves is None:
        leaves = param_leaves(tape, params)
    outputs: list[Node] = []
    h = x
    for j in range(depth):
        inp = h
        if eta > 0:
            inp = tape.concat_cols(inp, noise[j])
        if inp.value.shape[1] != params.weights[j].shape[0]:
            raise ValueError(
                f"{params.role} layer {j}: input has {inp.value.shape[1]} columns, "
                f"weight expects {params.weights[j].shape[0]}")
        w, b = leaves[j]
        t = tape.add(tape.matmul(inp, w), b)
        src = _skip_source(j, arch.skip_every)
        if src is not None and outputs[src].value.shape[1] == t.value.shape[1]:
            t = tape.add(t, outputs[src])
        if j < depth - 1:
            t = tape.relu(t) if arch.activation == "relu" else tape.leaky_relu(t, LEAKY_SLOPE)
        outputs.append(t)
        h = t
    return h


def draw_layer_noise(arch: Architecture, n: int, rng: np.random.Generator
                     ) -> list[np.ndarray]:
    """One standard-normal noise block per decoder layer (empty list if eta=0)."""
    eta = arch.noise_per_layer
    if eta == 0:
        return [None] * arch.depth
    return [rng.standard_normal((n, eta)) for _ in range(arch.depth)]


def encode(enc: MlpParams, X: np.ndarray) -> np.ndarray:
    """Deterministic embedding, one latent row per input row."""
    X = as_matrix(X)
    if X.shape[1] != enc.arch.input_dim:
        raise ValueError(
            f"encode: X has {X.shape[1]} columns, architecture expects {enc.arch.input_dim}")
    return forward(enc, X)


def decode(dec: MlpParams, Ztilde: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One stochastic reconstruction per latent row (fresh noise every call)."""
    Zt = as_matrix(Ztilde)
    if Zt.shape[1] != dec.arch.latent_dim:
        raise ValueError(
            f"decode: Ztilde has {Zt.shape[1]} columns, architecture expects "
            f"{dec.arch.latent_dim}")
    return forward(dec, Zt, draw_layer_noise(dec.arch, Zt.shape[0], rng))
