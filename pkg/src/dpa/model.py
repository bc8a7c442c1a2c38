"""Trained-model container and the json+bin checkpoint format.

A checkpoint is a directory holding ``model.json`` (architecture sizes, the
latent schedule, loss settings, seed, preprocessing metadata) and
``model.bin`` (every parameter matrix, row-major little-endian float64,
encoder layers first then decoder layers, weight before bias within a layer).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .networks import Architecture, MlpParams, decode, encode, forward, init_params
from .objective import LatentSchedule, mask_latent

BIN_DTYPE = "<f8"  # little-endian float64 everywhere on disk
FORMAT_VERSION = 1


@dataclass
class DpaModel:
    """Encoder/decoder pair plus everything needed to reuse it later.

    ``kind`` is "dpa" for the stochastic model (noise-filled masking) and
    "ae" for the deterministic ordered autoencoder (zero-filled masking).
    """

    enc: MlpParams
    dec: MlpParams
    schedule: LatentSchedule
    beta: float
    seed: int
    preprocessing: dict = field(default_factory=dict)
    kind: str = "dpa"

    @property
    def arch(self) -> Architecture:
        return self.enc.arch

    def embed(self, X: np.ndarray) -> np.ndarray:
        return encode(self.enc, X)


def fresh_model(arch: Architecture, schedule: LatentSchedule, beta: float,
                seed: int, preprocessing: dict | None = None,
                kind: str = "dpa") -> DpaModel:
    enc, dec = init_params(arch, seed)
    return DpaModel(enc, dec, schedule, beta, seed, preprocessing or {}, kind)


def zero_fill_latent(Z: np.ndarray, k: int) -> np.ndarray:
    """Keep the first k latent columns and zero the rest (ordered-AE masking)."""
    n, K = Z.shape
    if not 0 <= k <= K:
        raise ValueError(f"k={k} outside [0, {K}]")
    out = np.zeros_like(Z)
    out[:, :k] = Z[:, :k]
    return out


def draw_reconstructions(model: DpaModel, X: np.ndarray, k: int, n_draws: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Sample reconstructions at latent level k; shape (n_draws, n, p).

    For the "dpa" kind each draw refreshes both the latent fill and the
    decoder's per-layer noise; for "ae" the draws are all identical.
    """
    Z = encode(model.enc, X)
    out = np.empty((n_draws, X.shape[0], model.arch.input_dim))
    for i in range(n_draws):
        if model.kind == "ae":
            zt = zero_fill_latent(Z, k)
            out[i] = forward(model.dec, zt)
        else:
            zt = mask_latent(Z, k, rng)
            out[i] = decode(model.dec, zt, rng)
    return out


# ---------------------------------------------------------------------------
# checkpoint io
# ---------------------------------------------------------------------------


def _pack_arrays(arrays) -> bytes:
    chunks = [np.ascontiguousarray(a, dtype=BIN_DTYPE).tobytes() for a in arrays]
    return b"".join(chunks)


def _unpack_arrays(raw: bytes, shapes) -> list[np.ndarray]:
    flat = np.frombuffer(raw, dtype=BIN_DTYPE)
    need = sum(int(np.prod(s)) for s in shapes)
    if flat.size != need:
        raise ValueError(f"model.bin holds {flat.size} values, expected {need}")
    out = []
    pos = 0
    for s in shapes:
        cnt = int(np.prod(s))
        out.append(flat[pos:pos + cnt].reshape(s).astype(np.float64))
        pos += cnt
    return out


def _mlp_shapes(arch: Architecture) -> list[tuple[int, ...]]:
    shapes = []
    for role in ("encoder", "decoder"):
        for fan_in, fan_out in arch.layer_dims(role):
            shapes.append((fan_in, fan_out))
            shapes.append((1, fan_out))
    return shapes


def save_model(model, directory) -> Path:
    """Write model.json + model.bin into ``directory`` (created if missing)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    kind = getattr(model, "kind", "pca")
    if kind == "pca":
        meta, arrays = model.checkpoint_payload()
    else:
        arch = model.arch
        meta = {
            "format_version": FORMAT_VERSION,
            "kind": model.kind,
            "arch": {
                "input_dim": arch.input_dim,
                "latent_dim": arch.latent_dim,
                "depth": arch.depth,
                "width": arch.width,
                "noise_per_layer": arch.noise_per_layer,
                "skip_every": arch.skip_every,
                "activation": arch.activation,
            },
            "k_values": list(model.schedule.k_values),
            "k_weights": list(model.schedule.weights),
            "beta": model.beta,
            "seed": model.seed,
            "preprocessing": model.preprocessing,
        }
        arrays = model.enc.flat_arrays() + model.dec.flat_arrays()
    (directory / "model.json").write_text(json.dumps(meta, indent=2) + "\n")
    (directory / "model.bin").write_bytes(_pack_arrays(arrays))
    return directory


def load_model(directory):
    """Read a checkpoint directory back into a DpaModel or PcaModel."""
    directory = Path(directory)
    meta_path = directory / "model.json"
    bin_path = directory / "model.bin"
    if not meta_path.exists() or not bin_path.exists():
        raise FileNotFoundError(f"no checkpoint at {directory}")
    meta = json.loads(meta_path.read_text())
    kind = meta.get("kind", "dpa")
    raw = bin_path.read_bytes()
    if kind == "pca":
        from .baselines import pca_from_checkpoint

        return pca_from_checkpoint(meta, raw)
    arch = Architecture(**meta["arch"])
    shapes = _mlp_shapes(arch)
    arrays = _unpack_arrays(raw, shapes)
    per_net = 2 * arch.depth
    enc = MlpParams(arch, "encoder", arrays[0:per_net:2], arrays[1:per_net:2])
    dec = MlpParams(arch, "decoder", arrays[per_net::2], arrays[per_net + 1::2])
    schedule = LatentSchedule(tuple(meta["k_values"]), tuple(meta["k_weights"]))
    return DpaModel(enc, dec, schedule, float(meta["beta"]), int(meta["seed"]),
                    meta.get("preprocessing", {}), kind)
