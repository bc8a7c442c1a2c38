"""Command-line interface: data generation, training, evaluation, export.

One command per process.  Exit codes: 0 success, 2 usage or validation
problem, 3 numeric failure during training.  Every command that consumes
randomness takes a --seed and is bit-reproducible for a fixed seed.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .datasets import (Dataset, apply_preprocessing, gen_disk, gen_gaussian,
                       inverse_preprocess, load_dataset, preprocess,
                       save_dataset)
from .metrics import MAX_PAIRS_DEFAULT, evaluate_model, qq_table, write_report_csv
from .model import draw_reconstructions, load_model, save_model
from .networks import Architecture
from .objective import LatentSchedule
from .training import TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

MODEL_KINDS = ("dpa", "ordered-ae")

# config-file keys; None marks "required, no default"
CONFIG_DEFAULTS = {
    "model": None,
    "latent_dim": None,
    "k_values": None,
    "epochs": None,
    "k_weights": "uniform",
    "depth": 4,
    "width": 128,
    "noise_per_layer": "auto",  # 16 for dpa, 0 for ordered-ae
    "skip_every": 2,
    "activation": "leaky_relu",
    "batch_size": 512,
    "learning_rate": 1e-4,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "seed": 0,
    "beta": 1.0,
    "m": 2,
    "preprocessing": (),
}


# ---------------------------------------------------------------------------
# small helpers
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(c) for c in text.split(",")]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _parse_ints(text: str, flag: str) -> list[int]:
    try:
        return [int(c) for c in text.split(",")]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated integers, got {text!r}") from None


def _parse_matrix(text: str, flag: str) -> list[list[float]]:
    return [_parse_floats(row, flag) for row in text.split(";")]


def _prepare_file(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and not force:
        raise ValueError(f"{path} exists; pass --force to overwrite")
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _prepare_run_dir(path, force: bool) -> Path:
    path = Path(path)
    if path.exists() and any(path.iterdir()) and not force:
        raise ValueError(f"{path} is not empty; pass --force to overwrite")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def _stats_to_json(stats_list) -> list[dict]:
    out = []
    for st in stats_list:
        out.append({key: val.tolist() if isinstance(val, np.ndarray) else val
                    for key, val in st.items()})
    return out


def _stats_from_json(stats_list) -> list[dict]:
    out = []
    for st in stats_list:
        out.append({key: np.asarray(val, dtype=np.float64)
                    if isinstance(val, list) else val
                    for key, val in st.items()})
    return out


def _model_space(model, X: np.ndarray) -> np.ndarray:
    """Apply the preprocessing stored in a checkpoint to new data."""
    steps = _stats_from_json(model.preprocessing.get("steps", []))
    return apply_preprocessing(steps, X) if steps else X


def _data_space(model, Xhat: np.ndarray) -> np.ndarray:
    """Map model-space outputs back to the original data space."""
    steps = _stats_from_json(model.preprocessing.get("steps", []))
    return inverse_preprocess(steps, Xhat) if steps else Xhat


def _check_embed_k(model, k: int) -> None:
    kmax = model.arch.latent_dim
    if not 0 <= k <= kmax:
        raise ValueError(f"k={k} outside trained range 0..{kmax}")


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------


def load_run_config(path) -> dict:
    path = Path(path)
    raw = json.loads(path.read_text())
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_DEFAULTS))
    if unknown:
        raise ValueError(f"{path}: unknown config keys: {', '.join(unknown)}")
    missing = sorted(key for key, dflt in CONFIG_DEFAULTS.items()
                     if dflt is None and key not in raw)
    if missing:
        raise ValueError(f"{path}: missing required keys: {', '.join(missing)}")
    config = dict(CONFIG_DEFAULTS)
    config.update(raw)
    if config["model"] not in MODEL_KINDS:
        raise ValueError(f"model must be one of {MODEL_KINDS}, got {config['model']!r}")
    if config["noise_per_layer"] == "auto":
        config["noise_per_layer"] = 16 if config["model"] == "dpa" else 0
    if config["model"] == "ordered-ae" and config["noise_per_layer"] != 0:
        raise ValueError("ordered-ae is deterministic; set noise_per_layer to 0")
    config["preprocessing"] = list(config["preprocessing"])
    return config


def resolve_config(config: dict, input_dim: int):
    """Turn a validated config dict into constructed, self-checking pieces."""
    arch = Architecture(input_dim=input_dim,
                        latent_dim=int(config["latent_dim"]),
                        depth=int(config["depth"]),
                        width=int(config["width"]),
                        noise_per_layer=int(config["noise_per_layer"]),
                        skip_every=int(config["skip_every"]),
                        activation=config["activation"])
    ks = tuple(int(k) for k in config["k_values"])
    if config["k_weights"] == "uniform":
        schedule = LatentSchedule.uniform(ks)
    else:
        schedule = LatentSchedule(ks, tuple(float(w) for w in config["k_weights"]))
    if schedule.max_k > arch.latent_dim:
        raise ValueError(f"k_values go up to {schedule.max_k} but latent_dim "
                         f"is {arch.latent_dim}")
    cfg = TrainConfig(epochs=int(config["epochs"]), schedule=schedule,
                      batch_size=int(config["batch_size"]),
                      learning_rate=float(config["learning_rate"]),
                      adam_beta1=float(config["adam_beta1"]),
                      adam_beta2=float(config["adam_beta2"]),
                      adam_eps=float(config["adam_eps"]),
                      seed=int(config["seed"]), beta=float(config["beta"]),
                      m=int(config["m"]))
    return arch, schedule, cfg


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _cmd_generate(args) -> int:
    if args.kind == "disk":
        if args.mean is not None or args.cov is not None:
            raise ValueError("--mean/--cov only apply to --kind gaussian")
        ds = gen_disk(args.n, size=args.size, seed=args.seed,
                      radius_range=(args.radius_min, args.radius_max))
    else:
        if args.mean is None or args.cov is None:
            raise ValueError("--kind gaussian needs --mean and --cov")
        mean = _parse_floats(args.mean, "--mean")
        cov = _parse_matrix(args.cov, "--cov")
        ds = gen_gaussian(args.n, mean, cov, seed=args.seed)
    out = _prepare_file(args.out, args.force)
    save_dataset(ds, out)
    print(f"n={ds.n} p={ds.p} sha256={_sha256(out)}")
    return EXIT_OK


def _cmd_train(args) -> int:
    config = load_run_config(args.config)
    data = load_dataset(args.data)
    arch, schedule, cfg = resolve_config(config, data.p)
    out = _prepare_run_dir(args.out, args.force)

    if config["preprocessing"]:
        data = preprocess(data, config["preprocessing"])
    kind = "dpa" if config["model"] == "dpa" else "ae"
    model, history = train(data, arch, cfg, kind=kind)
    model.preprocessing = {"steps": _stats_to_json(data.preprocessing)}

    save_model(model, out)
    history.write_csv(out / "history.csv")
    echo = dict(config)
    echo["input_dim"] = data.p
    echo["data"] = str(Path(args.data))
    echo["k_weights"] = list(schedule.weights)
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    last = f" final loss {history.total[-1]:.6g}" if history.total else ""
    print(f"trained {config['model']} ({cfg.epochs} epochs, seed {cfg.seed})"
          f"{last} -> {out}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data)
    ks = _parse_ints(args.ks, "--ks")
    out = _prepare_file(args.out, args.force)
    X = _model_space(model, data.X)
    rng = np.random.default_rng(args.seed)
    reports = evaluate_model(model, X, ks, args.draws, rng,
                             max_pairs=args.max_pairs)
    write_report_csv(reports, out)
    print(f"evaluated k={','.join(str(k) for k in ks)} on n={data.n} -> {out}")
    return EXIT_OK


def _cmd_embed(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data)
    _check_embed_k(model, args.k)
    out = _prepare_file(args.out, args.force)
    Z = model.embed(_model_space(model, data.X))[:, :args.k]
    header = [f"z{j}" for j in range(args.k)]
    rows: list[list] = [[float(v) for v in row] for row in Z]
    if data.labels is not None:
        header.append("label")
        for row, lab in zip(rows, data.labels):
            row.append(int(lab))
    _write_csv(out, header, rows)
    print(f"embedded n={data.n} at k={args.k} -> {out}")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data)
    _check_embed_k(model, args.k)
    if args.samples < 1:
        raise ValueError("--samples must be >= 1")
    out = _prepare_file(args.out, args.force)
    X = _model_space(model, data.X)
    rng = np.random.default_rng(args.seed)
    draws = draw_reconstructions(model, X, args.k, args.samples, rng)
    # input-major order: all samples for row 0, then row 1, ...
    stacked = draws.transpose(1, 0, 2).reshape(data.n * args.samples, data.p)
    stacked = _data_space(model, stacked)
    labels = None if data.labels is None else np.repeat(data.labels, args.samples)
    save_dataset(Dataset(f"{data.name}-recon", stacked, labels=labels), out)
    print(f"n={data.n * args.samples} p={data.p} sha256={_sha256(out)}")
    return EXIT_OK


def _cmd_qq(args) -> int:
    model = load_model(args.model)
    data = load_dataset(args.data)
    _check_embed_k(model, args.k)
    if not 0 <= args.column < data.p:
        raise ValueError(f"--column {args.column} outside 0..{data.p - 1}")
    if args.quantiles < 1:
        raise ValueError("--quantiles must be >= 1")
    out = _prepare_file(args.out, args.force)
    X = _model_space(model, data.X)
    rng = np.random.default_rng(args.seed)
    draws = draw_reconstructions(model, X, args.k, args.draws, rng)
    table = qq_table(X[:, args.column], draws[:, :, args.column].ravel(),
                     args.quantiles)
    _write_csv(out, ["level", "q_true", "q_fit"],
               [[float(v) for v in row] for row in table])
    print(f"qq column {args.column} at k={args.k} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------


def _add_model_data(sub) -> None:
    sub.add_argument("--model", required=True, help="model checkpoint directory")
    sub.add_argument("--data", required=True, help="binary dataset file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpa",
        description="Distributional principal autoencoder toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="write a synthetic dataset")
    g.add_argument("--kind", required=True, choices=("disk", "gaussian"))
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=32, help="disk image side length")
    g.add_argument("--radius-min", type=float, default=2.0)
    g.add_argument("--radius-max", type=float, default=6.0)
    g.add_argument("--mean", help="gaussian mean, comma-separated")
    g.add_argument("--cov", help="gaussian covariance rows, ';'-separated")
    g.add_argument("--force", action="store_true")
    g.set_defaults(func=_cmd_generate)

    t = sub.add_parser("train", help="train a model from a config file")
    t.add_argument("--config", required=True, help="JSON run configuration")
    t.add_argument("--data", required=True, help="binary dataset file")
    t.add_argument("--out", required=True, help="run directory to create")
    t.add_argument("--force", action="store_true")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("evaluate", help="distributional metrics per k")
    _add_model_data(e)
    e.add_argument("--ks", required=True, help="comma-separated latent levels")
    e.add_argument("--draws", type=int, default=16)
    e.add_argument("--out", required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--max-pairs", type=int, default=MAX_PAIRS_DEFAULT)
    e.add_argument("--force", action="store_true")
    e.set_defaults(func=_cmd_evaluate)

    m = sub.add_parser("embed", help="write first-k embedding coordinates")
    _add_model_data(m)
    m.add_argument("--k", type=int, required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--force", action="store_true")
    m.set_defaults(func=_cmd_embed)

    r = sub.add_parser("reconstruct", help="sample reconstructions per input")
    _add_model_data(r)
    r.add_argument("--k", type=int, required=True)
    r.add_argument("--samples", type=int, default=1)
    r.add_argument("--out", required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--force", action="store_true")
    r.set_defaults(func=_cmd_reconstruct)

    q = sub.add_parser("qq", help="marginal quantile-quantile table")
    _add_model_data(q)
    q.add_argument("--k", type=int, required=True)
    q.add_argument("--column", type=int, required=True)
    q.add_argument("--draws", type=int, default=16)
    q.add_argument("--quantiles", type=int, default=99)
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--force", action="store_true")
    q.set_defaults(func=_cmd_qq)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
