"""Command-line front end: ``dwl <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration or validation error, 3 I/O or file
format error, 4 numerical failure. Every command is a pure function of its
config file, flags and input files; only sweep wall times vary run to run.
"""

import argparse
import copy
import csv
import json
import sys
import time
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io as dio
from .bdr import BdrConfig, bdr_fit
from .datasets import (
    Dataset,
    SplitSpec,
    Standardizer,
    load_csv,
    make_bars,
    make_blobs,
    make_lowrank,
    save_csv,
    split,
    standardize_apply,
    standardize_fit,
)
from .dnet import (
    LAYER_TAGS,
    AugmentConfig,
    BdrSource,
    Classification,
    DNetConfig,
    PcaSource,
    TrainConfig,
    dnet_predict,
    dnet_train,
    extract_layer_features,
)
from .errors import ConfigError, DataFormatError, DwlError, NumericalError
from .experiments import epochs_to_threshold
from .metrics import accuracy, confusion, feature_ari
from .numerics import seeded_rng

HISTORY_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")
SWEEP_HEADER = ("r", "seed", "test_accuracy", "epochs_to_95pct_of_best", "wall_time")

DEFAULT_CONFIG = {
    "seed": 0,
    "output_dir": "runs/default",
    "data": {"generator": "blobs", "k": 3, "dim": 5, "n_per_class": 200, "spread": 1.0,
             "distractor_dims": 20, "distractor_std": 1.0},
    "standardize": True,
    "split": {"fractions": [0.70, 0.15, 0.15], "stratify": False},
    "bdr": {"r": 2, "prior_mode": "ard", "max_iter": 5000, "tol": 1e-6},
    "dnet": {"channel": "dual", "ld": "bdr", "pca_r": 2,
             "hd_layers": [{"type": "Dense", "n_out": 16}, {"type": "Relu"}],
             "aggregation": "concat", "fusion_width": 16, "ld_standardize": True,
             "fusion_relu": True},
    "train": {"batch_size": 32, "max_epochs": 300, "patience": 10, "lr": 0.002,
              "shuffle_each_epoch": True, "augmentation": None},
}

_GENERATOR_KEYS = {
    "blobs": {"k", "dim", "n_per_class", "spread", "distractor_dims", "distractor_std",
              "center_box"},
    "lowrank": {"d", "n", "rank", "noise_std"},
    "bars": {"size", "n_per_class", "noise"},
}
_DNET_KEYS = {"channel", "ld", "pca_r", "hd_layers", "aggregation", "fusion_width",
              "ld_standardize", "fusion_relu"}


# -- configuration --------------------------------------------------------

def _check_keys(section, allowed, where):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _field_names(cls):
    return {f.name for f in fields(cls)}


def merge_config(base, override, where="config"):
    """Recursive dict merge that rejects keys absent from ``base``."""
    if not isinstance(override, dict):
        raise ConfigError(f"{where} must be a JSON object")
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown key in {where}: {key}")
        # the data section is replaced whole; it is checked per generator later
        if isinstance(base[key], dict) and isinstance(value, dict) and key != "data":
            out[key] = merge_config(base[key], value, f"{where}.{key}")
        else:
            out[key] = copy.deepcopy(value)
    return out


def validate_config(cfg):
    """Build every typed config object once so errors surface before any work."""
    data = cfg["data"]
    if "path" in data:
        _check_keys(data, {"path", "label_column"}, "data")
    else:
        gen = data.get("generator")
        if gen not in _GENERATOR_KEYS:
            raise ConfigError(f"data.generator must be one of {sorted(_GENERATOR_KEYS)}")
        _check_keys(data, _GENERATOR_KEYS[gen] | {"generator"}, "data")
    _check_keys(cfg["split"], {"fractions", "stratify"}, "split")
    SplitSpec(tuple(cfg["split"]["fractions"]), 0, bool(cfg["split"]["stratify"]))
    _check_keys(cfg["bdr"], _field_names(BdrConfig) - {"seed"}, "bdr")
    BdrConfig(**cfg["bdr"])
    _check_keys(cfg["dnet"], _DNET_KEYS, "dnet")
    d = cfg["dnet"]
    if d["channel"] not in ("dual", "single"):
        raise ConfigError("dnet.channel must be dual or single")
    if d["ld"] not in ("bdr", "pca", "none"):
        raise ConfigError("dnet.ld must be bdr, pca or none")
    if d["channel"] == "single" and d["ld"] != "none":
        raise ConfigError("the single channel takes no LD source (use --ld none)")
    if d["channel"] == "dual" and d["ld"] == "none":
        raise ConfigError("the dual channel needs an LD source (bdr or pca)")
    _check_keys(cfg["train"], _field_names(TrainConfig) - {"seed"}, "train")
    train_config(cfg, 0)
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    return cfg


def train_config(cfg, seed):
    t = dict(cfg["train"])
    aug = t.pop("augmentation", None)
    if aug is not None:
        _check_keys(aug, _field_names(AugmentConfig), "train.augmentation")
        aug = AugmentConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in aug.items()})
    try:
        return TrainConfig(**t, seed=seed, augmentation=aug)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def build_layers(specs, input_shape):
    """Layer objects from JSON specs, inferring input sizes by chaining shapes."""
    layers = []
    shape = tuple(input_shape)
    for spec in specs:
        spec = dict(spec)
        kind = spec.get("type")
        if kind == "Dense":
            if len(shape) != 1:
                raise ConfigError(f"Dense after shape {shape}: add a Flatten layer first")
            spec.setdefault("n_in", shape[0])
        elif kind == "Conv2d":
            spec.setdefault("in_ch", shape[0])
        try:
            layer = dio.layer_from_dict(spec)
        except TypeError as exc:
            raise ConfigError(f"bad layer spec {spec}: {exc}") from None
        shape = tuple(layer.output_shape(shape))
        layers.append(layer)
    return tuple(layers)


def load_run_config(args):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                user = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        cfg = merge_config(cfg, user)
    # flags override the file
    if getattr(args, "data", None):
        cfg["data"] = {"path": args.data}
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "out", None):
        cfg["output_dir"] = args.out
    for flag, section, key in (("channel", "dnet", "channel"), ("ld", "dnet", "ld"),
                               ("r", "bdr", "r"), ("prior", "bdr", "prior_mode"),
                               ("epochs", "train", "max_epochs")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[section][key] = value
    if getattr(args, "r", None) is not None:
        cfg["dnet"]["pca_r"] = args.r
    if getattr(args, "channel", None) == "single" and getattr(args, "ld", None) is None:
        cfg["dnet"]["ld"] = "none"
    return validate_config(cfg)


# -- data -----------------------------------------------------------------

def generate(data_cfg, seed):
    params = {k: v for k, v in data_cfg.items() if k != "generator"}
    rng = seeded_rng(seed)
    gen = data_cfg["generator"]
    if gen == "blobs":
        return make_blobs(rng, **params)
    if gen == "bars":
        return make_bars(rng, **params)
    ds, _ = make_lowrank(rng, **params)
    return ds


def write_dataset(ds, out):
    """``data.csv`` (tabular) or ``data.dwlm`` + ``meta.json`` (images), plus ``labels.csv``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if ds.image_shape is not None:
        dio.write_matrix(out / "data.dwlm", ds.x.T)
        (out / "meta.json").write_text(dio.dumps({"image_shape": list(ds.image_shape)}),
                                       encoding="utf-8")
    else:
        save_csv(Dataset(ds.x, feature_names=ds.feature_names), out / "data.csv")
    if ds.y is not None:
        with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label"])
            w.writerows([[str(v)] for v in ds.y])


def _labels_only(path):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    labels = []
    for lineno, row in enumerate(rows[1:], start=2):
        if row:
            try:
                labels.append(int(row[0]))
            except ValueError:
                raise DataFormatError(f"{path}, line {lineno}: label is not an integer") from None
    return np.array(labels, dtype=np.int64)


def read_dataset(path, label_column="label"):
    """Load a ``gen-data`` directory or a CSV file with an optional label column."""
    path = Path(path)
    if path.is_dir():
        image_shape = None
        if (path / "data.dwlm").exists():
            x = dio.read_matrix(path / "data.dwlm").T
            meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
            image_shape = tuple(meta["image_shape"])
            names = None
        else:
            ds = load_csv(path / "data.csv", label_column=None)
            x, names = ds.x, ds.feature_names
        y = None
        if (path / "labels.csv").exists():
            y = _labels_only(path / "labels.csv")
        return Dataset(x, y, feature_names=names, image_shape=image_shape)
    with open(path, encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().split(",")]
    return load_csv(path, label_column=label_column if label_column in header else None)


def load_data(cfg, seed):
    data = cfg["data"]
    if "path" in data:
        return read_dataset(data["path"], data.get("label_column", "label"))
    return generate(data, seed)


# -- training pipeline ----------------------------------------------------

def dnet_config(cfg, ds, seed):
    d = cfg["dnet"]
    input_shape = ds.image_shape or (ds.d,)
    if d["ld"] == "bdr":
        source = BdrSource(BdrConfig(**cfg["bdr"], seed=seed))
    elif d["ld"] == "pca":
        source = PcaSource(int(d["pca_r"]))
    else:
        source = None
    if ds.y is None:
        raise ConfigError("training data has no labels")
    k = int(np.max(ds.y)) + 1
    return DNetConfig(input_shape=input_shape,
                      hd_layers=build_layers(d["hd_layers"], input_shape),
                      ld_source=source, aggregation=d["aggregation"],
                      fusion_width=int(d["fusion_width"]), head=Classification(k),
                      ld_standardize=bool(d["ld_standardize"]),
                      fusion_relu=bool(d["fusion_relu"]))


def evaluate(model, standardizer, ds, seed):
    """Accuracy, confusion matrix and feature ARI at every layer tag."""
    x = ds if standardizer is None else standardize_apply(standardizer, ds)
    pred = dnet_predict(model, x)
    truth = np.asarray(ds.y, dtype=np.int64)
    k = model.config.out_dim
    return {
        "n": int(ds.n),
        "accuracy": accuracy(pred, truth),
        "confusion": confusion(pred, truth, k).tolist(),
        "feature_ari": {tag: feature_ari(extract_layer_features(model, x, tag), truth, seed)
                        for tag in LAYER_TAGS},
    }


def run_training(cfg, seed):
    """Generate or load data, split, train and evaluate one seed."""
    ds = load_data(cfg, seed)
    fractions = tuple(cfg["split"]["fractions"])
    train, val, test = split(ds, SplitSpec(fractions, seed, cfg["split"]["stratify"]))
    standardizer = standardize_fit(train) if cfg["standardize"] else None
    if standardizer is not None:
        train_s, val_s = standardize_apply(standardizer, train), standardize_apply(standardizer, val)
    else:
        train_s, val_s = train, val
    config = dnet_config(cfg, ds, seed)
    model, history = dnet_train(config, train_config(cfg, seed), train_s, val_s)
    metrics = evaluate(model, standardizer, test, seed)
    summary = {"seed": seed, "best_epoch": history.best_epoch, "epochs_run": history.epochs_run,
               "stopped_early": history.stopped_early, "ld_width": model.ld_width,
               "epochs_to_95": epochs_to_threshold(history, 0.95),
               "test_accuracy": metrics["accuracy"]}
    return model, standardizer, history, test, metrics, summary


def save_model(directory, model, standardizer, summary):
    dio.save_dnet_model(directory, model, metrics=summary)
    if standardizer is not None:
        dio.write_matrix(Path(directory) / "input_mean.dwlm", standardizer.mean)
        dio.write_matrix(Path(directory) / "input_std.dwlm", standardizer.std)


def load_model(directory):
    directory = Path(directory)
    if not (directory / "manifest.json").exists():
        raise FileNotFoundError(f"{directory}: no model bundle found")
    model = dio.load_dnet_model(directory)
    standardizer = None
    if (directory / "input_mean.dwlm").exists():
        standardizer = Standardizer(dio.read_matrix(directory / "input_mean.dwlm").ravel(),
                                    dio.read_matrix(directory / "input_std.dwlm").ravel())
    manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    return model, standardizer, manifest.get("metrics", {})


def write_history(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HISTORY_HEADER)
        for row in history.rows():
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def _seed_list(cfg, args):
    n = getattr(args, "seeds", None) or 1
    if n < 1:
        raise ConfigError("--seeds must be >= 1")
    return [cfg["seed"] + i for i in range(n)]


def _emit(record):
    print(json.dumps(record, sort_keys=True))


def _table(rows, header):
    widths = [max(len(str(h)), *(len(_fmt(r[i])) for r in rows)) for i, h in enumerate(header)]
    lines = ["  ".join(str(h).ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(_fmt(v).ljust(w) for v, w in zip(r, widths)) for r in rows]
    print("\n".join(lines))


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


# -- subcommands ----------------------------------------------------------

def cmd_gen_data(args):
    spec = {"generator": args.generator}
    if args.generator == "blobs":
        spec.update(k=args.k, dim=args.dim, n_per_class=args.n, spread=args.spread,
                    distractor_dims=args.distractors, distractor_std=args.distractor_std)
    elif args.generator == "bars":
        spec.update(size=args.size, n_per_class=args.n, noise=args.noise)
    else:
        spec.update(d=args.d, n=args.n, rank=args.rank, noise_std=args.noise)
    ds = generate(spec, args.seed)
    write_dataset(ds, args.out)
    (Path(args.out) / "config.json").write_text(dio.dumps(dict(spec, seed=args.seed)),
                                                encoding="utf-8")
    _emit({"command": "gen-data", "generator": args.generator, "d": ds.d, "n": ds.n,
           "image_shape": list(ds.image_shape) if ds.image_shape else None})
    return 0


def cmd_bdr_fit(args):
    ds = read_dataset(args.data)
    config = BdrConfig(r=args.r, prior_mode=args.prior, sigma_z_sq=args.sigma_z_sq,
                       max_iter=args.max_iter, tol=args.tol, seed=args.seed,
                       prune_threshold=args.threshold)
    model, report = bdr_fit(ds.x, config)
    record = {"iterations": report.iterations_run, "converged": report.converged,
              "retained": model.n_components, "retained_indices": model.retained,
              "final_delta": report.final_delta}
    dio.save_bdr_model(args.out, model, metrics=record)
    _emit(record)
    return 0


def cmd_train(args):
    cfg = load_run_config(args)
    out = Path(cfg["output_dir"])
    seeds = _seed_list(cfg, args)
    summaries = []
    for seed in seeds:
        d = out if len(seeds) == 1 else out / f"seed_{seed}"
        d.mkdir(parents=True, exist_ok=True)
        model, standardizer, history, test, metrics, summary = run_training(cfg, seed)
        (d / "config.json").write_text(dio.dumps(dict(cfg, seed=seed)), encoding="utf-8")
        write_history(d / "history.csv", history)
        (d / "metrics.json").write_text(dio.dumps(metrics), encoding="utf-8")
        (d / "summary.json").write_text(dio.dumps(summary), encoding="utf-8")
        save_csv(test, d / "test.csv")
        save_model(d / "model", model, standardizer, summary)
        _emit(dict(summary, feature_ari=metrics["feature_ari"]))
        summaries.append(summary)
    if len(seeds) > 1:
        eps = [np.inf if s["epochs_to_95"] is None else s["epochs_to_95"] for s in summaries]
        _emit({"seed": "median", "test_accuracy": float(np.median([s["test_accuracy"] for s in summaries])),
               "epochs_to_95": float(np.median(eps))})
    _table([(s["seed"], s["test_accuracy"], s["best_epoch"], s["epochs_run"], s["epochs_to_95"])
            for s in summaries], ("seed", "test_acc", "best_epoch", "epochs", "epochs_to_95"))
    return 0


def cmd_eval(args):
    model, standardizer, summary = load_model(args.model)
    ds = read_dataset(args.data)
    if ds.y is None:
        raise ConfigError("evaluation data has no labels")
    seed = args.seed if args.seed is not None else int(summary.get("seed", 0))
    metrics = evaluate(model, standardizer, ds, seed)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "metrics.json").write_text(dio.dumps(metrics), encoding="utf-8")
    _emit(metrics)
    _table([(tag, v) for tag, v in metrics["feature_ari"].items()]
           + [("accuracy", metrics["accuracy"])], ("metric", "value"))
    return 0


def cmd_sweep_components(args):
    cfg = load_run_config(args)
    if cfg["dnet"]["ld"] == "none":
        raise ConfigError("a component sweep needs an LD source")
    try:
        r_values = [int(v) for v in args.r_values.split(",")]
    except ValueError:
        raise ConfigError(f"--r-values must be comma-separated integers, got {args.r_values}") from None
    seeds = _seed_list(cfg, args)
    rows = []
    for r in r_values:
        per_seed = []
        for seed in seeds:
            run_cfg = copy.deepcopy(cfg)
            run_cfg["bdr"]["r"] = r
            run_cfg["dnet"]["pca_r"] = r
            validate_config(run_cfg)
            start = time.perf_counter()
            _, _, history, _, metrics, _ = run_training(run_cfg, seed)
            wall = time.perf_counter() - start
            reach = epochs_to_threshold(history, 0.95 * max(history.val_acc))
            per_seed.append((r, seed, metrics["accuracy"], reach, wall))
        rows.extend(per_seed)
        rows.append((r, "median", float(np.median([p[2] for p in per_seed])),
                     float(np.median([p[3] for p in per_seed])),
                     float(np.median([p[4] for p in per_seed]))))
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        w.writerows([[r, s, repr(a), e, repr(t)] for r, s, a, e, t in rows])
    (out / "config.json").write_text(dio.dumps(cfg), encoding="utf-8")
    for r, s, a, e, _ in rows:
        _emit({"r": r, "seed": s, "test_accuracy": a, "epochs_to_95pct_of_best": e})
    _table([row[:4] for row in rows if row[1] == "median"],
           ("r", "seed", "test_acc", "epochs_to_95pct"))
    return 0


def cmd_export_features(args):
    model, standardizer, _ = load_model(args.model)
    ds = read_dataset(args.data)
    x = ds if standardizer is None else standardize_apply(standardizer, ds)
    feats = extract_layer_features(model, x, args.layer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dio.write_matrix(out / "features.dwlm", feats)
    with open(out / "features.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{args.layer}_{j}" for j in range(feats.shape[1])])
        w.writerows([[repr(float(v)) for v in row] for row in feats])
    if ds.y is not None:
        with open(out / "labels.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["label"])
            w.writerows([[str(v)] for v in ds.y])
    _emit({"layer": args.layer, "rows": feats.shape[0], "cols": feats.shape[1]})
    return 0


# -- argument parsing -----------------------------------------------------

def _common(p, out_required=False):
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--out", required=out_required, help="output directory")
    p.add_argument("--seed", type=int, help="global seed (non-negative)")
    p.add_argument("--seeds", type=int, help="run this many consecutive seeds")


def build_parser():
    parser = argparse.ArgumentParser(prog="dwl", description="Deep-and-wide learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("generator", choices=("blobs", "bars", "lowrank"))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n", type=int, required=True, help="samples per class (lowrank: total)")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--spread", type=float, default=1.0)
    p.add_argument("--distractors", type=int, default=0)
    p.add_argument("--distractor-std", type=float, default=1.0)
    p.add_argument("--size", type=int, default=8)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--rank", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("bdr-fit", help="fit a BDR projector")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--prior", choices=("ard", "elementwise"), default="ard")
    p.add_argument("--sigma-z-sq", type=float, default=0.5)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--threshold", type=float, default=1e4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bdr_fit)

    p = sub.add_parser("train", help="train a D-Net (or its single-channel baseline)")
    _common(p)
    p.add_argument("--data", help="dataset directory or CSV (default: config generator)")
    p.add_argument("--channel", choices=("dual", "single"))
    p.add_argument("--ld", choices=("bdr", "pca", "none"))
    p.add_argument("--r", type=int, help="LD component count")
    p.add_argument("--prior", choices=("ard", "elementwise"))
    p.add_argument("--epochs", type=int, help="maximum epochs")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="k-means seed for feature ARI (default: training seed)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep-components", help="test accuracy versus LD component count")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--r-values", required=True, help="comma-separated, e.g. 2,8,32")
    p.add_argument("--ld", choices=("bdr", "pca"))
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_sweep_components)

    p = sub.add_parser("export-features", help="write layer activations")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--layer", choices=LAYER_TAGS, default="pre_head")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_features)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DwlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
