"""Binary matrix files and model bundles.

A DWLM file is ``b"DWLM"``, a version byte, the row and column counts as
little-endian u64, then the values as little-endian f64 in row-major
order. A bundle is a directory holding ``manifest.json`` and one DWLM file
per array; the manifest records each array's original shape so tensors of
any rank survive the trip through the 2-D format.
"""

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import nn
from .bdr import BdrConfig, BdrModel, FitReport, PcaModel
from .dnet import (
    BdrSource,
    Classification,
    DNetConfig,
    DNetModel,
    LdChannel,
    PcaSource,
    Regression,
)
from .errors import BadConfigError, DataFormatError

MAGIC = b"DWLM"
VERSION = 1
BUNDLE_FORMAT = 1
_HEADER = struct.Struct("<4sBQQ")


def write_matrix(path, a):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise BadConfigError(f"DWLM stores 2-D matrices, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise DataFormatError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    body = blob[_HEADER.size:]
    if len(body) != 8 * rows * cols:
        raise DataFormatError(f"{path}: expected {rows}x{cols} values, got {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)


def dumps(obj):
    """Canonical JSON: sorted keys, fixed separators, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# -- generic bundles ------------------------------------------------------

def save_bundle(directory, manifest, arrays):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shapes = {}
    for name, a in sorted(arrays.items()):
        a = np.asarray(a, dtype=np.float64)
        shapes[name] = list(a.shape)
        flat = a.reshape(1, -1) if a.ndim < 2 else a.reshape(a.shape[0], -1)
        write_matrix(directory / f"{name}.dwlm", flat)
    manifest = dict(manifest, format_version=BUNDLE_FORMAT, arrays=shapes)
    (directory / "manifest.json").write_text(dumps(manifest), encoding="utf-8")


def load_bundle(directory):
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{directory}: manifest is not valid JSON ({exc})") from None
    if manifest.get("format_version") != BUNDLE_FORMAT:
        raise DataFormatError(f"{directory}: unsupported bundle format")
    arrays = {name: read_matrix(directory / f"{name}.dwlm").reshape(shape)
              for name, shape in manifest["arrays"].items()}
    return manifest, arrays


# -- config codecs --------------------------------------------------------

_LAYER_TYPES = {cls.__name__: cls for cls in (nn.Dense, nn.Relu, nn.Conv2d, nn.MaxPool2, nn.Flatten)}


def layer_to_dict(layer):
    return {"type": type(layer).__name__, **asdict(layer)}


def layer_from_dict(d):
    d = dict(d)
    try:
        cls = _LAYER_TYPES[d.pop("type")]
    except KeyError:
        raise BadConfigError(f"unknown layer spec {d!r}") from None
    return cls(**d)


def dnet_config_to_dict(cfg):
    ld = cfg.ld_source
    if isinstance(ld, BdrSource):
        ld_d = {"kind": "bdr", "config": ld.config.to_dict()}
    elif isinstance(ld, PcaSource):
        ld_d = {"kind": "pca", "r": ld.r}
    else:
        ld_d = None
    if isinstance(cfg.head, Classification):
        head = {"kind": "classification", "k": cfg.head.k}
    else:
        head = {"kind": "regression", "out_dim": cfg.head.out_dim}
    return {
        "input_shape": list(cfg.input_shape),
        "hd_layers": [layer_to_dict(layer) for layer in cfg.hd_layers],
        "ld_source": ld_d,
        "aggregation": cfg.aggregation,
        "fusion_width": cfg.fusion_width,
        "head": head,
        "ld_standardize": cfg.ld_standardize,
        "fusion_relu": cfg.fusion_relu,
    }


def dnet_config_from_dict(d):
    ld = d.get("ld_source")
    if ld is None:
        source = None
    elif ld["kind"] == "bdr":
        source = BdrSource(BdrConfig(**ld["config"]))
    elif ld["kind"] == "pca":
        source = PcaSource(int(ld["r"]))
    else:
        raise BadConfigError(f"unknown LD source kind {ld['kind']!r}")
    head = d["head"]
    if head["kind"] == "classification":
        head = Classification(int(head["k"]))
    else:
        head = Regression(int(head["out_dim"]))
    return DNetConfig(
        input_shape=tuple(d["input_shape"]),
        hd_layers=tuple(layer_from_dict(x) for x in d["hd_layers"]),
        ld_source=source,
        aggregation=d["aggregation"],
        fusion_width=int(d["fusion_width"]),
        head=head,
        ld_standardize=bool(d["ld_standardize"]),
        fusion_relu=bool(d["fusion_relu"]),
    )


# -- BDR bundles ----------------------------------------------------------

def _bdr_arrays(model, prefix=""):
    return {f"{prefix}q_orth": model.q_orth, f"{prefix}r_upper": model.r_upper,
            f"{prefix}center": model.center,
            f"{prefix}phi_final": model.fit_report.phi_final}


def _bdr_meta(model):
    rep = model.fit_report
    return {"config": model.config.to_dict(), "retained": list(model.retained),
            "report": {"iterations_run": rep.iterations_run, "converged": rep.converged,
                       "final_delta": rep.final_delta,
                       "delta_history": list(rep.delta_history)}}


def _bdr_from(meta, arrays, prefix=""):
    rep = meta["report"]
    report = FitReport(rep["iterations_run"], rep["converged"], rep["final_delta"],
                       list(rep["delta_history"]), arrays[f"{prefix}phi_final"])
    return BdrModel(arrays[f"{prefix}q_orth"], arrays[f"{prefix}r_upper"],
                    arrays[f"{prefix}center"], list(meta["retained"]),
                    BdrConfig(**meta["config"]), report)


def save_bdr_model(directory, model, metrics=None):
    manifest = {"kind": "bdr", "bdr": _bdr_meta(model), "metrics": metrics or {}}
    save_bundle(directory, manifest, _bdr_arrays(model))


def load_bdr_model(directory):
    manifest, arrays = load_bundle(directory)
    if manifest.get("kind") != "bdr":
        raise DataFormatError(f"{directory} does not hold a BDR model")
    return _bdr_from(manifest["bdr"], arrays)


# -- D-Net bundles --------------------------------------------------------

def save_dnet_model(directory, model, metrics=None):
    arrays = {}
    for i, p in enumerate(model.hd_params):
        for k, v in p.items():
            arrays[f"hd{i}_{k}"] = v
    for k, v in model.fusion.items():
        arrays[f"fusion_{k}"] = v
    for k, v in model.head.items():
        arrays[f"head_{k}"] = v
    ld_meta = None
    if model.ld is not None:
        arrays["ld_mean"] = model.ld.mean
        arrays["ld_std"] = model.ld.std
        proj = model.ld.projector
        if isinstance(proj, BdrModel):
            ld_meta = {"kind": "bdr", "bdr": _bdr_meta(proj)}
            arrays.update(_bdr_arrays(proj, "ld_"))
        else:
            ld_meta = {"kind": "pca"}
            arrays["ld_basis"] = proj.basis
            arrays["ld_center"] = proj.center
    manifest = {"kind": "dnet", "config": dnet_config_to_dict(model.config),
                "ld": ld_meta, "metrics": metrics or {}}
    save_bundle(directory, manifest, arrays)


def load_dnet_model(directory):
    manifest, arrays = load_bundle(directory)
    if manifest.get("kind") != "dnet":
        raise DataFormatError(f"{directory} does not hold a D-Net model")
    config = dnet_config_from_dict(manifest["config"])
    hd_params = []
    for i, layer in enumerate(config.hd_layers):
        keys = sorted(layer.init(np.random.default_rng(0))) if layer.has_params else []
        hd_params.append({k: arrays[f"hd{i}_{k}"] for k in keys})
    fusion = {k: arrays[f"fusion_{k}"] for k in ("W", "b")}
    head = {k: arrays[f"head_{k}"] for k in ("W", "b")}
    ld = None
    meta = manifest.get("ld")
    if meta is not None:
        if meta["kind"] == "bdr":
            proj = _bdr_from(meta["bdr"], arrays, "ld_")
        else:
            proj = PcaModel(arrays["ld_basis"], arrays["ld_center"])
        ld = LdChannel(proj, arrays["ld_mean"], arrays["ld_std"], config.ld_standardize)
    return DNetModel(config, hd_params, fusion, head, ld)
