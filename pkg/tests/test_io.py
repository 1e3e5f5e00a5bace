import json
import struct
import tempfile
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwl import io, nn
from dwl import dnet as dn
from dwl.bdr import BdrConfig, bdr_fit
from dwl.datasets import SplitSpec, make_bars, make_blobs, split
from dwl.errors import DataFormatError
from dwl.numerics import seeded_rng


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 5), st.integers(0, 5))
def test_matrix_round_trip_bit_exact(seed, rows, cols):
    a = seeded_rng(seed).standard_normal((rows, cols)) * 1e300
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "m.dwlm"
        io.write_matrix(path, a)
        b = io.read_matrix(path)
    assert b.shape == a.shape
    assert a.tobytes() == b.tobytes()


def test_matrix_special_values(tmp_path):
    a = np.array([[np.inf, -0.0, np.nan, 5e-324]])
    io.write_matrix(tmp_path / "s.dwlm", a)
    assert io.read_matrix(tmp_path / "s.dwlm").tobytes() == a.tobytes()


def test_matrix_header_layout(tmp_path):
    io.write_matrix(tmp_path / "h.dwlm", np.array([[1.0, 2.0, 3.0]]))
    blob = (tmp_path / "h.dwlm").read_bytes()
    assert blob[:4] == b"DWLM" and blob[4] == 1
    assert struct.unpack("<QQ", blob[5:21]) == (1, 3)
    assert struct.unpack("<3d", blob[21:]) == (1.0, 2.0, 3.0)


@pytest.mark.parametrize("mutate", ["magic", "version", "truncate", "short_header"])
def test_matrix_rejects_corruption(tmp_path, mutate):
    p = tmp_path / "c.dwlm"
    io.write_matrix(p, np.ones((2, 2)))
    blob = bytearray(p.read_bytes())
    if mutate == "magic":
        blob[:4] = b"XXXX"
    elif mutate == "version":
        blob[4] = 9
    elif mutate == "truncate":
        blob = blob[:-3]
    else:
        blob = blob[:7]
    p.write_bytes(bytes(blob))
    with pytest.raises(DataFormatError):
        io.read_matrix(p)


def test_bundle_keeps_nd_shapes(tmp_path):
    arrays = {"v": np.arange(3.0), "t": np.arange(24.0).reshape(2, 3, 2, 2)}
    io.save_bundle(tmp_path / "b", {"kind": "x"}, arrays)
    text = (tmp_path / "b" / "manifest.json").read_text()
    assert text.endswith("\n")
    assert text == io.dumps(json.loads(text))
    manifest, back = io.load_bundle(tmp_path / "b")
    assert manifest["kind"] == "x"
    for k, v in arrays.items():
        assert np.array_equal(back[k], v)


def test_bdr_bundle_round_trip(tmp_path):
    x = seeded_rng(0).standard_normal((6, 30))
    model, _ = bdr_fit(x, BdrConfig(r=3, max_iter=30))
    io.save_bdr_model(tmp_path / "m", model)
    back = io.load_bdr_model(tmp_path / "m")
    assert back.config == model.config
    assert back.retained == model.retained
    assert np.array_equal(back.project(x), model.project(x))


def trained_model(ld_source, seed=0):
    data = make_blobs(seeded_rng(seed), 3, 6, 30, spread=0.5)
    train, val, test = split(data, SplitSpec(seed=seed))
    cfg = dn.DNetConfig((6,), (nn.Dense(6, 8), nn.Relu()), ld_source, fusion_width=8,
                        head=dn.Classification(3))
    model, _ = dn.dnet_train(cfg, dn.TrainConfig(max_epochs=5), train, val)
    return model, test


@pytest.mark.parametrize("kind", ["bdr", "pca", "none"])
def test_dnet_bundle_bit_exact_predictions(tmp_path, kind):
    source = {"bdr": dn.BdrSource(BdrConfig(r=2, max_iter=50)),
              "pca": dn.PcaSource(2), "none": None}[kind]
    model, test = trained_model(source)
    io.save_dnet_model(tmp_path / "d", model, {"accuracy": 0.5})
    back = io.load_dnet_model(tmp_path / "d")
    assert back.config == model.config
    assert dn.dnet_outputs(back, test).tobytes() == dn.dnet_outputs(model, test).tobytes()
    for tag in dn.LAYER_TAGS:
        assert np.array_equal(dn.extract_layer_features(back, test, tag),
                              dn.extract_layer_features(model, test, tag))


def test_conv_dnet_bundle(tmp_path):
    data = make_bars(seeded_rng(1), 6, 20)
    train, val, test = split(data, SplitSpec(seed=1))
    hd = (nn.Conv2d(1, 2), nn.Relu(), nn.MaxPool2(), nn.Flatten())
    cfg = dn.DNetConfig((1, 6, 6), hd, None, fusion_width=4, head=dn.Classification(2))
    model, _ = dn.dnet_train(cfg, dn.TrainConfig(max_epochs=2), train, val)
    io.save_dnet_model(tmp_path / "c", model)
    back = io.load_dnet_model(tmp_path / "c")
    assert np.array_equal(dn.dnet_outputs(back, test), dn.dnet_outputs(model, test))


def test_wrong_bundle_kind(tmp_path):
    x = seeded_rng(2).standard_normal((4, 20))
    model, _ = bdr_fit(x, BdrConfig(r=2, max_iter=5))
    io.save_bdr_model(tmp_path / "m", model)
    with pytest.raises(DataFormatError):
        io.load_dnet_model(tmp_path / "m")
