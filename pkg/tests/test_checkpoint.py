"""Binary checkpoint persistence: bit-exact round trips and corruption checks."""

import numpy as np
import pytest

from divfe.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from divfe.data_io import FormatError, Standardizer
from divfe.layers import (BatchNorm, Conv1D, Conv2D, Dense, Dropout, FeatureExtractor,
                          Flatten, MaxPool, ReLU)
from divfe.walsh import make_codebook


def _model_1d():
    layers = [Conv1D(2, 10, padding="same"), ReLU(), Conv1D(4, 10), ReLU(),
              Flatten(), Dense(8)]
    return FeatureExtractor(layers, (1, 4), 8).initialize(np.random.default_rng(0))


def _model_2d():
    layers = [Conv2D(3, 3, 4), BatchNorm(), ReLU(), MaxPool(2),
              Dropout(0.25), Flatten(), Dense(8)]
    model = FeatureExtractor(layers, (1, 8, 8), 8).initialize(np.random.default_rng(1))
    # mutate running stats so the round trip covers non-default buffers
    model.forward(np.random.default_rng(2).normal(size=(6, 1, 8, 8)), mode="train")
    return model


def _assert_models_equal(a, b):
    assert a.input_shape == b.input_shape and a.rank == b.rank
    assert [type(l) for l in a.layers] == [type(l) for l in b.layers]
    for pa, pb in zip(a.state_arrays, b.state_arrays):
        np.testing.assert_array_equal(pa, pb)   # bit-exact


def test_round_trip_1d(tmp_path):
    model = _model_1d()
    cb = make_codebook(3, 8)
    path = tmp_path / "m.divf"
    save_checkpoint(model, cb, path)
    back, cb2, norm = load_checkpoint(path)
    _assert_models_equal(model, back)
    assert cb2.class_rows == cb.class_rows and cb2.rank == cb.rank
    np.testing.assert_array_equal(cb2.matrix, cb.matrix)
    assert norm is None


def test_round_trip_2d_with_all_layer_kinds(tmp_path):
    model = _model_2d()
    cb = make_codebook(5, 8)
    path = tmp_path / "m.divf"
    save_checkpoint(model, cb, path)
    back, _, _ = load_checkpoint(path)
    _assert_models_equal(model, back)
    x = np.random.default_rng(3).normal(size=(4, 1, 8, 8))
    np.testing.assert_array_equal(model.forward(x, mode="infer"),
                                  back.forward(x, mode="infer"))


def test_round_trip_with_normalizer(tmp_path):
    model = _model_1d()
    cb = make_codebook(2, 8)
    norm = Standardizer.fit(np.random.default_rng(4).normal(size=(20, 4)))
    path = tmp_path / "m.divf"
    save_checkpoint(model, cb, path, normalizer=norm)
    _, _, norm2 = load_checkpoint(path)
    np.testing.assert_array_equal(norm2.mean, norm.mean)
    np.testing.assert_array_equal(norm2.std, norm.std)


def test_file_starts_with_magic(tmp_path):
    path = tmp_path / "m.divf"
    save_checkpoint(_model_1d(), make_codebook(2, 8), path)
    assert path.read_bytes()[:4] == MAGIC


def test_single_byte_corruption_rejected(tmp_path):
    path = tmp_path / "m.divf"
    save_checkpoint(_model_1d(), make_codebook(2, 8), path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(FormatError, match="CRC"):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "m.divf"
    path.write_bytes(b"NOPE" + bytes(64))
    with pytest.raises(FormatError, match="magic"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path):
    path = tmp_path / "m.divf"
    save_checkpoint(_model_1d(), make_codebook(2, 8), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) // 2])
    with pytest.raises(FormatError):
        load_checkpoint(path)


def test_save_is_deterministic(tmp_path):
    model = _model_1d()
    cb = make_codebook(3, 8)
    p1, p2 = tmp_path / "a.divf", tmp_path / "b.divf"
    save_checkpoint(model, cb, p1)
    save_checkpoint(model, cb, p2)
    assert p1.read_bytes() == p2.read_bytes()
