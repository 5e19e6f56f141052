"""Plain-text model architecture format."""

import numpy as np
import pytest

from divfe.layers import Conv1D, Conv2D, Dense
from divfe.modelspec import SpecError, format_model_spec, load_model_spec, parse_model_spec
from divfe.numerics import ShapeError

SPEC_1D = """# four-feature signal classifier
input 4
walsh_rank 8
conv1d 2 10 same
relu
conv1d 2 10 same
relu
conv1d 2 10 same
relu
conv1d 4 10
relu
flatten
dense 8
"""

SPEC_2D = """input 6x6
walsh_rank 4
conv2d 3x3 5
batchnorm
relu
maxpool 2
dropout 0.25
conv2d 2x2 4
flatten
"""


def test_parse_1d_spec():
    model = parse_model_spec(SPEC_1D)
    assert model.input_shape == (1, 4)
    assert model.rank == 8
    assert isinstance(model.layers[0], Conv1D)
    assert model.layers[0].padding == "same"
    assert isinstance(model.layers[-1], Dense)
    assert model.weight_count() == 900


def test_parse_2d_spec():
    model = parse_model_spec(SPEC_2D)
    assert model.input_shape == (1, 6, 6)
    assert model.rank == 4
    assert isinstance(model.layers[0], Conv2D)
    assert model.output_shape == (4,)


def test_round_trip_through_formatter():
    model = parse_model_spec(SPEC_2D)
    text = format_model_spec(model)
    again = parse_model_spec(text)
    assert format_model_spec(again) == text
    assert [type(l) for l in again.layers] == [type(l) for l in model.layers]


def test_comments_and_blank_lines_ignored():
    model = parse_model_spec("input 4\n\n# hi\nwalsh_rank 2\nflatten # tail\ndense 2\n")
    assert model.rank == 2


def test_missing_headers():
    with pytest.raises(SpecError, match="input"):
        parse_model_spec("walsh_rank 8\nflatten\n")
    with pytest.raises(SpecError, match="walsh_rank"):
        parse_model_spec("input 4\nflatten\n")


def test_unknown_layer_and_bad_tokens():
    with pytest.raises(SpecError, match="unknown layer"):
        parse_model_spec("input 4\nwalsh_rank 4\nsoftmax\n")
    with pytest.raises(SpecError, match="malformed"):
        parse_model_spec("input 4\nwalsh_rank 4\nconv1d two 10\n")
    with pytest.raises(SpecError):
        parse_model_spec("input 4\nwalsh_rank 4\nconv1d 2 10 padded\n")
    with pytest.raises(SpecError):
        parse_model_spec("input 0x4\nwalsh_rank 4\nflatten\n")


def test_wiring_error_surfaces():
    with pytest.raises(ShapeError):
        parse_model_spec("input 4\nwalsh_rank 8\nflatten\n")   # 4 != rank 8


def test_load_from_file(tmp_path):
    path = tmp_path / "model.spec"
    path.write_text(SPEC_1D)
    model = load_model_spec(path)
    assert model.rank == 8
    model.initialize(np.random.default_rng(0))
    assert model.forward(np.zeros((2, 1, 4))).shape == (2, 8)
