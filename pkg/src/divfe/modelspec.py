"""Plain-text model architecture format.

One layer per line after two header lines::

    input 28x28          # 1D length, HxW image, or CxHxW planes
    walsh_rank 16
    conv2d 3x3 20        # optional trailing 'same' selects zero padding
    batchnorm
    relu
    conv2d 26x26 16
    flatten

Blank lines and '#' comments are ignored. The parsed stack must wire to a
flat output of length walsh_rank.
"""

import numpy as np

from .layers import (BatchNorm, Conv1D, Conv2D, Dense, Dropout, FeatureExtractor,
                     Flatten, MaxPool, ReLU)


class SpecError(ValueError):
    pass


def _dims(token, lineno):
    try:
        dims = tuple(int(d) for d in token.lower().split("x"))
    except ValueError as exc:
        raise SpecError(f"line {lineno}: bad dimensions {token!r}") from exc
    if any(d < 1 for d in dims):
        raise SpecError(f"line {lineno}: dimensions must be positive")
    return dims


def _padding(extra, lineno):
    if not extra:
        return "valid"
    if extra == ["same"]:
        return "same"
    raise SpecError(f"line {lineno}: unexpected tokens {' '.join(extra)!r}")


def parse_model_spec(text: str) -> FeatureExtractor:
    input_shape = None
    rank = None
    layers = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        kind, args = tokens[0].lower(), tokens[1:]
        try:
            if kind == "input":
                dims = _dims(args[0], lineno)
                if len(dims) == 1:
                    input_shape = (1, dims[0])
                elif len(dims) == 2:
                    input_shape = (1,) + dims
                elif len(dims) == 3:
                    input_shape = dims
                else:
                    raise SpecError(f"line {lineno}: input takes 1 to 3 dimensions")
            elif kind == "walsh_rank":
                rank = int(args[0])
            elif kind == "conv1d":
                layers.append(Conv1D(int(args[0]), int(args[1]),
                                     padding=_padding(args[2:], lineno)))
            elif kind == "conv2d":
                fh, fw = _dims(args[0], lineno)
                layers.append(Conv2D(fh, fw, int(args[1]),
                                     padding=_padding(args[2:], lineno)))
            elif kind == "maxpool":
                layers.append(MaxPool(int(args[0])))
            elif kind == "batchnorm":
                layers.append(BatchNorm())
            elif kind == "dropout":
                layers.append(Dropout(float(args[0])))
            elif kind == "relu":
                layers.append(ReLU())
            elif kind == "flatten":
                layers.append(Flatten())
            elif kind == "dense":
                layers.append(Dense(int(args[0])))
            else:
                raise SpecError(f"line {lineno}: unknown layer {kind!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            raise SpecError(f"line {lineno}: malformed {kind!r} line: {raw.strip()!r}") from exc
    if input_shape is None:
        raise SpecError("missing 'input' header line")
    if rank is None:
        raise SpecError("missing 'walsh_rank' header line")
    return FeatureExtractor(layers, input_shape, rank)


def format_model_spec(model: FeatureExtractor) -> str:
    dims = model.input_shape
    if len(dims) == 2 and dims[0] == 1:
        input_line = f"input {dims[1]}"
    elif len(dims) == 3 and dims[0] == 1:
        input_line = f"input {dims[1]}x{dims[2]}"
    else:
        input_line = "input " + "x".join(str(d) for d in dims)
    lines = [input_line, f"walsh_rank {model.rank}"] + model.spec_lines()
    return "\n".join(lines) + "\n"


def load_model_spec(path) -> FeatureExtractor:
    with open(path, encoding="utf-8") as fh:
        return parse_model_spec(fh.read())
