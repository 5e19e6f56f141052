"""Binary model persistence: magic 'DIVF', little-endian payload, CRC-32.

Layout::

    magic   b"DIVF"
    payload version u32 | rank u32 | class_count u32 | class_rows u32[C]
            input ndim u32 | dims u32[ndim]
            layer_count u32 | layers...
            has_normalizer u32 (+ mean, std arrays)
    crc32   u32 of the payload

Every float64 array is stored as u64 element count + raw little-endian
bytes, so a save/load round trip is bit-exact. The codebook matrix itself
is not stored; it is rebuilt deterministically from the rank. A corrupted
payload is rejected by the CRC before any parsing.
"""

import struct
import zlib

import numpy as np

from .data_io import FormatError, Standardizer
from .layers import (BatchNorm, Conv1D, Conv2D, Dense, Dropout, FeatureExtractor,
                     Flatten, MaxPool, ReLU)
from .walsh import WalshCodebook, assign_class_targets, build_modified_walsh

MAGIC = b"DIVF"
VERSION = 1

_TAG_CONV1D = 1
_TAG_CONV2D = 2
_TAG_MAXPOOL = 3
_TAG_BATCHNORM = 4
_TAG_DROPOUT = 5
_TAG_RELU = 6
_TAG_FLATTEN = 7
_TAG_DENSE = 8


def _pack_array(arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return struct.pack("<Q", data.size) + data.tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise FormatError("truncated checkpoint payload")
        values = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return values if len(values) > 1 else values[0]

    def array(self, shape) -> np.ndarray:
        count = self.take("<Q")
        expected = int(np.prod(shape))
        if count != expected:
            raise FormatError(f"array holds {count} values, layer expects {expected}")
        nbytes = count * 8
        if self.pos + nbytes > len(self.buf):
            raise FormatError("truncated checkpoint payload")
        arr = np.frombuffer(self.buf, dtype="<f8", count=count, offset=self.pos)
        self.pos += nbytes
        return arr.astype(np.float64).reshape(shape)


def _serialize_layer(layer) -> bytes:
    if isinstance(layer, Conv1D):
        head = struct.pack("<IIIB", _TAG_CONV1D, layer.filter_len, layer.planes,
                           1 if layer.padding == "same" else 0)
        return head + _pack_array(layer.weights) + _pack_array(layer.bias)
    if isinstance(layer, Conv2D):
        head = struct.pack("<IIIIB", _TAG_CONV2D, layer.filter_h, layer.filter_w,
                           layer.planes, 1 if layer.padding == "same" else 0)
        return head + _pack_array(layer.weights) + _pack_array(layer.bias)
    if isinstance(layer, MaxPool):
        return struct.pack("<II", _TAG_MAXPOOL, layer.window)
    if isinstance(layer, BatchNorm):
        head = struct.pack("<Idd", _TAG_BATCHNORM, layer.epsilon, layer.momentum)
        return (head + _pack_array(layer.scale) + _pack_array(layer.shift)
                + _pack_array(layer.running_mean) + _pack_array(layer.running_var))
    if isinstance(layer, Dropout):
        return struct.pack("<Id", _TAG_DROPOUT, layer.rate)
    if isinstance(layer, ReLU):
        return struct.pack("<I", _TAG_RELU)
    if isinstance(layer, Flatten):
        return struct.pack("<I", _TAG_FLATTEN)
    if isinstance(layer, Dense):
        head = struct.pack("<II", _TAG_DENSE, layer.out_dim)
        return head + _pack_array(layer.weights) + _pack_array(layer.bias)
    raise FormatError(f"cannot serialize layer {type(layer).__name__}")


def save_checkpoint(model: FeatureExtractor, codebook: WalshCodebook, path,
                    normalizer: Standardizer | None = None):
    payload = bytearray()
    payload += struct.pack("<III", VERSION, codebook.rank, codebook.class_count)
    payload += struct.pack(f"<{codebook.class_count}I", *codebook.class_rows)
    payload += struct.pack("<I", len(model.input_shape))
    payload += struct.pack(f"<{len(model.input_shape)}I", *model.input_shape)
    payload += struct.pack("<I", len(model.layers))
    for layer in model.layers:
        payload += _serialize_layer(layer)
    if normalizer is not None:
        payload += struct.pack("<I", 1)
        payload += _pack_array(normalizer.mean) + _pack_array(normalizer.std)
    else:
        payload += struct.pack("<I", 0)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload) & 0xFFFFFFFF))


def load_checkpoint(path):
    """Returns (model, codebook, normalizer-or-None)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a DIVF checkpoint (bad magic)")
    payload, (stored_crc,) = blob[4:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(payload) & 0xFFFFFFFF != stored_crc:
        raise FormatError(f"{path}: CRC mismatch, file is corrupted")

    r = _Reader(payload)
    version = r.take("<I")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    rank = r.take("<I")
    class_count = r.take("<I")
    class_rows = r.take(f"<{class_count}I")
    class_rows = (class_rows,) if class_count == 1 else tuple(class_rows)
    ndim = r.take("<I")
    dims = r.take(f"<{ndim}I")
    input_shape = (dims,) if ndim == 1 else tuple(dims)
    layer_count = r.take("<I")

    # rebuild layer objects, wiring as we go so parameter shapes are known
    layers = []
    shape = tuple(input_shape)
    for _ in range(layer_count):
        tag = r.take("<I")
        if tag == _TAG_CONV1D:
            flen, planes, same = r.take("<IIB")
            layer = Conv1D(flen, planes, padding="same" if same else "valid")
            shape = layer.wire(shape)
            layer.weights = r.array((planes, layer.in_planes, flen))
            layer.bias = r.array((planes,))
        elif tag == _TAG_CONV2D:
            fh_, fw, planes, same = r.take("<IIIB")
            layer = Conv2D(fh_, fw, planes, padding="same" if same else "valid")
            shape = layer.wire(shape)
            layer.weights = r.array((planes, layer.in_planes, fh_, fw))
            layer.bias = r.array((planes,))
        elif tag == _TAG_MAXPOOL:
            layer = MaxPool(r.take("<I"))
            shape = layer.wire(shape)
        elif tag == _TAG_BATCHNORM:
            eps, momentum = r.take("<dd")
            layer = BatchNorm(epsilon=eps, momentum=momentum)
            shape = layer.wire(shape)
            layer.scale = r.array((layer.planes,))
            layer.shift = r.array((layer.planes,))
            layer.running_mean = r.array((layer.planes,))
            layer.running_var = r.array((layer.planes,))
        elif tag == _TAG_DROPOUT:
            layer = Dropout(r.take("<d"))
            shape = layer.wire(shape)
        elif tag == _TAG_RELU:
            layer = ReLU()
            shape = layer.wire(shape)
        elif tag == _TAG_FLATTEN:
            layer = Flatten()
            shape = layer.wire(shape)
        elif tag == _TAG_DENSE:
            out_dim = r.take("<I")
            layer = Dense(out_dim)
            shape = layer.wire(shape)
            layer.weights = r.array((out_dim, layer.in_dim))
            layer.bias = r.array((out_dim,))
        else:
            raise FormatError(f"{path}: unknown layer tag {tag}")
        layers.append(layer)

    has_norm = r.take("<I")
    normalizer = None
    if has_norm:
        feature_shape = input_shape[1:] if input_shape[0] == 1 else input_shape
        mean = r.array(feature_shape)
        std = r.array(feature_shape)
        normalizer = Standardizer(mean=mean, std=std)
    if r.pos != len(payload):
        raise FormatError(f"{path}: {len(payload) - r.pos} trailing bytes in payload")

    model = FeatureExtractor(layers, input_shape, rank)
    codebook = WalshCodebook(rank=rank, matrix=build_modified_walsh(rank),
                             class_rows=class_rows)
    return model, codebook, normalizer
