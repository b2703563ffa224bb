# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""SEGT binary tensor files.

The format exchanges tensors bit-exactly with external inference processes.
All multi-byte fields are little-endian regardless of host order.

Layout:
    offset 0   magic    4 bytes  b"SEGT"
    offset 4   version  1 byte   = 1
    offset 5   dtype    1 byte   0 = u8, 1 = f32
    offset 6   rank     1 byte
    offset 7   dims     rank x u32
    then       payload  product(dims) x itemsize, row-major

A rank-0 file holds exactly one value. Label maps may also be read from
8-bit grayscale PNG files; that alternative exists only for loading.
"""

from __future__ import annotations

import enum
import math
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from .errors import (
    BadMagic,
    IoFailure,
    ShapeMismatch,
    TrailingData,
    TruncatedPayload,
    UnreadableLabel,
    UnsupportedDtype,
    UnsupportedVersion,
    ValidationError,
)
from .tensors import Image, LabelMap, SoftPrediction, argmax_labels

MAGIC = b"SEGT"
VERSION = 1
HEADER_FIXED = 7

PathLike = Union[str, Path]


class DType(enum.IntEnum):
    U8 = 0
    F32 = 1

    @property
    def numpy(self) -> np.dtype:
        return np.dtype("<u1") if self is DType.U8 else np.dtype("<f4")

    @property
    def itemsize(self) -> int:
        return 1 if self is DType.U8 else 4


@dataclass(frozen=True)
class TensorFile:
    """Parsed SEGT header plus raw little-endian payload bytes."""

    dtype: DType
    dims: Tuple[int, ...]
    payload: bytes

    def __post_init__(self) -> None:
        object.__setattr__(self, "dtype", DType(self.dtype))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) > 255:
            raise ValidationError(f"rank {len(self.dims)} does not fit the header")
        for d in self.dims:
            if d < 0 or d > 0xFFFFFFFF:
                raise ValidationError(f"dimension {d} does not fit a u32")
        if len(self.payload) != self.expected_payload_size:
            raise ValidationError(
                f"payload holds {len(self.payload)} bytes, dims {self.dims} need {self.expected_payload_size}")

    @property
    def rank(self) -> int:
        return len(self.dims)

    @property
    def count(self) -> int:
        return math.prod(self.dims)

    @property
    def expected_payload_size(self) -> int:
        return self.count * self.dtype.itemsize

    def to_array(self) -> np.ndarray:
        """Return the payload as a read-only native-endian numpy array."""
        arr = np.frombuffer(self.payload, dtype=self.dtype.numpy).reshape(self.dims)
        return arr.astype(arr.dtype.newbyteorder("="), copy=False)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "TensorFile":
        arr = np.asarray(array)
        if arr.dtype == np.uint8:
            dtype = DType.U8
        elif arr.dtype in (np.float32, np.float64):
            dtype = DType.F32
        else:
            raise ValidationError(f"unsupported array dtype {arr.dtype}; use uint8 or float32")
        payload = np.ascontiguousarray(arr, dtype=dtype.numpy).tobytes()
        return cls(dtype, arr.shape, payload)

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack("<BBB", VERSION, int(self.dtype), self.rank)
        header += struct.pack(f"<{self.rank}I", *self.dims)
        return header + self.payload


def parse_tensor(buffer: bytes | memoryview, path: str | None = None, start: int = 0) -> Tuple[TensorFile, int]:
    """Parse one SEGT tensor beginning at byte ``start`` of ``buffer``.

    Offsets in errors and the returned end are counted from the start of
    ``buffer``, so containers can report positions within the whole file.

    Returns:
        (tensor, offset one past the payload)
    """
    view = memoryview(buffer)
    size = len(view)
    if size < start + 4 or bytes(view[start:start + 4]) != MAGIC:
        raise BadMagic("missing SEGT magic", start, path)
    if size < start + HEADER_FIXED:
        raise TruncatedPayload("header ends early", size, path)
    version, dtype_code, rank = struct.unpack_from("<BBB", view, start + 4)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version} is not supported", start + 4, path)
    if dtype_code not in (DType.U8, DType.F32):
        raise UnsupportedDtype(f"dtype code {dtype_code} is not supported", start + 5, path)
    dims_end = start + HEADER_FIXED + 4 * rank
    if size < dims_end:
        raise TruncatedPayload("dimension list ends early", size, path)
    dims = struct.unpack_from(f"<{rank}I", view, start + HEADER_FIXED)
    dtype = DType(dtype_code)
    end = dims_end + math.prod(dims) * dtype.itemsize
    if size < end:
        raise TruncatedPayload(f"payload needs {end - dims_end} bytes", size, path)
    return TensorFile(dtype, dims, bytes(view[dims_end:end])), end


def decode_tensor(buffer: bytes, path: str | None = None) -> TensorFile:
    tensor, end = parse_tensor(buffer, path)
    if end != len(buffer):
        raise TrailingData(f"{len(buffer) - end} unexpected bytes after payload", end, path)
    return tensor


def read_tensor(path: PathLike) -> TensorFile:
    """Read and validate a SEGT file."""
    try:
        buffer = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read tensor file ({e.strerror})", str(path)) from e
    return decode_tensor(buffer, str(path))


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write bytes through a temp file + rename so readers never see partial files."""
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile("wb", delete=False, dir=str(target.parent),
                                         prefix=f".{target.name}.", suffix=".tmp") as tmp:
            tmp.write(data)
            tmp_path = Path(tmp.name)
        tmp_path.replace(target)
    except OSError as e:
        raise IoFailure(f"cannot write file ({e.strerror})", str(path)) from e


def write_tensor(t: TensorFile, path: PathLike) -> None:
    atomic_write_bytes(path, t.to_bytes())


def write_array(array: np.ndarray, path: PathLike) -> None:
    write_tensor(TensorFile.from_array(array), path)


# -----------------------------------------------------------------------------
# Typed loaders used by the CLI boundary
# -----------------------------------------------------------------------------

def _read_png_label(path: Path) -> LabelMap:
    try:
        with PILImage.open(path) as img:
            if img.mode != "L":
                raise UnreadableLabel(f"PNG label must be 8-bit grayscale, got mode {img.mode}", str(path))
            return LabelMap(np.asarray(img, dtype=np.uint8))
    except (OSError, UnidentifiedImageError) as e:
        raise UnreadableLabel(f"cannot decode PNG label ({e})", str(path)) from e


def load_label_map(path: PathLike) -> LabelMap:
    """Load a label map from a u8 rank-2 SEGT file or an 8-bit grayscale PNG."""
    path = Path(path)
    if path.suffix.lower() == ".png":
        return _read_png_label(path)
    try:
        tensor = read_tensor(path)
    except IoFailure as e:
        raise UnreadableLabel(str(e)) from e
    if tensor.dtype is not DType.U8 or tensor.rank != 2:
        raise UnreadableLabel(f"label tensor must be u8 H x W, got {tensor.dtype.name} dims {tensor.dims}", str(path))
    return LabelMap(tensor.to_array())


def load_soft_prediction(path: PathLike, normalized: bool = True) -> SoftPrediction:
    tensor = read_tensor(path)
    if tensor.dtype is not DType.F32 or tensor.rank != 3:
        raise ShapeMismatch(f"soft prediction must be f32 K x H x W, got {tensor.dtype.name} dims {tensor.dims}: {path}")
    return SoftPrediction(tensor.to_array(), normalized=normalized)


def load_prediction_labels(path: PathLike) -> LabelMap:
    """Load hard predictions: a label map, or a soft prediction argmaxed on load."""
    path = Path(path)
    if path.suffix.lower() != ".png":
        tensor = read_tensor(path)
        if tensor.dtype is DType.F32 and tensor.rank == 3:
            return argmax_labels(SoftPrediction(tensor.to_array(), normalized=False))
    return load_label_map(path)


def load_image(path: PathLike) -> Image:
    """Load an RGB image from a u8 H x W x 3 SEGT file or any Pillow-readable file."""
    path = Path(path)
    if path.suffix.lower() == ".segt":
        tensor = read_tensor(path)
        if tensor.dtype is not DType.U8 or tensor.rank != 3 or tensor.dims[2] != 3:
            raise ShapeMismatch(f"image tensor must be u8 H x W x 3, got dims {tensor.dims}: {path}")
        return Image(tensor.to_array())
    try:
        with PILImage.open(path) as img:
            return Image(np.asarray(img.convert("RGB"), dtype=np.uint8))
    except (OSError, UnidentifiedImageError) as e:
        raise IoFailure(f"cannot decode image ({e})", str(path)) from e
