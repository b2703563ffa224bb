# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Checkpoint parameter sets and their element-wise average.

Container file layout (little-endian):
    u32                 entry count
    per entry:
        u16             name length in bytes
        name            UTF-8
        SEGT tensor     f32, any rank
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np

from .errors import (
    EmptyList,
    IoFailure,
    NameMismatch,
    NonFiniteInput,
    ShapeMismatch,
    TrailingData,
    TruncatedPayload,
    UnsupportedDtype,
    ValidationError,
)
from .tensor_io import DType, TensorFile, atomic_write_bytes, parse_tensor

PathLike = Union[str, Path]


@dataclass(frozen=True)
class ParameterSet:
    """Ordered named float32 tensors of one checkpoint."""

    entries: Tuple[Tuple[str, np.ndarray], ...]

    def __post_init__(self) -> None:
        seen = set()
        frozen = []
        for name, tensor in self.entries:
            if name in seen:
                raise ValidationError(f"duplicate parameter name {name!r}")
            seen.add(name)
            arr = np.array(tensor, dtype=np.float32, copy=True)
            if not np.all(np.isfinite(arr)):
                raise NonFiniteInput(f"parameter {name!r} holds non-finite values")
            arr.setflags(write=False)
            frozen.append((name, arr))
        object.__setattr__(self, "entries", tuple(frozen))

    @property
    def names(self) -> List[str]:
        return [name for name, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self.entries)

    def __getitem__(self, name: str) -> np.ndarray:
        for key, arr in self.entries:
            if key == name:
                return arr
        raise KeyError(name)


def average_parameters(sets: Sequence[ParameterSet]) -> ParameterSet:
    """Element-wise mean of every named tensor across the sets.

    Values are accumulated in float64 after sorting along the set axis, so
    the result is independent of the order of ``sets``.
    """
    if not sets:
        raise EmptyList("average_parameters needs at least one parameter set")
    reference = sets[0]
    for i, other in enumerate(sets[1:], start=2):
        if other.names != reference.names:
            raise NameMismatch(f"parameter set {i} names differ from set 1")
    averaged = []
    for index, (name, first) in enumerate(reference.entries):
        stack = []
        for i, ps in enumerate(sets, start=1):
            arr = ps.entries[index][1]
            if arr.shape != first.shape:
                raise ShapeMismatch(f"parameter {name!r} has shape {arr.shape} in set {i}, {first.shape} in set 1")
            stack.append(arr.astype(np.float64))
        total = np.sort(np.stack(stack), axis=0).sum(axis=0)
        averaged.append((name, (total / len(sets)).astype(np.float32)))
    return ParameterSet(tuple(averaged))


def encode_parameter_set(ps: ParameterSet) -> bytes:
    parts = [struct.pack("<I", len(ps))]
    for name, arr in ps:
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValidationError(f"parameter name longer than 65535 bytes: {name[:40]}...")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(TensorFile.from_array(arr).to_bytes())
    return b"".join(parts)


def decode_parameter_set(buffer: bytes, path: str | None = None) -> ParameterSet:
    """Decode a parameter-set file; error offsets count from the start of the file."""
    view = memoryview(buffer)
    size = len(view)
    if size < 4:
        raise TruncatedPayload("entry count ends early", size, path)
    (count,) = struct.unpack_from("<I", view, 0)
    offset = 4
    entries = []
    for _ in range(count):
        if size < offset + 2:
            raise TruncatedPayload("name length ends early", size, path)
        (length,) = struct.unpack_from("<H", view, offset)
        offset += 2
        if size < offset + length:
            raise TruncatedPayload("name ends early", size, path)
        try:
            name = bytes(view[offset:offset + length]).decode("utf-8")
        except UnicodeDecodeError as e:
            raise IoFailure(f"parameter name at offset {offset} is not UTF-8", path) from e
        tensor_start = offset + length
        tensor, offset = parse_tensor(view, path, start=tensor_start)
        if tensor.dtype is not DType.F32:
            raise UnsupportedDtype(f"parameter {name!r} must be f32", tensor_start + 5, path)
        entries.append((name, tensor.to_array()))
    if offset != size:
        raise TrailingData(f"{size - offset} unexpected bytes after last entry", offset, path)
    return ParameterSet(tuple(entries))


def read_parameter_set(path: PathLike) -> ParameterSet:
    try:
        buffer = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(f"cannot read parameter file ({e.strerror})", str(path)) from e
    return decode_parameter_set(buffer, str(path))


def write_parameter_set(ps: ParameterSet, path: PathLike) -> None:
    atomic_write_bytes(path, encode_parameter_set(ps))
