# =============================================================================
# segfuse - Segmentation fusion and evaluation toolkit
# SPDX-License-Identifier: BSD-3-Clause
# Copyright (c) 2025 Michael Gardner, A Bit of Help, Inc.
# See LICENSE file in the project root.
# =============================================================================

"""Unit tests for the SEGT tensor file format and typed loaders."""

import struct

import numpy as np
import pytest
from PIL import Image as PILImage

from segfuse.errors import (
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
from segfuse.tensor_io import (
    DType,
    TensorFile,
    decode_tensor,
    load_image,
    load_label_map,
    load_prediction_labels,
    load_soft_prediction,
    parse_tensor,
    read_tensor,
    write_array,
    write_tensor,
)


class TestEncoding:
    """Byte layout of encoded tensors."""

    def test_one_by_one_label_is_sixteen_bytes(self):
        data = TensorFile(DType.U8, (1, 1), b"\x07").to_bytes()
        assert len(data) == 16
        assert data[:4] == b"SEGT"
        assert data[4:7] == bytes([1, 0, 2])
        assert struct.unpack("<II", data[7:15]) == (1, 1)
        assert data[15] == 7

    def test_rank_zero_holds_one_value(self):
        data = TensorFile(DType.F32, (), struct.pack("<f", 2.5)).to_bytes()
        assert len(data) == 7 + 4
        assert decode_tensor(data).to_array() == np.float32(2.5)

    def test_dims_and_floats_are_little_endian(self):
        arr = np.array([[1.0, -2.0, 0.5]], dtype=np.float32)
        data = TensorFile.from_array(arr).to_bytes()
        assert data[7:15] == b"\x01\x00\x00\x00\x03\x00\x00\x00"
        assert data[15:19] == struct.pack("<f", 1.0)

    def test_float64_input_is_stored_as_f32(self):
        tensor = TensorFile.from_array(np.array([0.25, 0.5]))
        assert tensor.dtype is DType.F32
        assert tensor.to_array().dtype == np.float32

    def test_unsupported_array_dtype_rejected(self):
        with pytest.raises(ValidationError):
            TensorFile.from_array(np.array([1, 2], dtype=np.int32))

    def test_payload_size_checked(self):
        with pytest.raises(ValidationError):
            TensorFile(DType.F32, (2, 2), b"\x00" * 15)

    def test_round_trip_preserves_bits(self, rng):
        arr = rng.standard_normal((3, 5, 4)).astype(np.float32)
        arr[0, 0, 0] = -0.0
        back = decode_tensor(TensorFile.from_array(arr).to_bytes()).to_array()
        assert back.tobytes() == arr.tobytes()
        assert back.shape == (3, 5, 4)


class TestDecodingErrors:
    """Malformed buffers name the error kind and the byte offset."""

    def valid(self) -> bytes:
        return TensorFile(DType.U8, (2, 3), bytes(range(6))).to_bytes()

    def test_bad_magic(self):
        data = b"XEGT" + self.valid()[4:]
        with pytest.raises(BadMagic) as exc:
            decode_tensor(data)
        assert exc.value.offset == 0

    def test_unsupported_version(self):
        data = bytearray(self.valid())
        data[4] = 2
        with pytest.raises(UnsupportedVersion) as exc:
            decode_tensor(bytes(data))
        assert exc.value.offset == 4

    def test_unsupported_dtype(self):
        data = bytearray(self.valid())
        data[5] = 9
        with pytest.raises(UnsupportedDtype) as exc:
            decode_tensor(bytes(data))
        assert exc.value.offset == 5

    def test_truncated_dims(self):
        with pytest.raises(TruncatedPayload):
            decode_tensor(self.valid()[:10])

    def test_truncated_payload(self):
        data = self.valid()[:-1]
        with pytest.raises(TruncatedPayload) as exc:
            decode_tensor(data)
        assert exc.value.offset == len(data)

    def test_trailing_data(self):
        data = self.valid()
        with pytest.raises(TrailingData) as exc:
            decode_tensor(data + b"\x00")
        assert exc.value.offset == len(data)

    def test_format_errors_are_io_failures(self):
        with pytest.raises(IoFailure):
            decode_tensor(b"")

    def test_parse_reports_consumed_bytes(self):
        data = self.valid()
        tensor, end = parse_tensor(data + b"rest")
        assert end == len(data)
        assert tensor.dims == (2, 3)

    def test_parse_at_offset_reports_absolute_positions(self):
        data = b"hdr" + self.valid()
        tensor, end = parse_tensor(memoryview(data), start=3)
        assert end == len(data)
        assert tensor.payload == bytes(range(6))
        with pytest.raises(BadMagic) as exc:
            parse_tensor(data, start=2)
        assert exc.value.offset == 2
        with pytest.raises(TruncatedPayload) as exc:
            parse_tensor(data[:-2], start=3)
        assert exc.value.offset == len(data) - 2


class TestFiles:
    def test_write_then_read(self, tmp_path, rng):
        arr = rng.integers(0, 256, size=(4, 6), dtype=np.uint8)
        path = tmp_path / "nested" / "a.segt"
        write_array(arr, path)
        assert np.array_equal(read_tensor(path).to_array(), arr)
        assert list(path.parent.iterdir()) == [path]

    def test_missing_file_is_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            read_tensor(tmp_path / "absent.segt")

    def test_write_tensor_overwrites(self, tmp_path):
        path = tmp_path / "x.segt"
        write_tensor(TensorFile(DType.U8, (1,), b"\x01"), path)
        write_tensor(TensorFile(DType.U8, (1,), b"\x02"), path)
        assert read_tensor(path).payload == b"\x02"


class TestLoaders:
    def test_label_from_png(self, write_png_label):
        arr = np.array([[0, 1], [255, 3]], dtype=np.uint8)
        lbl = load_label_map(write_png_label("l.png", arr))
        assert np.array_equal(lbl.data, arr)

    def test_rgb_png_is_not_a_label(self, tmp_path):
        path = tmp_path / "rgb.png"
        PILImage.new("RGB", (2, 2)).save(path)
        with pytest.raises(UnreadableLabel):
            load_label_map(path)

    def test_float_tensor_is_not_a_label(self, write_segt):
        path = write_segt("f.segt", np.zeros((2, 2), dtype=np.float32))
        with pytest.raises(UnreadableLabel):
            load_label_map(path)

    def test_soft_prediction_requires_rank_three(self, write_segt):
        path = write_segt("p.segt", np.zeros((2, 2), dtype=np.float32))
        with pytest.raises(ShapeMismatch):
            load_soft_prediction(path)

    def test_prediction_labels_argmax_soft_input(self, write_segt):
        soft = np.array([[[0.2, 0.7]], [[0.8, 0.3]]], dtype=np.float32)
        lbl = load_prediction_labels(write_segt("p.segt", soft))
        assert lbl.data.tolist() == [[1, 0]]

    def test_prediction_labels_accept_label_maps(self, write_segt):
        arr = np.array([[2, 0]], dtype=np.uint8)
        assert load_prediction_labels(write_segt("p.segt", arr)).data.tolist() == [[2, 0]]

    def test_image_from_segt_and_png(self, tmp_path, write_segt, rng):
        arr = rng.integers(0, 256, size=(3, 4, 3), dtype=np.uint8)
        assert np.array_equal(load_image(write_segt("i.segt", arr)).data, arr)
        png = tmp_path / "i.png"
        PILImage.fromarray(arr).save(png)
        assert np.array_equal(load_image(png).data, arr)

    def test_image_segt_needs_three_channels(self, write_segt):
        with pytest.raises(ShapeMismatch):
            load_image(write_segt("i.segt", np.zeros((3, 4, 2), dtype=np.uint8)))
