import json

import numpy as np
import pytest

from patk.containers import read_container, write_container
from patk.core import BINARY, MULTILABEL, ChannelData, Image2D, ImageGrid, LabelMask
from patk.errors import (
    BadMagicError,
    HeaderError,
    MaskLabelError,
    NonFiniteValueError,
    PayloadSizeMismatchError,
    TruncatedPayloadError,
)

GRID = ImageGrid(origin_x_mm=-2.0, origin_y_mm=-3.0, pitch_mm=0.1,
                 width_px=7, height_px=5)


def make_channels(n_channels=2, n_samples=4, seed=1):
    rng = np.random.default_rng(seed)
    return ChannelData(samples=rng.normal(size=(n_channels, n_samples)).astype(np.float32),
                       fs_hz=40e6, t0_s=1e-7)


class TestRoundTrips:
    def test_channels(self, tmp_path):
        data = make_channels()
        path = tmp_path / "ch.paz"
        write_container(data, path)
        back = read_container(path)
        assert isinstance(back, ChannelData)
        assert np.array_equal(back.samples, data.samples)
        assert back.fs_hz == data.fs_hz
        assert back.t0_s == data.t0_s

    def test_image(self, tmp_path):
        rng = np.random.default_rng(2)
        img = Image2D(grid=GRID, data=rng.normal(size=GRID.shape).astype(np.float32))
        path = tmp_path / "img.paz"
        write_container(img, path)
        back = read_container(path)
        assert isinstance(back, Image2D)
        assert back.grid == img.grid
        assert np.array_equal(back.data, img.data)

    def test_mask_binary_and_multilabel(self, tmp_path):
        rng = np.random.default_rng(3)
        binary = LabelMask(grid=GRID, labels=(rng.random(GRID.shape) > 0.5).astype(np.int32))
        labels = np.zeros(GRID.shape, dtype=np.int32)
        labels[0, :3] = 1
        labels[3, :2] = 2
        multi = LabelMask(grid=GRID, labels=labels, kind=MULTILABEL)
        for i, mask in enumerate([binary, multi]):
            path = tmp_path / f"m{i}.paz"
            write_container(mask, path)
            back = read_container(path)
            assert isinstance(back, LabelMask)
            assert back.kind == mask.kind
            assert np.array_equal(back.labels, mask.labels)

    def test_degenerate_1x1_image(self, tmp_path):
        grid = ImageGrid(0, 0, 1.0, 1, 1)
        img = Image2D(grid=grid, data=np.zeros((1, 1), dtype=np.float32))
        path = tmp_path / "tiny.paz"
        write_container(img, path)
        back = read_container(path)
        assert back.data.shape == (1, 1)
        assert back.data[0, 0] == 0.0

    def test_maximal_channels(self, tmp_path):
        data = make_channels(512, 4096, seed=5)
        path = tmp_path / "big.paz"
        write_container(data, path)
        back = read_container(path)
        assert np.array_equal(back.samples, data.samples)

    def test_rewrite_is_byte_identical(self, tmp_path):
        data = make_channels()
        p1, p2 = tmp_path / "a.paz", tmp_path / "b.paz"
        write_container(data, p1)
        write_container(read_container(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestErrorPaths:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.paz"
        path.write_bytes(b"XXXX" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            read_container(path)

    def test_truncated_header(self, tmp_path):
        good = tmp_path / "good.paz"
        write_container(make_channels(), good)
        blob = good.read_bytes()
        bad = tmp_path / "trunc.paz"
        bad.write_bytes(blob[:10])
        with pytest.raises(TruncatedPayloadError):
            read_container(bad)

    def test_truncated_payload(self, tmp_path):
        good = tmp_path / "good.paz"
        write_container(make_channels(), good)
        blob = good.read_bytes()
        bad = tmp_path / "trunc.paz"
        bad.write_bytes(blob[:-4])
        with pytest.raises(TruncatedPayloadError):
            read_container(bad)

    def test_payload_size_mismatch(self, tmp_path):
        good = tmp_path / "good.paz"
        write_container(make_channels(), good)
        bad = tmp_path / "extra.paz"
        bad.write_bytes(good.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(PayloadSizeMismatchError):
            read_container(bad)

    def test_header_not_json(self, tmp_path):
        bad = tmp_path / "hdr.paz"
        header = b"not json at all"
        bad.write_bytes(b"PAZ1" + np.uint32(len(header)).tobytes() + header)
        with pytest.raises(HeaderError):
            read_container(bad)

    def test_unknown_kind_and_dtype(self, tmp_path):
        for header, payload in (
            ({"kind": "volume", "dims": [1, 1], "dtype": "f32"}, b"\x00" * 4),
            ({"kind": "image", "dims": [1, 1], "dtype": "f64"}, b"\x00" * 8),
        ):
            text = json.dumps(header).encode()
            path = tmp_path / "h.paz"
            path.write_bytes(b"PAZ1" + np.uint32(len(text)).tobytes() + text + payload)
            with pytest.raises(HeaderError):
                read_container(path)

    def test_non_finite_payload(self, tmp_path):
        good = tmp_path / "img.paz"
        img = Image2D(grid=GRID, data=np.zeros(GRID.shape, dtype=np.float32))
        write_container(img, good)
        blob = bytearray(good.read_bytes())
        blob[-4:] = np.array([np.inf], dtype="<f4").tobytes()
        bad = tmp_path / "inf.paz"
        bad.write_bytes(bytes(blob))
        with pytest.raises(NonFiniteValueError):
            read_container(bad)

    def test_multilabel_density_checked_on_read(self, tmp_path):
        # Hand-craft a mask file whose labels skip 1: never silently relabeled.
        labels = np.zeros(GRID.shape, dtype="<u2")
        labels[0, 0] = 2
        header = {
            "kind": "mask", "dtype": "u16", "dims": list(GRID.shape),
            "grid": {"origin_x_mm": GRID.origin_x_mm, "origin_y_mm": GRID.origin_y_mm,
                     "pitch_mm": GRID.pitch_mm},
            "mask_kind": "multilabel",
        }
        text = json.dumps(header).encode()
        path = tmp_path / "sparse-labels.paz"
        path.write_bytes(b"PAZ1" + np.uint32(len(text)).tobytes() + text + labels.tobytes())
        with pytest.raises(MaskLabelError):
            read_container(path)


class TestPngSidecar:
    def test_round_trip_8bit(self, tmp_path):
        labels = np.zeros(GRID.shape, dtype=np.int32)
        labels[1:3, 2:5] = 1
        mask = LabelMask(grid=GRID, labels=labels, kind=BINARY)
        path = tmp_path / "mask.png"
        write_container(mask, path)
        assert (tmp_path / "mask.json").exists()
        back = read_container(path)
        assert back.kind == BINARY
        assert back.grid == mask.grid
        assert np.array_equal(back.labels, mask.labels)

    def test_round_trip_16bit(self, tmp_path):
        # Labels above 255 force the 16-bit PNG path; still dense 1..K.
        grid = ImageGrid(0.0, 0.0, 0.05, 20, 20)
        labels = np.zeros(grid.shape, dtype=np.int32)
        labels.ravel()[:300] = np.arange(1, 301)
        mask = LabelMask(grid=grid, labels=labels, kind=MULTILABEL)
        path = tmp_path / "mask16.png"
        write_container(mask, path)
        back = read_container(path)
        assert back.kind == MULTILABEL
        assert np.array_equal(back.labels, mask.labels)

    def test_missing_sidecar(self, tmp_path):
        labels = np.zeros(GRID.shape, dtype=np.int32)
        labels[0, 0] = 1
        mask = LabelMask(grid=GRID, labels=labels, kind=BINARY)
        path = tmp_path / "mask.png"
        write_container(mask, path)
        (tmp_path / "mask.json").unlink()
        with pytest.raises(HeaderError):
            read_container(path)

    def test_png_only_for_masks(self, tmp_path):
        img = Image2D(grid=GRID, data=np.zeros(GRID.shape, dtype=np.float32))
        with pytest.raises(TypeError):
            write_container(img, tmp_path / "img.png")
