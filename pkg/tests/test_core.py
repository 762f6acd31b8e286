import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patk.core import (
    BINARY,
    MULTILABEL,
    ArrayGeometry,
    ChannelData,
    Ellipse,
    Image2D,
    ImageGrid,
    LabelMask,
    PromptPoint,
    RegionStats,
    Volume3D,
    fold_theta,
    pixel_to_world,
    world_to_pixel,
)
from patk.errors import ChannelCountMismatchError, GridMismatchError, MaskLabelError


GRID = ImageGrid(origin_x_mm=-25.0, origin_y_mm=-25.0, pitch_mm=0.1,
                 width_px=500, height_px=500)


class TestImageGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            ImageGrid(0, 0, 0.0, 10, 10)
        with pytest.raises(ValueError):
            ImageGrid(0, 0, 0.1, 0, 10)

    def test_shape_and_extent(self):
        assert GRID.shape == (500, 500)
        x_min, x_max, y_min, y_max = GRID.extent()
        assert (x_min, y_min) == (-25.0, -25.0)
        assert x_max == pytest.approx(24.9)
        assert y_max == pytest.approx(24.9)


class TestCoordinateMapping:
    def test_origin_identity(self):
        assert pixel_to_world(0, 0, GRID) == (-25.0, -25.0)

    def test_far_corner(self):
        x, y = pixel_to_world(499, 499, GRID)
        assert x == pytest.approx(24.9, abs=1e-12)
        assert y == pytest.approx(24.9, abs=1e-12)

    def test_round_trip_random(self):
        rng = np.random.default_rng(7)
        ix = rng.uniform(-100, 600, size=1000)
        iy = rng.uniform(-100, 600, size=1000)
        x, y = pixel_to_world(ix, iy, GRID)
        jx, jy = world_to_pixel(x, y, GRID)
        np.testing.assert_allclose(jx, ix, atol=1e-9)
        np.testing.assert_allclose(jy, iy, atol=1e-9)

    @given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
    @settings(max_examples=50)
    def test_round_trip_property(self, ix, iy):
        x, y = pixel_to_world(ix, iy, GRID)
        jx, jy = world_to_pixel(x, y, GRID)
        # <= 1e-9 mm expressed in pixels at 0.1 mm pitch
        assert abs(jx - ix) <= 1e-8
        assert abs(jy - iy) <= 1e-8

    def test_vector_mapping(self):
        ix = np.array([0, 250, 499])
        x, _ = pixel_to_world(ix, np.zeros(3), GRID)
        np.testing.assert_allclose(x, [-25.0, 0.0, 24.9])


class TestImage2D:
    def test_rejects_non_finite(self):
        data = np.zeros((500, 500), dtype=np.float32)
        data[3, 4] = np.nan
        with pytest.raises(ValueError):
            Image2D(grid=GRID, data=data)

    def test_readonly_and_float32(self):
        img = Image2D(grid=GRID, data=np.zeros(GRID.shape))
        assert img.data.dtype == np.float32
        with pytest.raises(ValueError):
            img.data[0, 0] = 1.0

    def test_grid_check(self):
        img = Image2D(grid=GRID, data=np.zeros(GRID.shape))
        other = Image2D(grid=ImageGrid(0, 0, 0.1, 500, 500),
                        data=np.zeros(GRID.shape))
        with pytest.raises(GridMismatchError):
            img.same_grid(other)


class TestLabelMask:
    def test_binary_rejects_two(self):
        labels = np.zeros((500, 500), dtype=np.int32)
        labels[0, 0] = 2
        with pytest.raises(MaskLabelError):
            LabelMask(grid=GRID, labels=labels, kind=BINARY)

    def test_multilabel_requires_dense(self):
        labels = np.zeros((500, 500), dtype=np.int32)
        labels[0, 0] = 1
        labels[1, 1] = 3  # label 2 missing
        with pytest.raises(MaskLabelError):
            LabelMask(grid=GRID, labels=labels, kind=MULTILABEL)

    def test_multilabel_dense_ok(self):
        labels = np.zeros((500, 500), dtype=np.int32)
        labels[0, 0] = 1
        labels[1, 1] = 2
        mask = LabelMask(grid=GRID, labels=labels, kind=MULTILABEL)
        assert mask.n_labels == 2
        assert mask.foreground().sum() == 2

    def test_rejects_negative_and_float(self):
        with pytest.raises(MaskLabelError):
            LabelMask(grid=GRID, labels=np.full(GRID.shape, -1, dtype=np.int32))
        with pytest.raises(MaskLabelError):
            LabelMask(grid=GRID, labels=np.zeros(GRID.shape, dtype=np.float32))


class TestChannelData:
    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelData(samples=np.zeros((2, 4), dtype=np.float32), fs_hz=0.0)
        with pytest.raises(ValueError):
            ChannelData(samples=np.zeros(4, dtype=np.float32), fs_hz=1.0)
        bad = np.zeros((2, 4), dtype=np.float32)
        bad[0, 0] = np.inf
        with pytest.raises(ValueError):
            ChannelData(samples=bad, fs_hz=1.0)

    def test_shape_properties(self):
        data = ChannelData(samples=np.zeros((3, 7), dtype=np.float32), fs_hz=1e6)
        assert data.n_channels == 3
        assert data.n_samples == 7
        assert data.t0_s == 0.0


class TestArrayGeometry:
    def test_channel_count_check(self):
        geo = ArrayGeometry(elements=np.zeros((4, 2)))
        data = ChannelData(samples=np.zeros((3, 5), dtype=np.float32), fs_hz=1e6)
        with pytest.raises(ChannelCountMismatchError):
            geo.check_channels(data)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ArrayGeometry(elements=np.zeros((4, 3)))


class TestEllipse:
    def test_axis_order(self):
        with pytest.raises(ValueError):
            Ellipse(0, 0, 5.0, 8.0, 0.0)
        with pytest.raises(ValueError):
            Ellipse(0, 0, 5.0, 3.0, 3.0)  # theta out of fold range

    def test_contains(self):
        e = Ellipse(1.0, 2.0, 4.0, 2.0, 0.0)
        assert e.contains(1.0, 2.0)
        assert e.contains(4.99, 2.0)
        assert not e.contains(5.01, 2.0)
        assert e.contains(1.0, 3.99) and not e.contains(1.0, 4.01)

    @given(st.floats(-20, 20))
    @settings(max_examples=50)
    def test_fold_theta(self, theta):
        folded = fold_theta(theta)
        assert -np.pi / 2 < folded <= np.pi / 2
        # Same axis direction modulo pi.
        assert abs(np.sin(folded - theta)) < 1e-9


class TestPromptPoint:
    def test_label_validation(self):
        with pytest.raises(ValueError):
            PromptPoint(0, 0, 2)

    def test_bounds(self):
        PromptPoint(499, 499, 1).check_inside(GRID)
        with pytest.raises(ValueError):
            PromptPoint(500, 0, 1).check_inside(GRID)


class TestVolumeAndStats:
    def test_volume_grid_mismatch(self):
        a = Image2D(grid=GRID, data=np.zeros(GRID.shape))
        other = Image2D(grid=ImageGrid(0, 0, 0.1, 500, 500),
                        data=np.zeros(GRID.shape))
        with pytest.raises(GridMismatchError):
            Volume3D(slices=(a, other), step_mm=0.1)
        with pytest.raises(ValueError):
            Volume3D(slices=(), step_mm=0.1)

    def test_region_stats_validation(self):
        with pytest.raises(ValueError):
            RegionStats(label=1, area_px=0, area_mm2=0.0, mean_intensity=0.0,
                        centroid_px=(0.0, 0.0))
