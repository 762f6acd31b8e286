import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patk.core import Ellipse, ImageGrid
from patk.errors import ChannelIndexError, RecordTooShortError, SourceOutsideGridError
from patk.forward import (
    DEFAULT_FC_HZ,
    MediumModel,
    Phantom,
    add_noise,
    medium_from_config,
    phantom_from_config,
    ring_array,
    simulate,
    subset_channels,
    wavelet,
)

FS = 40e6


class TestWavelet:
    def test_zero_at_origin(self):
        assert wavelet(0.0) == 0.0

    @given(st.floats(-1e-6, 1e-6))
    @settings(max_examples=100)
    def test_odd_symmetry(self, t):
        assert wavelet(-t) == -wavelet(t)

    def test_peak_normalized(self):
        # Numeric max over t in +-6 sigma at 1e5 samples.
        sigma = 1.0 / (2 * np.pi * DEFAULT_FC_HZ)
        t = np.linspace(-6 * sigma, 6 * sigma, 100_000)
        peak = np.abs(wavelet(t)).max()
        assert peak == pytest.approx(1.0, abs=1e-6)

    def test_spectrum_peaks_at_fc(self):
        # Discrete-transform oracle on a finely sampled, zero-padded pulse.
        dt = 1e-9
        t = (np.arange(4096) - 2048) * dt
        w = wavelet(t)
        spectrum = np.abs(np.fft.rfft(w, n=1 << 18))
        freqs = np.fft.rfftfreq(1 << 18, dt)
        f_peak = freqs[np.argmax(spectrum)]
        assert abs(f_peak - DEFAULT_FC_HZ) <= 0.02 * DEFAULT_FC_HZ

    def test_fc_validation(self):
        with pytest.raises(ValueError):
            wavelet(0.0, fc_hz=0.0)


class TestPhantomAndMedium:
    def test_phantom_validation(self):
        with pytest.raises(ValueError):
            Phantom(sources=())
        with pytest.raises(ValueError):
            Phantom(sources=((0.0, 0.0, -1.0),))

    def test_medium_validation(self):
        with pytest.raises(ValueError):
            MediumModel(mode="dual", c_out_m_s=1500.0)  # missing boundary
        with pytest.raises(ValueError):
            MediumModel(mode="uniform", c_out_m_s=900.0)  # unphysical
        with pytest.raises(ValueError):
            MediumModel(mode="airborne")

    def test_config_round_trip(self):
        ph = phantom_from_config({"sources": [[1.0, 2.0, 3.0]]})
        assert ph.sources == ((1.0, 2.0, 3.0),)
        med = medium_from_config({"mode": "dual", "c_out": 1500, "c_in": 1560,
                                  "boundary": {"cx": 0, "cy": 0, "a": 12, "b": 8,
                                               "theta": 0.2}})
        assert med.boundary.a_mm == 12.0

    def test_tof_reciprocity_exact(self):
        e = Ellipse(1.0, -2.0, 10.0, 6.0, 0.3)
        med = MediumModel(mode="dual", c_out_m_s=1500.0, c_in_m_s=1560.0, boundary=e)
        rng = np.random.default_rng(11)
        for _ in range(200):
            p = rng.uniform(-20, 20, 2)
            q = rng.uniform(-20, 20, 2)
            if np.all(p == q):
                continue
            assert med.tof(p, q) == med.tof(q, p)


class TestSimulate:
    def test_equidistant_center_source(self):
        # Ring center: every channel records the same flight time, so the
        # peak sample index agrees across all channels and sits within the
        # pulse half-width of fs*tau.
        geo = ring_array(256, 50.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        data = simulate(Phantom(sources=((0.0, 0.0, 1.0),)), geo, med,
                        fs_hz=FS, n_samples=2048)
        peaks = np.argmax(np.abs(data.samples), axis=1)
        assert np.all(peaks == peaks[0])
        expected = round(FS * (0.05 / 1500.0))
        assert abs(int(peaks[0]) - expected) <= 2

    def test_superposition_identical(self):
        geo = ring_array(16, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        two = simulate(Phantom(sources=((1.0, 2.0, 1.0), (1.0, 2.0, 1.0))), geo, med,
                       fs_hz=FS, n_samples=1024)
        one = simulate(Phantom(sources=((1.0, 2.0, 2.0),)), geo, med,
                       fs_hz=FS, n_samples=1024)
        assert np.array_equal(two.samples, one.samples)

    def test_linearity(self):
        geo = ring_array(16, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        kw = dict(fs_hz=FS, n_samples=1024)
        a = simulate(Phantom(sources=((1.0, 2.0, 1.0),)), geo, med, **kw)
        b = simulate(Phantom(sources=((-3.0, 0.5, 1.0),)), geo, med, **kw)
        ab = simulate(Phantom(sources=((1.0, 2.0, 1.0), (-3.0, 0.5, 1.0))), geo, med, **kw)
        combined = a.samples.astype(np.float64) + b.samples.astype(np.float64)
        scale = np.abs(combined).max()
        assert np.abs(ab.samples - combined).max() <= 1e-6 * scale

    def test_dual_degenerate_bit_identical(self):
        geo = ring_array(16, 20.0)
        e = Ellipse(0.0, 0.0, 8.0, 5.0, 0.1)
        uniform = MediumModel(mode="uniform", c_out_m_s=1500.0)
        dual = MediumModel(mode="dual", c_out_m_s=1500.0, c_in_m_s=1500.0, boundary=e)
        kw = dict(fs_hz=FS, n_samples=1024)
        ph = Phantom(sources=((1.0, 2.0, 1.0), (0.0, -4.0, 0.5)))
        assert np.array_equal(simulate(ph, geo, uniform, **kw).samples,
                              simulate(ph, geo, dual, **kw).samples)

    def test_record_too_short(self):
        geo = ring_array(16, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        with pytest.raises(RecordTooShortError):
            simulate(Phantom(sources=((0.0, 0.0, 1.0),)), geo, med,
                     fs_hz=FS, n_samples=100)

    def test_source_outside_grid(self):
        geo = ring_array(16, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        grid = ImageGrid(-5.0, -5.0, 0.1, 100, 100)
        with pytest.raises(SourceOutsideGridError):
            simulate(Phantom(sources=((8.0, 0.0, 1.0),)), geo, med,
                     fs_hz=FS, n_samples=2048, grid=grid)

    def test_time_shift_property(self):
        # Moving the source radially away from an element shifts that
        # element's response by fs * (delta d) / c samples.
        geo = ring_array(16, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        kw = dict(fs_hz=FS, n_samples=2048)
        near = simulate(Phantom(sources=((10.0, 0.0, 1.0),)), geo, med, **kw)
        far = simulate(Phantom(sources=((8.0, 0.0, 1.0),)), geo, med, **kw)
        # Element 0 sits at (20, 0): moving 10 -> 8 adds 2 mm of path.
        xc = np.correlate(far.samples[0].astype(np.float64),
                          near.samples[0].astype(np.float64), mode="full")
        shift = int(np.argmax(xc)) - (kw["n_samples"] - 1)
        expected = 0.002 / 1500.0 * FS
        assert abs(shift - expected) <= 1.0

    def test_decay_mode_attenuates(self):
        geo = ring_array(4, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        kw = dict(fs_hz=FS, n_samples=1024)
        ph = Phantom(sources=((10.0, 0.0, 1.0),))  # 10 mm from element 0, 30 from element 2
        data = simulate(ph, geo, med, decay_mode=True, **kw)
        # Pulse energy is insensitive to sampling phase; amplitude falls as
        # 1/sqrt(d), so energy falls as 1/d.
        e0 = np.sum(data.samples[0].astype(np.float64) ** 2)
        e2 = np.sum(data.samples[2].astype(np.float64) ** 2)
        assert e0 / e2 == pytest.approx(30.0 / 10.0, rel=1e-2)


class TestSubsetChannels:
    def make(self):
        geo = ring_array(256, 50.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        data = simulate(Phantom(sources=((3.0, 1.0, 1.0),)), geo, med,
                        fs_hz=FS, n_samples=2048)
        return data, geo

    def test_identity(self):
        data, geo = self.make()
        sub, sub_geo = subset_channels(data, geo, np.arange(256))
        assert np.array_equal(sub.samples, data.samples)
        assert np.array_equal(sub_geo.elements, geo.elements)

    def test_half_ring(self):
        data, geo = self.make()
        sub, sub_geo = subset_channels(data, geo, np.arange(128))
        assert sub.n_channels == 128
        ang = np.arctan2(sub_geo.elements[:, 1], sub_geo.elements[:, 0])
        ang = np.mod(ang, 2 * np.pi)
        # 128 contiguous elements of a 256-ring span 180 degrees.
        assert ang.max() - ang.min() == pytest.approx(np.pi * 127 / 128, rel=1e-9)

    def test_even_sparse_doubles_gap(self):
        data, geo = self.make()
        sub, sub_geo = subset_channels(data, geo, np.arange(0, 256, 2))
        ang = np.unwrap(np.arctan2(sub_geo.elements[:, 1], sub_geo.elements[:, 0]))
        gaps = np.diff(ang)
        assert np.allclose(gaps, 2 * (2 * np.pi / 256), atol=1e-12)

    def test_composition(self):
        data, geo = self.make()
        idx1 = np.arange(0, 256, 2)
        idx2 = np.arange(0, 128, 4)
        once_data, once_geo = subset_channels(*subset_channels(data, geo, idx1), idx2)
        direct_data, direct_geo = subset_channels(data, geo, idx1[idx2])
        assert np.array_equal(once_data.samples, direct_data.samples)
        assert np.array_equal(once_geo.elements, direct_geo.elements)

    def test_bad_indices(self):
        data, geo = self.make()
        with pytest.raises(ChannelIndexError):
            subset_channels(data, geo, [5, 3])
        with pytest.raises(ChannelIndexError):
            subset_channels(data, geo, [0, 256])
        with pytest.raises(ChannelIndexError):
            subset_channels(data, geo, [])


class TestNoise:
    def test_seeded_reproducible(self):
        geo = ring_array(8, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        data = simulate(Phantom(sources=((0.0, 0.0, 1.0),)), geo, med,
                        fs_hz=FS, n_samples=1024)
        n1 = add_noise(data, snr=10.0, seed=42)
        n2 = add_noise(data, snr=10.0, seed=42)
        n3 = add_noise(data, snr=10.0, seed=43)
        assert np.array_equal(n1.samples, n2.samples)
        assert not np.array_equal(n1.samples, n3.samples)

    def test_snr_scaling(self):
        geo = ring_array(8, 20.0)
        med = MediumModel(mode="uniform", c_out_m_s=1500.0)
        data = simulate(Phantom(sources=((0.0, 0.0, 1.0),)), geo, med,
                        fs_hz=FS, n_samples=4096)
        noisy = add_noise(data, snr=10.0, seed=0)
        resid = noisy.samples.astype(np.float64) - data.samples.astype(np.float64)
        expected_std = np.abs(data.samples).max() / 10.0
        assert resid.std() == pytest.approx(expected_std, rel=0.05)
