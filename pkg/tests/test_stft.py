import numpy as np
import pytest

from stereonmf.stft import (
    OlaState,
    algorithmic_latency,
    analyze_frame,
    asymmetric_windows,
    cola_deviation,
    cola_gain,
    cola_profile,
    magnitude_frames,
    periodic_hann,
    symmetric_windows,
    synthesize_frame,
)


def stream_identity(pair, x, dtype):
    """Run samples through analysis + synthesis with no spectral processing."""
    channels, total = x.shape
    r, span = pair.hop, pair.span
    state = OlaState(pair, channels=channels, dtype=dtype)
    n_chunks = -(-(total + span) // r)
    padded = np.zeros((channels, n_chunks * r), dtype=dtype)
    padded[:, :total] = x
    out = []
    for k in range(n_chunks):
        spec = analyze_frame(state, padded[:, k * r : (k + 1) * r])
        out.append(synthesize_frame(state, spec))
    return np.concatenate(out, axis=1)


class TestPeriodicHann:
    def test_matches_direct_formula(self):
        w = periodic_hann(8)
        k = np.arange(8)
        expected = 0.5 * (1.0 - np.cos(2.0 * np.pi * k / 8))
        assert np.allclose(w, expected, atol=1e-15)

    def test_starts_at_zero_never_reaches_it_again(self):
        w = periodic_hann(16)
        assert w[0] == 0.0
        assert np.all(w[1:] > 0.0)

    def test_periodic_not_symmetric(self):
        # The periodic variant peaks at exactly n/2, unlike the symmetric one.
        w = periodic_hann(32)
        assert w[16] == 1.0
        assert w[1] != w[31]  # would be equal for the symmetric window

    @pytest.mark.parametrize("bad", [0, 1, 3, 7, -4])
    def test_rejects_odd_or_tiny_sizes(self, bad):
        with pytest.raises(ValueError):
            periodic_hann(bad)


class TestSymmetricWindows:
    def test_product_is_periodic_hann(self):
        pair = symmetric_windows(64)
        assert np.allclose(pair.product_window, periodic_hann(64), atol=1e-14)

    def test_default_hop_is_quarter_frame(self):
        assert symmetric_windows(1024).hop == 256

    def test_span_equals_frame(self):
        pair = symmetric_windows(256)
        assert pair.span == 256
        assert pair.product_half == 128

    def test_cola_constant_two(self):
        # Periodic Hann at 75% overlap sums to exactly 2 at every offset.
        pair = symmetric_windows(8, hop=2)
        assert np.allclose(cola_profile(pair), 2.0, atol=1e-14)
        pair = symmetric_windows(1024, hop=256)
        assert np.allclose(cola_profile(pair), 2.0, atol=1e-12)
        assert cola_deviation(pair) < 1e-12

    def test_hop_validation(self):
        with pytest.raises(ValueError):
            symmetric_windows(64, hop=0)
        with pytest.raises(ValueError):
            symmetric_windows(64, hop=65)


class TestAsymmetricWindows:
    def test_product_is_right_aligned_hann(self):
        pair = asymmetric_windows(1024, 16)
        prod = pair.product_window
        assert np.allclose(prod[-32:], periodic_hann(32), atol=1e-12)
        assert np.allclose(prod[:-32], 0.0, atol=1e-12)

    def test_analysis_covers_whole_frame(self):
        pair = asymmetric_windows(128, 8)
        assert np.all(pair.analysis[1:] > 0.0)
        assert pair.analysis[0] == 0.0

    def test_synthesis_zero_outside_tail(self):
        pair = asymmetric_windows(128, 8)
        assert np.allclose(pair.synthesis[: 128 - 16], 0.0)
        assert np.all(pair.synthesis[128 - 16 + 1 :] > 0.0)

    def test_default_hop_is_half_m(self):
        assert asymmetric_windows(1024, 16).hop == 8

    def test_cola_constant_two(self):
        pair = asymmetric_windows(1024, 16, hop=8)
        assert np.allclose(cola_profile(pair), 2.0, atol=1e-12)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            asymmetric_windows(64, 32)  # 2M == N
        with pytest.raises(ValueError):
            asymmetric_windows(64, 0)
        with pytest.raises(ValueError):
            asymmetric_windows(63, 16)  # N - M odd


class TestRoundTrip:
    @pytest.mark.parametrize(
        "dtype,tol", [(np.float64, 1e-10), (np.float32, 1e-5)]
    )
    def test_symmetric_identity_delays_by_frame(self, dtype, tol):
        rng = np.random.default_rng(11)
        pair = symmetric_windows(64, hop=16)
        x = rng.standard_normal((2, 1000)).astype(dtype)
        y = stream_identity(pair, x, dtype)
        assert np.allclose(y[:, :64], 0.0, atol=tol)
        rel = np.sqrt(
            np.sum((y[:, 64 : 64 + 1000] - x) ** 2) / np.sum(x**2)
        )
        assert rel < tol

    @pytest.mark.parametrize(
        "dtype,tol", [(np.float64, 1e-10), (np.float32, 1e-5)]
    )
    def test_asymmetric_identity_delays_by_2m(self, dtype, tol):
        rng = np.random.default_rng(12)
        pair = asymmetric_windows(256, 8, hop=4)
        x = rng.standard_normal((2, 500)).astype(dtype)
        y = stream_identity(pair, x, dtype)
        assert np.allclose(y[:, :16], 0.0, atol=tol)
        rel = np.sqrt(np.sum((y[:, 16 : 16 + 500] - x) ** 2) / np.sum(x**2))
        assert rel < tol

    def test_mono_stream(self):
        rng = np.random.default_rng(13)
        pair = symmetric_windows(32, hop=8)
        x = rng.standard_normal((1, 200))
        y = stream_identity(pair, x, np.float64)
        rel = np.sqrt(np.sum((y[:, 32:232] - x) ** 2) / np.sum(x**2))
        assert rel < 1e-10

    def test_sine_preserved_exactly(self):
        # A pure tone survives windowing untouched at any bin, on or off grid.
        pair = symmetric_windows(64, hop=16)
        t = np.arange(800)
        x = np.sin(2 * np.pi * 0.0437 * t)[None, :]
        y = stream_identity(pair, x, np.float64)
        assert np.allclose(y[:, 64:864], x, atol=1e-10)


class TestStreamingState:
    def test_chunk_shape_enforced(self):
        pair = symmetric_windows(64, hop=16)
        state = OlaState(pair, channels=2)
        with pytest.raises(ValueError):
            analyze_frame(state, np.zeros((2, 15)))
        with pytest.raises(ValueError):
            analyze_frame(state, np.zeros((1, 16)))

    def test_warmup_frame_count(self):
        pair = symmetric_windows(64, hop=16)
        state = OlaState(pair)
        assert state.warmup_frames == 4
        assert state.in_warmup()
        for _ in range(4):
            spec = analyze_frame(state, np.zeros((2, 16)))
            synthesize_frame(state, spec)
        assert not state.in_warmup()

    def test_spectrum_bin_count(self):
        pair = symmetric_windows(128, hop=32)
        state = OlaState(pair)
        spec = analyze_frame(state, np.zeros((2, 32)))
        assert spec.bins == 65
        assert spec.left.shape == (65,)


class TestLatency:
    def test_symmetric_scales_with_frame(self):
        ola, total = algorithmic_latency(symmetric_windows(512, hop=128), fs=16000)
        assert ola == 32.0
        assert total == 40.0

    def test_asymmetric_scales_with_synthesis_span(self):
        ola, total = algorithmic_latency(asymmetric_windows(512, 32, hop=16), fs=16000)
        assert ola == 4.0
        assert total == 5.0


class TestMagnitudeFrames:
    def test_shape_and_tone_peak(self):
        pair = symmetric_windows(64, hop=16)
        t = np.arange(640)
        x = np.sin(2 * np.pi * 8 / 64 * t)  # lands exactly on bin 8
        v = magnitude_frames(x, pair)
        assert v.shape[0] == 33
        assert v.shape[1] == 40
        # Steady-state columns put their energy at bin 8.
        assert np.argmax(v[:, 20]) == 8

    def test_stereo_concatenates_channels(self):
        x = np.zeros((2, 320))
        v = magnitude_frames(x, symmetric_windows(64, hop=16))
        assert v.shape == (33, 40)
