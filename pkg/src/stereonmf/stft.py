"""Streaming STFT analysis/synthesis with symmetric and asymmetric window pairs.

The symmetric pair is the usual square-root Hann analysis/synthesis couple.
The asymmetric pair combines a long analysis window with a short synthesis
window whose product is a Hann window right-aligned in the frame, so the
input-to-output delay is governed by the short synthesis window rather than
the full frame.  Overlap-add state is kept per stream in :class:`OlaState`.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "WindowPair",
    "StereoSpectrum",
    "OlaState",
    "periodic_hann",
    "symmetric_windows",
    "asymmetric_windows",
    "cola_profile",
    "cola_gain",
    "cola_deviation",
    "analyze_frame",
    "synthesize_frame",
    "algorithmic_latency",
    "magnitude_frames",
]


def periodic_hann(n):
    """Periodic Hann window: 0.5*(1 - cos(2*pi*k/n)) for k in [0, n)."""
    if n < 2 or n % 2 != 0:
        raise ValueError(f"periodic Hann window size must be even and >= 2, got {n}")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


@dataclass
class WindowPair:
    """Analysis/synthesis window couple plus the hop they are used at.

    ``product_half`` is M: the elementwise product analysis*synthesis is a
    periodic Hann window of size 2M occupying the last 2M samples of the
    frame (for the symmetric pair 2M == frame_size).  The overlap-add delay
    of a stream built on this pair is exactly ``span`` samples.
    """

    analysis: np.ndarray
    synthesis: np.ndarray
    frame_size: int
    product_half: int
    hop: int
    kind: str  # "symmetric" | "asymmetric"

    @property
    def span(self):
        """Width of the product window in samples (2M)."""
        return 2 * self.product_half

    @property
    def product_window(self):
        return self.analysis * self.synthesis

    def __post_init__(self):
        if self.hop < 1:
            raise ValueError(f"hop must be >= 1, got {self.hop}")
        if self.hop > self.span:
            raise ValueError(
                f"hop {self.hop} exceeds product window span {self.span}"
            )


def symmetric_windows(frame_size, hop=None):
    """Square-root periodic Hann analysis and synthesis windows.

    Default hop is frame_size // 4 (75% overlap).
    """
    root = np.sqrt(periodic_hann(frame_size))
    if hop is None:
        hop = frame_size // 4
    return WindowPair(
        analysis=root,
        synthesis=root.copy(),
        frame_size=frame_size,
        product_half=frame_size // 2,
        hop=hop,
        kind="symmetric",
    )


def asymmetric_windows(frame_size, product_half, hop=None):
    """Long analysis window paired with a short right-aligned synthesis window.

    With N = frame_size and M = product_half, the analysis window rises as
    the left half of a square-root Hann of size 2(N-M) and falls as the
    right half of a square-root Hann of size 2M.  The synthesis window is
    zero before N-2M, a ratio segment on [N-2M, N-M), and the same falling
    square-root Hann on [N-M, N).  Their product is the periodic Hann of
    size 2M occupying [N-2M, N).  Default hop is M // 2 (75% overlap of the
    synthesis span).
    """
    n, m = frame_size, product_half
    if m < 1:
        raise ValueError(f"product_half must be >= 1, got {m}")
    if 2 * m >= n:
        raise ValueError(f"need 2*product_half < frame_size, got 2*{m} >= {n}")
    if (n - m) % 2 != 0:
        raise ValueError(f"frame_size - product_half must be even, got {n}-{m}")

    long_root = np.sqrt(periodic_hann(2 * (n - m)))
    short_hann = periodic_hann(2 * m)
    short_root = np.sqrt(short_hann)

    analysis = np.zeros(n)
    analysis[: n - m] = long_root[: n - m]
    analysis[n - m :] = short_root[m:]

    synthesis = np.zeros(n)
    ratio_den = long_root[n - 2 * m : n - m]
    # The left edge of the rising sqrt-Hann is strictly positive on this
    # open segment (its only zero sits at index 0 < n-2m).
    assert np.all(ratio_den > 0.0)
    synthesis[n - 2 * m : n - m] = short_hann[:m] / ratio_den
    synthesis[n - m :] = short_root[m:]

    if hop is None:
        hop = max(1, m // 2)
    return WindowPair(
        analysis=analysis,
        synthesis=synthesis,
        frame_size=n,
        product_half=m,
        hop=hop,
        kind="asymmetric",
    )


def cola_profile(pair):
    """Steady-state overlap-add sum of the product window, one hop period."""
    prod = pair.product_window
    r = pair.hop
    profile = np.zeros(r)
    for n in range(r):
        profile[n] = prod[n::r].sum()
    return profile


def cola_gain(pair):
    """Mean steady-state overlap-add gain of the product window."""
    return float(cola_profile(pair).mean())


def cola_deviation(pair):
    """Max relative deviation of the overlap-add sum from its mean."""
    profile = cola_profile(pair)
    mean = profile.mean()
    return float(np.abs(profile - mean).max() / mean)


@dataclass
class StereoSpectrum:
    """One-sided complex spectra of one frame, shape (channels, bins)."""

    data: np.ndarray

    @property
    def left(self):
        return self.data[0]

    @property
    def right(self):
        return self.data[1]

    @property
    def bins(self):
        return self.data.shape[1]

    def magnitudes(self):
        return np.abs(self.data)


class OlaState:
    """Per-stream ring buffers for streaming analysis and overlap-add synthesis.

    Input side keeps the most recent ``frame_size`` samples per channel,
    zero-primed at start.  Output side accumulates synthesis-windowed frames
    and emits ``hop`` fully-summed samples per frame, delayed by exactly
    ``pair.span`` samples relative to the input and divided by the
    overlap-add gain so identity processing reconstructs the input.
    """

    def __init__(self, pair, channels=2, dtype=np.float32):
        self.pair = pair
        self.channels = channels
        self.dtype = np.dtype(dtype)
        n, r, span = pair.frame_size, pair.hop, pair.span
        self._in_ring = np.zeros((channels, n), dtype=self.dtype)
        self._out_acc = np.zeros((channels, span + r), dtype=self.dtype)
        self._analysis = pair.analysis.astype(self.dtype)
        self._synthesis = pair.synthesis.astype(self.dtype)
        self._gain = cola_gain(pair)
        self.frames_in = 0
        self.samples_emitted = 0

    @property
    def warmup_frames(self):
        """Frames whose output precedes the first real input sample."""
        return -(-self.pair.span // self.pair.hop)  # ceil

    def in_warmup(self):
        return self.frames_in < self.warmup_frames


def analyze_frame(state, samples, pair=None):
    """Push ``hop`` new samples per channel and return the windowed spectrum.

    ``samples`` has shape (channels, hop).  Returns the one-sided complex
    spectrum (frame_size//2 + 1 bins) of the analysis-windowed frame.
    """
    pair = pair or state.pair
    r = pair.hop
    samples = np.asarray(samples, dtype=state.dtype)
    if samples.shape != (state.channels, r):
        raise ValueError(
            f"expected {(state.channels, r)} samples, got {samples.shape}"
        )
    state._in_ring[:, :-r] = state._in_ring[:, r:]
    state._in_ring[:, -r:] = samples
    state.frames_in += 1
    windowed = state._in_ring * state._analysis
    return StereoSpectrum(np.fft.rfft(windowed, axis=1))


def synthesize_frame(state, spectrum, pair=None):
    """Inverse-transform, synthesis-window, overlap-add, emit ``hop`` samples."""
    pair = pair or state.pair
    n, r, span = pair.frame_size, pair.hop, pair.span
    frame = np.fft.irfft(spectrum.data, n=n, axis=1).astype(state.dtype)
    frame *= state._synthesis
    state._out_acc[:, r:] += frame[:, n - span :]
    out = state._out_acc[:, :r] / state._gain
    state._out_acc[:, :-r] = state._out_acc[:, r:]
    state._out_acc[:, -r:] = 0.0
    state.samples_emitted += r
    return out.astype(state.dtype)


def algorithmic_latency(pair, fs=16000):
    """(overlap-add latency, total latency) in milliseconds.

    The overlap-add stage delays the signal by the product window span
    (frame_size for symmetric pairs, 2M for asymmetric ones); real-time
    operation adds one hop of processing budget on top.
    """
    span = pair.span
    ola_ms = 1000.0 * span / fs
    total_ms = 1000.0 * (span + pair.hop) / fs
    return ola_ms, total_ms


def magnitude_frames(samples, pair, dtype=np.float64):
    """Magnitude spectrogram of a signal, shape (bins, frames).

    ``samples`` is (T,) mono or (channels, T); channels are analyzed
    independently and concatenated along the frame axis.  The signal is
    zero-padded at both ends the way the streaming engine would see it.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=dtype))
    channels, total = samples.shape
    r = pair.hop
    n_frames = -(-total // r)
    padded = np.zeros((channels, n_frames * r), dtype=dtype)
    padded[:, :total] = samples
    columns = []
    for c in range(channels):
        state = OlaState(pair, channels=1, dtype=dtype)
        for k in range(n_frames):
            spec = analyze_frame(state, padded[c : c + 1, k * r : (k + 1) * r], pair)
            columns.append(np.abs(spec.data[0]))
    return np.stack(columns, axis=1)
