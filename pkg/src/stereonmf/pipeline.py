"""Frame-by-frame enhancement engine and the offline two-pass file driver.

Each hop of input advances the whole chain: windowed spectra, interchannel
delay voting, target tracking, per-atom masking, spectral gains, then
overlap-add back to samples.  Control changes (mask parameters, delay
override, localizer mode, dictionary swap) arrive through a mailbox and are
drained exactly once at each frame boundary, so a frame never sees a
half-applied update.
"""

import queue
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .localize import (
    LocalizerState,
    locate_offline,
    locate_online,
    phat_phasor,
    steering_matrix,
)
from .masking import MaskParams, filter_gains, mask_for_frame
from .nmf import EPS, infer_activations
from .stft import (
    OlaState,
    StereoSpectrum,
    algorithmic_latency,
    analyze_frame,
    synthesize_frame,
)

__all__ = ["EnhancerConfig", "TelemetrySnapshot", "Enhancer", "enhance_file"]


@dataclass
class EnhancerConfig:
    """Everything a stream needs; immutable during a frame.

    ``inference_iterations`` selects the activation strategy: -1 skips
    inference entirely (all-ones coefficients, the phase-based filter), 0
    keeps the random initialization, n > 0 refines it with n multiplicative
    updates.  The mask's ``coefficient_mode`` must agree: "all_ones" pairs
    with -1, "inferred" with >= 0.
    """

    dictionary: object
    window: object
    grid: object
    fs: int = 16000
    mask: MaskParams = field(default_factory=MaskParams)
    localizer_mode: str = "accumulated"
    sliding_frames: int = 16
    inference_iterations: int = -1
    tdoa_override: int = None
    seed: int = 0
    dtype: object = np.float32

    def __post_init__(self):
        expected_bins = self.window.frame_size // 2 + 1
        if self.dictionary.bins != expected_bins:
            raise ValueError(
                f"dictionary has {self.dictionary.bins} bins, window needs "
                f"{expected_bins}"
            )
        if self.dictionary.fs != self.fs:
            raise ValueError(
                f"dictionary trained at {self.dictionary.fs} Hz, stream at {self.fs}"
            )
        if self.localizer_mode not in ("offline", "accumulated", "sliding"):
            raise ValueError(f"unknown localizer mode {self.localizer_mode!r}")
        if self.sliding_frames < 1:
            raise ValueError("sliding_frames must be >= 1")
        if self.inference_iterations < -1:
            raise ValueError("inference_iterations must be >= -1")
        if self.tdoa_override is not None and not (
            0 <= self.tdoa_override < self.grid.n_tdoa
        ):
            raise ValueError(
                f"tdoa_override {self.tdoa_override} outside grid of "
                f"{self.grid.n_tdoa}"
            )

    @property
    def uses_inference(self):
        return (
            self.mask.coefficient_mode == "inferred"
            and self.inference_iterations >= 0
        )


@dataclass
class TelemetrySnapshot:
    """State of the last processed frame, for monitoring and the live UI."""

    frame_index: int
    tau_index: int
    angular: np.ndarray  # (K,) float32
    mask: np.ndarray  # (D,) float32
    gains: np.ndarray  # (F,) float32, channel mean
    latency_ms: float
    frame_time_us: float


class Enhancer:
    """Single-stream engine: one owner advances it one hop at a time."""

    def __init__(self, config):
        self.config = config
        self._ola = OlaState(config.window, channels=2, dtype=config.dtype)
        self._localizer = LocalizerState(
            "accumulated" if config.localizer_mode == "offline"
            else config.localizer_mode,
            config.grid.n_tdoa,
            window_frames=config.sliding_frames,
        )
        self._rng = np.random.default_rng(config.seed)
        self._mailbox = queue.Queue()
        steering = steering_matrix(
            config.grid, config.dictionary.bins, config.window.frame_size,
            config.fs,
        )
        # split into contiguous parts: the vote matmul below needs a dense
        # float operand, and .real of a complex array is a strided view
        self._steer_re = np.ascontiguousarray(steering.real)
        self._steer_im = np.ascontiguousarray(steering.imag)
        self._set_atoms(config.dictionary)
        self.frame_index = 0
        self.telemetry = None
        self.last_gains = None  # (2, F) float64, for shadow evaluation
        self.total_frame_time_us = 0.0
        ola_ms, total_ms = algorithmic_latency(config.window, config.fs)
        self.latency_ms = total_ms
        self.ola_latency_ms = ola_ms

    def _set_atoms(self, dictionary):
        atoms = dictionary.atoms.astype(np.float64)
        self._atoms = atoms
        # per-atom delay votes use L1-normalized spectral weights; kept
        # transposed and dense for the per-frame matmul
        self._atom_weights_t = np.ascontiguousarray(
            (atoms / (atoms.sum(axis=0) + EPS)).T
        )

    @property
    def hop(self):
        return self.config.window.hop

    @property
    def span(self):
        return self.config.window.span

    def post(self, **changes):
        """Queue config changes; they land at the next frame boundary.

        Accepted keys are the EnhancerConfig field names ``mask``,
        ``tdoa_override``, ``localizer_mode``, ``sliding_frames``, and
        ``dictionary``.  Validation happens at application time, on the
        caller's thread nothing is checked.
        """
        self._mailbox.put(changes)

    def _drain_mailbox(self):
        while True:
            try:
                changes = self._mailbox.get_nowait()
            except queue.Empty:
                return
            new_config = replace(self.config, **changes)  # revalidates
            if "dictionary" in changes:
                self._set_atoms(new_config.dictionary)
            if ("localizer_mode" in changes or "sliding_frames" in changes):
                mode = new_config.localizer_mode
                self._localizer = LocalizerState(
                    "accumulated" if mode == "offline" else mode,
                    new_config.grid.n_tdoa,
                    window_frames=new_config.sliding_frames,
                )
            self.config = new_config

    def process_frame(self, samples):
        """R stereo samples in, R enhanced stereo samples out (span delayed)."""
        started = time.perf_counter()
        self._drain_mailbox()
        config = self.config

        spec = analyze_frame(self._ola, samples)
        phasor = phat_phasor(spec)
        # real part of phasor * steering, with both operands dense
        votes = phasor.real[:, None] * self._steer_re
        votes -= phasor.imag[:, None] * self._steer_im
        angular = votes.sum(axis=0)

        online = locate_online(self._localizer, angular)
        tau_index = (
            config.tdoa_override if config.tdoa_override is not None else online
        )

        atom_spectra = self._atom_weights_t @ votes
        atom_tdoas = np.argmax(atom_spectra, axis=1)
        mask = mask_for_frame(atom_tdoas, tau_index, config.mask, config.grid)

        if config.uses_inference:
            mags = spec.magnitudes().T  # (F, 2)
            acts = infer_activations(
                mags, self._atoms, config.inference_iterations, rng=self._rng
            ).T
        else:
            acts = np.ones((2, self._atoms.shape[1]))

        gains = filter_gains(self._atoms, acts, mask)
        out = synthesize_frame(self._ola, StereoSpectrum(gains * spec.data))

        self.frame_index += 1
        self.last_gains = gains
        elapsed_us = (time.perf_counter() - started) * 1e6
        self.total_frame_time_us += elapsed_us
        self.telemetry = TelemetrySnapshot(
            frame_index=self.frame_index,
            tau_index=int(tau_index),
            angular=angular.astype(np.float32),
            mask=mask.astype(np.float32),
            gains=gains.mean(axis=0).astype(np.float32),
            latency_ms=self.latency_ms,
            frame_time_us=elapsed_us,
        )
        return out

    @property
    def mean_frame_ms(self):
        if self.frame_index == 0:
            return 0.0
        return self.total_frame_time_us / self.frame_index / 1000.0

    def run(self, samples):
        """Stream a whole (2, T) array through, delay-compensated.

        Pads with the engine's own delay, so the output aligns with the
        input sample for sample and has the same length.
        """
        samples = np.atleast_2d(np.asarray(samples))
        if samples.shape[0] != 2:
            raise ValueError("enhancement needs a stereo signal")
        total = samples.shape[1]
        r, span = self.hop, self.span
        n_chunks = -(-(total + span) // r)
        padded = np.zeros((2, n_chunks * r), dtype=self.config.dtype)
        padded[:, :total] = samples
        chunks = [
            self.process_frame(padded[:, k * r : (k + 1) * r])
            for k in range(n_chunks)
        ]
        out = np.concatenate(chunks, axis=1)
        return out[:, span : span + total]


def enhance_file(config, buffer):
    """Offline driver: enhance an AudioBuffer, preserving length and alignment.

    With the offline localizer a first analysis-only pass pools angular
    spectra over the whole file and pins the resulting delay estimate for
    the second, enhancing pass.  Other modes stream in a single pass.
    """
    from .audio_io import AudioBuffer

    if buffer.channels != 2:
        raise ValueError("enhancement needs a stereo file")
    if buffer.fs != config.fs:
        raise ValueError(
            f"file is {buffer.fs} Hz but the engine expects {config.fs}; "
            "resample upstream"
        )

    if config.localizer_mode == "offline" and config.tdoa_override is None:
        tau = _offline_tau(config, buffer.samples)
        config = replace(config, tdoa_override=tau)

    engine = Enhancer(config)
    out = engine.run(buffer.samples.astype(config.dtype))
    return AudioBuffer(samples=out.astype(np.float32), fs=buffer.fs), engine


def _offline_tau(config, samples):
    """Pass 1: pool delay votes over every frame of the file."""
    r = config.window.hop
    total = samples.shape[1]
    n_chunks = max(1, -(-total // r))
    padded = np.zeros((2, n_chunks * r), dtype=config.dtype)
    padded[:, :total] = samples
    ola = OlaState(config.window, channels=2, dtype=config.dtype)
    steering = steering_matrix(
        config.grid, config.dictionary.bins, config.window.frame_size, config.fs
    )
    steer_re = np.ascontiguousarray(steering.real)
    steer_im = np.ascontiguousarray(steering.imag)
    angular = np.empty((n_chunks, config.grid.n_tdoa))
    for k in range(n_chunks):
        spec = analyze_frame(ola, padded[:, k * r : (k + 1) * r])
        phasor = phat_phasor(spec)
        angular[k] = phasor.real @ steer_re - phasor.imag @ steer_im
    return locate_offline(angular)
