"""Interchannel time-delay estimation on a discrete TDOA grid.

Cross-power phase between the two channels is correlated against steering
phasors for each candidate delay (PHAT weighting: every bin votes with unit
magnitude).  Per-atom variants reweight the vote by an atom's spectral
shape, giving each dictionary atom its own delay estimate.  Three target
localization strategies sit on top: offline max-pooling over a whole file,
an accumulated running max, and a sliding window of recent frames.

Sign convention: positive tau means the right channel lags the left.  A
source delayed by k samples on the right peaks at tau = +k/fs.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

EPS = 1e-12

__all__ = [
    "TdoaGrid",
    "LocalizerState",
    "make_tdoa_grid",
    "steering_matrix",
    "phat_phasor",
    "gcc_phat_frame",
    "gcc_nmf_atom_tdoas",
    "locate_offline",
    "locate_online",
]


@dataclass
class TdoaGrid:
    """Uniform grid of candidate delays in seconds, symmetric about zero."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.size < 2:
            raise ValueError("TDOA grid needs at least 2 points")
        if np.any(np.diff(self.values) <= 0):
            raise ValueError("TDOA grid values must be strictly increasing")
        if abs(self.values[0] + self.values[-1]) > 1e-15 * abs(self.values[-1]):
            raise ValueError("TDOA grid must be symmetric about zero")

    @property
    def n_tdoa(self):
        return self.values.size

    @property
    def tau_max(self):
        return float(self.values[-1])

    @property
    def full_range(self):
        """Total grid span in seconds (2 * tau_max)."""
        return float(self.values[-1] - self.values[0])

    @property
    def spacing(self):
        return self.full_range / (self.n_tdoa - 1)

    def index_of(self, tau):
        """Grid index nearest to a delay in seconds."""
        return int(np.argmin(np.abs(self.values - tau)))


def make_tdoa_grid(n_tdoa=128, mic_distance=0.086, speed_of_sound=343.0,
                   margin=1.25):
    """Grid spanning the physically reachable delays for a microphone pair.

    The span is +-mic_distance/speed_of_sound stretched by a safety margin
    so sources at the endfire extremes still fall inside the grid.
    """
    tau_max = margin * mic_distance / speed_of_sound
    return TdoaGrid(np.linspace(-tau_max, tau_max, n_tdoa))


def steering_matrix(grid, n_bins, frame_size, fs):
    """Per-bin steering phasors exp(-2j*pi*f*tau), shape (bins, K).

    Correlating the interchannel phase (angle V_L - angle V_R) against
    these puts a right-channel lag of delta at tau = +delta.
    """
    f_hz = np.arange(n_bins) * (fs / frame_size)
    return np.exp(-2j * np.pi * np.outer(f_hz, grid.values))


def phat_phasor(spec):
    """Unit-magnitude cross-spectrum phasors, zeroed where either channel dies.

    Entry f carries phase angle(V_L[f]) - angle(V_R[f]); bins whose
    magnitude product falls below EPS contribute nothing.
    """
    cross = spec.left * np.conj(spec.right)
    mag = np.abs(cross)
    out = np.zeros_like(cross)
    alive = mag >= EPS
    out[alive] = cross[alive] / mag[alive]
    return out


def gcc_phat_frame(spec, grid, fs, frame_size=None, steering=None):
    """One frame's angular spectrum: correlation strength per candidate delay."""
    if steering is None:
        if frame_size is None:
            frame_size = 2 * (spec.bins - 1)
        steering = steering_matrix(grid, spec.bins, frame_size, fs)
    phasor = phat_phasor(spec)
    return (phasor[:, None] * steering).real.sum(axis=0)


def gcc_nmf_atom_tdoas(spec, atoms, grid, fs, frame_size=None, steering=None,
                       return_spectra=False):
    """Per-atom delay estimates: each atom votes with its own spectral weights.

    ``atoms`` is (bins, D), columns L1-normalized internally.  Returns the
    argmax grid index per atom (lowest index on ties); optionally also the
    (D, K) matrix of per-atom angular spectra.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    if atoms.shape[0] != spec.bins:
        raise ValueError(
            f"dictionary has {atoms.shape[0]} bins, spectrum has {spec.bins}"
        )
    if steering is None:
        if frame_size is None:
            frame_size = 2 * (spec.bins - 1)
        steering = steering_matrix(grid, spec.bins, frame_size, fs)
    phasor = phat_phasor(spec)
    votes = (phasor[:, None] * steering).real
    weights = atoms / (atoms.sum(axis=0) + EPS)
    spectra = weights.T @ votes
    indices = np.argmax(spectra, axis=1)
    if return_spectra:
        return indices, spectra
    return indices


def locate_offline(angular_frames):
    """Target delay index from a whole recording: max-pool over time, argmax."""
    angular_frames = np.atleast_2d(np.asarray(angular_frames, dtype=np.float64))
    if angular_frames.size == 0:
        raise ValueError("need at least one angular spectrum")
    pooled = angular_frames.max(axis=0)
    return int(np.argmax(pooled))


class LocalizerState:
    """Running target-delay estimate for a live stream.

    ``accumulated`` pools over everything seen so far (the pool never
    decreases anywhere); ``sliding`` pools over the last ``window_frames``
    frames so the estimate can follow a moving source.
    """

    def __init__(self, mode, n_tdoa, window_frames=16):
        if mode not in ("accumulated", "sliding"):
            raise ValueError(f"unknown localizer mode {mode!r}")
        if mode == "sliding" and window_frames < 1:
            raise ValueError("sliding window needs at least 1 frame")
        self.mode = mode
        self.n_tdoa = n_tdoa
        self.window_frames = window_frames
        self.pool = np.full(n_tdoa, -np.inf)
        self.ring = deque(maxlen=window_frames)
        self.tau_index = 0

    def reset(self):
        self.pool = np.full(self.n_tdoa, -np.inf)
        self.ring.clear()
        self.tau_index = 0


def locate_online(state, angular):
    """Fold one angular spectrum into the state, return the current estimate."""
    angular = np.asarray(angular, dtype=np.float64)
    if state.mode == "accumulated":
        np.maximum(state.pool, angular, out=state.pool)
        state.tau_index = int(np.argmax(state.pool))
    else:
        state.ring.append(angular)
        pooled = np.max(np.stack(state.ring), axis=0)
        state.tau_index = int(np.argmax(pooled))
    return state.tau_index
