"""Per-atom TDOA masks and the two spectral filters built on them.

Atoms whose delay estimate falls inside a window around the target keep
their contribution; the rest are suppressed.  The Wiener-like filter
weights atoms by inferred activations; the phase-based filter gives every
atom unit activation, so its gains depend only on the dictionary and the
mask, never on input magnitudes.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .stft import StereoSpectrum

EPS = 1e-12

__all__ = [
    "MaskParams",
    "binary_mask",
    "soft_mask",
    "mask_for_frame",
    "filter_gains",
    "wiener_filter",
    "phase_filter",
]


@dataclass(frozen=True)
class MaskParams:
    """Mask shape and filter mode.

    ``epsilon`` (binary window width) and ``alpha`` (soft half-width) are
    fractions of the full TDOA grid range; a binary window of width eps
    keeps atoms within eps/2 of the target on either side, so soft masking
    with beta=inf and eta=0 reproduces binary masking when alpha = eps/2.
    ``beta`` is the soft falloff exponent, math.inf selecting the hard
    limit.  ``eta`` is the suppression floor.
    """

    epsilon: float = 3 / 64
    alpha: float = 3 / 16
    beta: float = math.inf
    eta: float = 0.0
    mode: str = "binary"
    coefficient_mode: str = "all_ones"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0 or inf, got {self.beta}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.mode not in ("binary", "soft"):
            raise ValueError(f"unknown mask mode {self.mode!r}")
        if self.coefficient_mode not in ("inferred", "all_ones"):
            raise ValueError(
                f"unknown coefficient mode {self.coefficient_mode!r}"
            )

    def updated(self, **changes):
        """Copy with fields replaced; validation reruns on the copy."""
        return replace(self, **changes)

    def to_dict(self):
        """JSON-safe form; beta=inf crosses the wire as the string "inf"."""
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "beta": "inf" if math.isinf(self.beta) else self.beta,
            "eta": self.eta,
            "mode": self.mode,
            "coefficient_mode": self.coefficient_mode,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("beta") in ("inf", "Infinity"):
            d["beta"] = math.inf
        return cls(**d)


def _tdoa_distances(atom_tdoas, target_index, grid):
    """Distance in seconds between each atom's delay and the target's."""
    atom_tdoas = np.asarray(atom_tdoas, dtype=np.intp)
    return np.abs(grid.values[atom_tdoas] - grid.values[target_index])


def binary_mask(atom_tdoas, target_index, params, grid):
    """1 for atoms strictly inside the half-window, 0 outside."""
    dist = _tdoa_distances(atom_tdoas, target_index, grid)
    half_window = 0.5 * params.epsilon * grid.full_range
    return (dist < half_window).astype(np.float64)


def soft_mask(atom_tdoas, target_index, params, grid):
    """Exponential falloff from 1 at the target to the floor eta far away."""
    dist = _tdoa_distances(atom_tdoas, target_index, grid)
    width = params.alpha * grid.full_range
    if math.isinf(params.beta):
        core = (dist < width).astype(np.float64)
    else:
        core = np.exp(-((dist / width) ** params.beta))
    return (1.0 - params.eta) * core + params.eta


def mask_for_frame(atom_tdoas, target_index, params, grid):
    """Binary or soft mask per params.mode."""
    if params.mode == "binary":
        return binary_mask(atom_tdoas, target_index, params, grid)
    return soft_mask(atom_tdoas, target_index, params, grid)


def filter_gains(atoms, activations, mask):
    """Per-channel, per-bin gains: masked reconstruction over full one.

    ``atoms`` is (bins, D), ``activations`` (channels, D), ``mask`` (D,).
    The shared denominator guard keeps gains finite on silent frames; it
    also means an all-ones mask lands within EPS of unit gain rather than
    exactly on it.
    """
    atoms = np.asarray(atoms, dtype=np.float64)
    activations = np.atleast_2d(np.asarray(activations, dtype=np.float64))
    masked = (activations * mask) @ atoms.T
    full = activations @ atoms.T
    return masked / (full + EPS)


def wiener_filter(spec, atoms, activations, mask, return_gains=False):
    """Scale each bin by the masked share of its activation reconstruction."""
    gains = filter_gains(atoms, activations, mask)
    out = StereoSpectrum(gains * spec.data)
    if return_gains:
        return out, gains
    return out


def phase_filter(spec, atoms, mask, return_gains=False):
    """Activation-free variant: every atom weighs in with unit activation.

    Shares the gain code path with the Wiener filter so the two agree bit
    for bit when the Wiener activations are all ones.  Gains are real and
    nonnegative, so interchannel phase is untouched.
    """
    channels = spec.data.shape[0]
    ones = np.ones((channels, np.asarray(atoms).shape[1]))
    gains = filter_gains(atoms, ones, mask)
    out = StereoSpectrum(gains * spec.data)
    if return_gains:
        return out, gains
    return out
