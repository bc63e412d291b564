"""KL-divergence NMF for magnitude spectrogram dictionaries.

A magnitude spectrogram V (bins x frames) is factored as V ~ W @ H with
multiplicative updates that never increase the generalized KL divergence.
The atoms (columns of W) are learned once from unlabeled audio and then
frozen; at run time only the per-frame activations H are inferred.
"""

from dataclasses import dataclass, field

import numpy as np

EPS = 1e-12

__all__ = [
    "Dictionary",
    "kl_divergence",
    "update_activations",
    "update_atoms",
    "factorize",
    "infer_activations",
    "normalize_columns",
    "pretrain_dictionary",
    "sample_training_frames",
    "copy_to_train",
    "EPS",
]


@dataclass
class Dictionary:
    """Frozen set of nonnegative spectral atoms, one per column.

    ``atoms`` has shape (bins, n_atoms) with unit L1 columns and float32
    storage so a dictionary survives a save/load round trip bit for bit.
    ``fs`` and ``frame_size`` record the analysis the atoms came from.
    """

    atoms: np.ndarray
    fs: int
    frame_size: int

    def __post_init__(self):
        self.atoms = np.ascontiguousarray(self.atoms, dtype=np.float32)
        if self.atoms.ndim != 2:
            raise ValueError(f"atoms must be 2-D, got shape {self.atoms.shape}")
        if np.any(self.atoms < 0):
            raise ValueError("atoms must be nonnegative")

    @property
    def bins(self):
        return self.atoms.shape[0]

    @property
    def n_atoms(self):
        return self.atoms.shape[1]


def kl_divergence(v, w, h):
    """Generalized KL divergence D(V || WH), with 0*log(0) taken as 0."""
    lam = np.maximum(w @ h, EPS)
    ratio = np.zeros_like(v)
    nz = v > 0
    ratio[nz] = v[nz] * np.log(v[nz] / lam[nz])
    return float(np.sum(ratio - v + lam))


def update_activations(v, w, h):
    """One multiplicative step on H, leaving W fixed."""
    lam = np.maximum(w @ h, EPS)
    h *= (w.T @ (v / lam)) / (w.sum(axis=0)[:, None] + EPS)
    return h


def update_atoms(v, w, h):
    """One multiplicative step on W, leaving H fixed."""
    lam = np.maximum(w @ h, EPS)
    w *= ((v / lam) @ h.T) / (h.sum(axis=1)[None, :] + EPS)
    return w


def _uniform_positive(rng, shape):
    # 1 - random() lies in (0, 1]: multiplicative updates cannot revive an
    # entry that starts at exactly zero.
    return 1.0 - rng.random(shape)


def factorize(v, n_atoms, iterations=100, seed=0, return_divergence=False):
    """Full NMF of a spectrogram: alternating W and H updates.

    Returns (W, H), plus the per-iteration KL trace when asked.  The trace
    has ``iterations + 1`` entries including the starting point.
    """
    v = np.asarray(v, dtype=np.float64)
    if np.any(v < 0):
        raise ValueError("spectrogram entries must be nonnegative")
    rng = np.random.default_rng(seed)
    w = _uniform_positive(rng, (v.shape[0], n_atoms))
    h = _uniform_positive(rng, (n_atoms, v.shape[1]))
    trace = [kl_divergence(v, w, h)]
    for _ in range(iterations):
        update_activations(v, w, h)
        update_atoms(v, w, h)
        trace.append(kl_divergence(v, w, h))
    if return_divergence:
        return w, h, np.array(trace)
    return w, h


def infer_activations(v, w, iterations, seed=0, rng=None):
    """Activations of fixed atoms against new frames.

    ``v`` may be a single frame (bins,) or a block (bins, frames).  A fresh
    random H is refined with ``iterations`` multiplicative steps; zero
    iterations returns the random start unmodified.
    """
    v = np.asarray(v, dtype=np.float64)
    squeeze = v.ndim == 1
    if squeeze:
        v = v[:, None]
    w = np.asarray(w, dtype=np.float64)
    if rng is None:
        rng = np.random.default_rng(seed)
    h = _uniform_positive(rng, (w.shape[1], v.shape[1]))
    for _ in range(iterations):
        update_activations(v, w, h)
    return h[:, 0] if squeeze else h


def normalize_columns(w, h=None, rng=None):
    """Scale atoms to unit L1 and push the scale into H.

    Dead atoms (column sum below EPS) are reseeded with uniform positive
    noise so they stay usable; their activations are zeroed.
    """
    w = np.asarray(w, dtype=np.float64).copy()
    h = None if h is None else np.asarray(h, dtype=np.float64).copy()
    scale = w.sum(axis=0)
    dead = scale < EPS
    if np.any(dead):
        if rng is None:
            rng = np.random.default_rng(0)
        w[:, dead] = _uniform_positive(rng, (w.shape[0], int(dead.sum())))
        scale = w.sum(axis=0)
        if h is not None:
            h[dead, :] = 0.0
    w /= scale
    if h is not None:
        h *= scale[:, None]
        return w, h
    return w


def pretrain_dictionary(
    v, n_atoms, fs, frame_size, iterations=100, seed=0, return_divergence=False
):
    """Learn a frozen dictionary from pooled magnitude frames.

    The activations found during training are discarded; only the
    L1-normalized atoms are kept.  Stored as float32, renormalized after the
    cast so saved columns still sum to one.
    """
    out = factorize(v, n_atoms, iterations=iterations, seed=seed,
                    return_divergence=return_divergence)
    w = out[0]
    w = normalize_columns(w, rng=np.random.default_rng(seed + 1))
    w32 = w.astype(np.float32)
    w32 /= w32.sum(axis=0, dtype=np.float32)
    d = Dictionary(atoms=w32, fs=fs, frame_size=frame_size)
    if return_divergence:
        return d, out[2]
    return d


def sample_training_frames(v, n_frames, seed=0):
    """Random frame subset for training, without replacement when possible.

    Returns all frames unchanged when ``n_frames`` meets or exceeds what is
    available; otherwise picks columns in their original time order.
    """
    v = np.asarray(v)
    total = v.shape[1]
    if n_frames >= total:
        return v
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(total, size=n_frames, replace=False))
    return v[:, picks]


def copy_to_train(v, n_atoms, fs, frame_size, seed=0):
    """Baseline dictionary: atoms copied from randomly chosen input frames.

    Sampling is without replacement when enough frames exist.  Frames with
    no energy are floored to EPS before normalization so every atom stays a
    valid distribution over bins.
    """
    v = np.asarray(v, dtype=np.float64)
    rng = np.random.default_rng(seed)
    n_frames = v.shape[1]
    if n_frames >= n_atoms:
        picks = rng.choice(n_frames, size=n_atoms, replace=False)
    else:
        picks = rng.choice(n_frames, size=n_atoms, replace=True)
    w = np.maximum(v[:, picks], EPS)
    w = normalize_columns(w, rng=rng)
    w32 = w.astype(np.float32)
    w32 /= w32.sum(axis=0, dtype=np.float32)
    return Dictionary(atoms=w32, fs=fs, frame_size=frame_size)
