"""Two-channel speech enhancement from NMF spectral atoms gated by time-delay estimates.

The working parts, in processing order:

- stft: analysis/synthesis window pairs (symmetric and low-latency
  asymmetric), streaming overlap-add state.
- nmf: KL-divergence multiplicative updates, dictionary pre-learning.
- localize: GCC-PHAT angular spectra, per-atom delay estimates, target
  localization.
- masking: delay-window masks over atoms and the resulting per-bin gains.
- pipeline: the streaming engine tying the stages together.
- audio_io, evaluate, protocol, service, cli: files, synthetic scoring,
  and the live control surface.
"""

from .audio_io import (
    AudioBuffer,
    load_dictionary,
    read_wav,
    save_dictionary,
    write_wav,
)
from .localize import TdoaGrid, gcc_phat_frame, locate_offline, make_tdoa_grid
from .masking import MaskParams
from .nmf import Dictionary, copy_to_train, factorize, pretrain_dictionary
from .pipeline import Enhancer, EnhancerConfig, enhance_file
from .stft import (
    OlaState,
    StereoSpectrum,
    WindowPair,
    algorithmic_latency,
    asymmetric_windows,
    symmetric_windows,
)

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "Dictionary",
    "Enhancer",
    "EnhancerConfig",
    "MaskParams",
    "OlaState",
    "StereoSpectrum",
    "TdoaGrid",
    "WindowPair",
    "algorithmic_latency",
    "asymmetric_windows",
    "copy_to_train",
    "enhance_file",
    "factorize",
    "gcc_phat_frame",
    "load_dictionary",
    "locate_offline",
    "make_tdoa_grid",
    "pretrain_dictionary",
    "read_wav",
    "save_dictionary",
    "symmetric_windows",
    "write_wav",
    "__version__",
]
