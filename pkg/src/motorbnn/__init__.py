"""Acoustic fault detection for electric motors with a sampled Bayesian neural network."""

from motorbnn.audio_io import Segment, SignalRecord, load_wav, segment, write_wav
from motorbnn.model import ModelConfig, NetworkParams, NetworkShape
from motorbnn.sampler import ChainConfig, PosteriorChain, posterior_predictive, classify
from motorbnn.spectral import Spectrum, band_limit, extract_features, fft_magnitude

__version__ = "0.1.0"

__all__ = [
    "ChainConfig",
    "ModelConfig",
    "NetworkParams",
    "NetworkShape",
    "PosteriorChain",
    "Segment",
    "SignalRecord",
    "Spectrum",
    "band_limit",
    "classify",
    "extract_features",
    "fft_magnitude",
    "load_wav",
    "posterior_predictive",
    "segment",
    "write_wav",
]
