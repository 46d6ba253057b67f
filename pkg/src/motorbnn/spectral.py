"""Radix-2 FFT, band limiting and log band-energy features."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from motorbnn.audio_io import segment
from motorbnn.errors import EmptyBandError

AUDIBLE_LO = 16.0
AUDIBLE_HI = 20000.0


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    mags: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=np.float64)
        mags = np.asarray(self.mags, dtype=np.float64)
        if freqs.shape != mags.shape or freqs.ndim != 1:
            raise ValueError("freqs and mags must be 1-D and equally long")
        if freqs.size > 1 and np.any(np.diff(freqs) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(mags < 0):
            raise ValueError("mags must be nonnegative")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "mags", mags)

    def __len__(self):
        return self.freqs.size


def next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (int(n) - 1).bit_length()


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT.

    ``len(x)`` must be a power of two. Each stage applies all butterflies of
    one span at once; twiddles are evaluated directly rather than by
    recurrence so rounding error does not accumulate across stages.
    """
    a = np.asarray(x, dtype=np.complex128)
    n = a.size
    if n == 0 or n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    a = a[_bit_reverse_indices(n)]
    half = 1
    while half < n:
        span = 2 * half
        twiddle = np.exp(-2j * np.pi * np.arange(half) / span)
        blocks = a.reshape(n // span, span)
        even = blocks[:, :half]
        odd = blocks[:, half:] * twiddle
        a = np.concatenate((even + odd, even - odd), axis=1).reshape(n)
        half = span
    return a


def fft_magnitude(segment) -> Spectrum:
    """One-sided amplitude spectrum of a segment, zero-padded to a power of two.

    Interior bins are scaled by 2/N and the DC and Nyquist bins by 1/N, so a
    unit sine that falls on a bin frequency reads 1.0.
    """
    samples = np.asarray(segment.samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("cannot transform an empty segment")
    n = next_pow2(samples.size)
    padded = np.zeros(n)
    padded[:samples.size] = samples
    coeffs = fft(padded)[: n // 2 + 1]
    mags = np.abs(coeffs) * (2.0 / n)
    mags[0] /= 2.0
    if n > 1:
        mags[-1] /= 2.0
    freqs = np.arange(mags.size) * (segment.sample_rate / n)
    return Spectrum(freqs, mags)


def band_limit(spectrum: Spectrum, f_lo: float = AUDIBLE_LO, f_hi: float = AUDIBLE_HI) -> Spectrum:
    if not 0 <= f_lo < f_hi:
        raise ValueError(f"need 0 <= f_lo < f_hi, got {f_lo}, {f_hi}")
    keep = (spectrum.freqs >= f_lo) & (spectrum.freqs <= f_hi)
    if not keep.any():
        raise EmptyBandError(f"no bins between {f_lo} Hz and {f_hi} Hz")
    return Spectrum(spectrum.freqs[keep], spectrum.mags[keep])


def band_edges(f_min: float, f_max: float, n_features: int) -> np.ndarray:
    """Log-spaced interval edges covering [f_min, f_max]."""
    lo = max(f_min, 1e-6)
    hi = max(f_max, lo * (1 + 1e-9))
    return np.geomspace(lo, hi, n_features + 1)


def band_energies(spectrum: Spectrum, n_features: int) -> np.ndarray:
    """Sum of magnitudes in each of ``n_features`` log-spaced intervals.

    Bins below the first positive edge (e.g. DC) fall into the first interval.
    """
    if len(spectrum) == 0:
        raise ValueError("spectrum is empty")
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    positive = spectrum.freqs[spectrum.freqs > 0]
    f_min = positive[0] if positive.size else 1.0
    edges = band_edges(f_min, spectrum.freqs[-1], n_features)
    which = np.searchsorted(edges, spectrum.freqs, side="right") - 1
    which = np.clip(which, 0, n_features - 1)
    return np.bincount(which, weights=spectrum.mags, minlength=n_features)


def extract_features(spectrum: Spectrum, n_features: int = 5, normalizer=None) -> np.ndarray:
    """``log1p`` of log-spaced band magnitude sums, optionally standardised.

    ``normalizer`` is anything with a ``transform(x)`` method, typically a
    :class:`motorbnn.experiment.Normalizer` fitted on training data.
    """
    feats = np.log1p(band_energies(spectrum, n_features))
    if normalizer is not None:
        feats = normalizer.transform(feats)
    return feats



@dataclass(frozen=True)
class SpectralConfig:
    window_seconds: float = 1.0
    f_lo: float = AUDIBLE_LO
    f_hi: float = AUDIBLE_HI
    n_features: int = 5

    def __post_init__(self):
        if self.window_seconds <= 0 or self.n_features < 1:
            raise ValueError("window_seconds must be positive and n_features >= 1")
        if not 0 <= self.f_lo < self.f_hi:
            raise ValueError("need 0 <= f_lo < f_hi")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class FeatureVector:
    x: np.ndarray
    label: int
    class_tag: str
    source_id: str = ""
    segment: int = 0

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise ValueError("feature vector must be 1-D and finite")
        if self.label not in (0, 1):
            raise ValueError("label must be 0 or 1")
        object.__setattr__(self, "x", x)


def binary_label(class_tag: str) -> int:
    return 0 if class_tag == "healthy" else 1


def segment_features(seg, cfg: SpectralConfig) -> np.ndarray:
    """Raw (unstandardised) features of one segment."""
    spec = band_limit(fft_magnitude(seg), cfg.f_lo, cfg.f_hi)
    return extract_features(spec, cfg.n_features)


def featurize_record(record, cfg: SpectralConfig = SpectralConfig()) -> list[FeatureVector]:
    """Segment a labelled record and compute raw features for every window."""
    return [
        FeatureVector(segment_features(seg, cfg), binary_label(record.label), record.label,
                      record.source_id, seg.index)
        for seg in segment(record, cfg.window_seconds)
    ]


def features_csv(features, n_features: int) -> str:
    """Serialise feature vectors as ``source_id,segment,class,label,f1..fn``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["source_id", "segment", "class", "label",
                     *[f"f{j + 1}" for j in range(n_features)]])
    for f in features:
        writer.writerow([f.source_id, f.segment, f.class_tag, f.label, *map(repr, f.x.tolist())])
    return buf.getvalue()


def read_features_csv(path) -> list[FeatureVector]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["source_id", "segment", "class", "label"]:
            raise ValueError(f"{path}: missing feature CSV header")
        return [
            FeatureVector(np.array(row[4:], dtype=np.float64), int(row[3]), row[2], row[0],
                          int(row[1]))
            for row in reader if row
        ]
