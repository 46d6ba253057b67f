"""Synthetic motor recordings with the same five-class layout as the field dataset.

Every record is a harmonic stack at a jittered shaft frequency plus white
noise. Fault classes perturb that stack in class-specific ways:

* ``fault1`` (damaged gear train): sidebands around each harmonic and a gear-mesh tone.
* ``fault2`` / ``fault3`` (5 / 10 broken rotor blades): amplitude modulation at the
  blade-pass rate and a raised noise floor, both growing with the number of blades.
* ``fault4`` (shifted brush): broadband noise dominates, harmonics attenuated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from motorbnn.audio_io import CLASS_LABELS, SignalRecord


@dataclass(frozen=True)
class ClassProfile:
    level: float           # amplitude of the fundamental
    noise: float           # std of the white noise floor
    harmonic_gain: float = 1.0
    sideband: float = 0.0  # relative amplitude of gear sidebands
    modulation: float = 0.0  # AM depth at the blade-pass rate
    blades: int = 0


PROFILES = {
    "healthy": ClassProfile(level=0.20, noise=0.002),
    "fault1": ClassProfile(level=0.30, noise=0.010, sideband=0.5),
    "fault2": ClassProfile(level=0.30, noise=0.015, modulation=0.3, blades=5),
    "fault3": ClassProfile(level=0.30, noise=0.030, modulation=0.6, blades=10),
    "fault4": ClassProfile(level=0.25, noise=0.060, harmonic_gain=0.3),
}

N_HARMONICS = 8
HARMONIC_DECAY = 0.6
BASE_FREQ = 100.0
GEAR_RATIO = 0.27
GEAR_MESH_FREQ = 2400.0


def harmonic_freqs(f0: float, sample_rate: int) -> np.ndarray:
    freqs = f0 * np.arange(1, N_HARMONICS + 1)
    return freqs[freqs < sample_rate / 2]


def synth_record(label: str, rng: np.random.Generator, sample_rate: int = 44100,
                 duration: float = 1.0, f0: float | None = None) -> tuple[np.ndarray, float]:
    """Return (samples, shaft frequency) for one record of class ``label``."""
    prof = PROFILES[label]
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    if f0 is None:
        f0 = BASE_FREQ * rng.uniform(0.95, 1.05)
    level = prof.level * rng.uniform(0.85, 1.15)

    x = np.zeros(n)
    for k, f in enumerate(harmonic_freqs(f0, sample_rate), start=1):
        amp = level * prof.harmonic_gain * HARMONIC_DECAY ** (k - 1)
        x += amp * np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi))
        if prof.sideband:
            for side in (-1, 1):
                fs = f + side * GEAR_RATIO * f0
                if 0 < fs < sample_rate / 2:
                    x += prof.sideband * amp * np.sin(2 * np.pi * fs * t + rng.uniform(0, 2 * np.pi))
    if prof.sideband and GEAR_MESH_FREQ < sample_rate / 2:
        x += 0.2 * level * np.sin(2 * np.pi * GEAR_MESH_FREQ * t + rng.uniform(0, 2 * np.pi))
    if prof.modulation:
        blade_rate = prof.blades * f0 / 10.0
        x *= 1.0 + prof.modulation * np.sin(2 * np.pi * blade_rate * t + rng.uniform(0, 2 * np.pi))
    x += rng.normal(0.0, prof.noise, n)
    return np.clip(x, -1.0, 1.0), f0


def generate_synthetic_dataset(n_per_class: int = 30, sample_rate: int = 44100,
                               seed: int = 0, duration: float = 1.0) -> list[SignalRecord]:
    """Five classes of ``n_per_class`` records each, deterministic in ``seed``."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    records = []
    for ci, label in enumerate(CLASS_LABELS):
        for i in range(n_per_class):
            rng = np.random.default_rng([seed, ci, i])
            samples, _ = synth_record(label, rng, sample_rate, duration)
            records.append(SignalRecord(samples, sample_rate, label, f"{label}_{i:03d}"))
    return records
