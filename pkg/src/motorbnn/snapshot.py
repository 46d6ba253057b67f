"""JSON model snapshots.

Schema (version 1)::

    {
      "format": "motorbnn-snapshot",
      "version": 1,
      "kind": "posterior" | "map",
      "spectral": {"window_seconds", "f_lo", "f_hi", "n_features"},
      "shape": {"n_inputs", "hidden_layers", "n_outputs"},
      "model": {"lambda", "likelihood"},
      "normalizer": {"means": [...], "stds": [...]},
      "threshold": 0.5,
      "chain": {config, seed, accept_rate, n_accepted, n_proposed,
                n_divergent, shape, samples: [[w...], ...]}   # kind == posterior
      "w": [...]                                              # kind == map
    }

A MAP snapshot is evaluated as a one-sample chain, so both kinds share the
prediction path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from motorbnn.experiment import Normalizer
from motorbnn.model import ModelConfig, NetworkShape
from motorbnn.sampler import ChainConfig, PosteriorChain
from motorbnn.spectral import SpectralConfig

FORMAT = "motorbnn-snapshot"
VERSION = 1


@dataclass(frozen=True)
class Snapshot:
    kind: str
    spectral: SpectralConfig
    shape: NetworkShape
    model: ModelConfig
    normalizer: Normalizer
    chain: PosteriorChain
    threshold: float = 0.5

    def to_dict(self) -> dict:
        d = {
            "format": FORMAT,
            "version": VERSION,
            "kind": self.kind,
            "spectral": self.spectral.to_dict(),
            "shape": self.shape.to_dict(),
            "model": self.model.to_dict(),
            "normalizer": self.normalizer.to_dict(),
            "threshold": self.threshold,
        }
        if self.kind == "map":
            d["w"] = self.chain.samples[0].tolist()
        else:
            d["chain"] = self.chain.to_dict()
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "Snapshot":
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise ValueError(f"not a version-{VERSION} {FORMAT} file")
        shape = NetworkShape.from_dict(d["shape"])
        kind = d.get("kind", "posterior")
        if kind == "map":
            w = np.array(d["w"], dtype=np.float64)[None, :]
            chain = PosteriorChain(w, 0, 0, ChainConfig(n_steps=1, burn_in=0, thin=1), shape=shape)
        elif kind == "posterior":
            chain = PosteriorChain.from_dict(d["chain"])
            chain = PosteriorChain(chain.samples, chain.n_accepted, chain.n_proposed,
                                   chain.config, chain.n_divergent, shape)
        else:
            raise ValueError(f"unknown snapshot kind {kind!r}")
        if chain.samples.shape[1] != shape.n_params:
            raise ValueError("snapshot samples do not match the network shape")
        return cls(kind, SpectralConfig(**d["spectral"]), shape, ModelConfig.from_dict(d["model"]),
                   Normalizer.from_dict(d["normalizer"]), chain, float(d.get("threshold", 0.5)))

    @classmethod
    def load(cls, path) -> "Snapshot":
        return cls.from_dict(json.loads(Path(path).read_text()))
