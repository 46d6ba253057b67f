"""Single-file run configuration with strict key checking."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

from motorbnn.errors import ConfigError
from motorbnn.experiment import ExperimentConfig
from motorbnn.model import ModelConfig
from motorbnn.sampler import ChainConfig
from motorbnn.spectral import SpectralConfig

DEFAULTS = {
    "spectral": {"window_seconds": 1.0, "f_lo": 16.0, "f_hi": 20000.0, "n_features": 5},
    "model": {"hidden_layers": [5], "lambda": 1.0, "likelihood": "bernoulli"},
    "chain": {
        "algorithm": "hmc",
        "n_steps": 2000,
        "burn_in": None,  # None means n_steps // 2
        "thin": 10,
        "seed": 0,
        "rwm_scale": 0.05,
        "hmc_step_size": 0.01,
        "hmc_leapfrog_steps": 20,
    },
    "experiment": {"n_trials": 100, "ratio": 0.8, "base_seed": 0, "threshold": 0.5, "jobs": 1},
    "synthetic": {"n_per_class": 30, "sample_rate": 44100, "seed": 0},
    "report": {"hist_bins": 20},
    "paths": {"manifest": None, "outdir": None},
}


def _merge(defaults: dict, given: dict, where: str) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError("unknown config key(s): " + ", ".join(where + k for k in unknown))
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where}{key} must be an object")
            out[key] = _merge(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    raw: dict

    @classmethod
    def from_dict(cls, given: dict | None = None) -> "RunConfig":
        merged = _merge(DEFAULTS, given or {}, "")
        cfg = cls(merged)
        try:
            cfg.spectral, cfg.model, cfg.chain, cfg.experiment, cfg.hidden_layers
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> "RunConfig":
        if path is None:
            return cls.from_dict({})
        try:
            given = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
        if not isinstance(given, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(given)

    def override(self, section: str, **values) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw[section].update({k: v for k, v in values.items() if v is not None})
        return RunConfig.from_dict(raw)

    @property
    def spectral(self) -> SpectralConfig:
        return SpectralConfig(**self.raw["spectral"])

    @property
    def model(self) -> ModelConfig:
        m = self.raw["model"]
        return ModelConfig(float(m["lambda"]), m["likelihood"])

    @property
    def hidden_layers(self) -> tuple[int, ...]:
        return tuple(int(h) for h in self.raw["model"]["hidden_layers"])

    @property
    def chain(self) -> ChainConfig:
        return ChainConfig(**self.raw["chain"])

    @property
    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(**self.raw["experiment"])

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)
