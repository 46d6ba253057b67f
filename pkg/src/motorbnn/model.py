"""Bayesian MLP classifier: tanh hidden layers, sigmoid output, Gaussian weight prior.

Parameters live in one flat vector. Each layer contributes its weight matrix
of shape (fan_in, fan_out) in row-major order followed by its fan_out biases;
layers are stored input to output. Gradients are obtained by hand-written
backpropagation (reverse mode) over that layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from motorbnn.errors import DivergenceError, ShapeError

LIKELIHOODS = ("bernoulli", "gaussian")
PROB_CLAMP = 1e-12
_LOG_2PI = math.log(2.0 * math.pi)
# largest double below 1 and smallest positive double keep outputs inside (0, 1)
_P_MAX = np.nextafter(1.0, 0.0)
_P_MIN = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class NetworkShape:
    n_inputs: int
    hidden_layers: tuple[int, ...] = (5,)
    n_outputs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        if self.n_inputs < 1 or any(h < 1 for h in self.hidden_layers):
            raise ShapeError(f"layer sizes must be positive: {self}")
        if self.n_outputs != 1:
            raise ShapeError("only a single output unit is supported")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.n_inputs, *self.hidden_layers, self.n_outputs]

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum((a + 1) * b for a, b in zip(sizes[:-1], sizes[1:]))

    def unflatten(self, w: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of ``w`` as (weights, biases) per layer."""
        if w.shape[-1] != self.n_params:
            raise ShapeError(f"expected {self.n_params} parameters, got {w.shape[-1]}")
        layers = []
        pos = 0
        sizes = self.layer_sizes
        for a, b in zip(sizes[:-1], sizes[1:]):
            W = w[..., pos:pos + a * b].reshape(*w.shape[:-1], a, b)
            pos += a * b
            layers.append((W, w[..., pos:pos + b]))
            pos += b
        return layers

    def to_dict(self) -> dict:
        return {"n_inputs": self.n_inputs, "hidden_layers": list(self.hidden_layers),
                "n_outputs": self.n_outputs}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkShape":
        return cls(int(d["n_inputs"]), tuple(d.get("hidden_layers", (5,))),
                   int(d.get("n_outputs", 1)))


@dataclass(frozen=True)
class NetworkParams:
    w: np.ndarray
    shape: NetworkShape

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if w.size != self.shape.n_params:
            raise ShapeError(f"expected {self.shape.n_params} parameters, got {w.size}")
        if not np.all(np.isfinite(w)):
            raise ValueError("parameters must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class ModelConfig:
    lam: float = 1.0
    likelihood: str = "bernoulli"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"prior precision must be positive, got {self.lam}")
        if self.likelihood not in LIKELIHOODS:
            raise ValueError(f"likelihood must be one of {LIKELIHOODS}")

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "likelihood": self.likelihood}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(float(d.get("lambda", 1.0)), d.get("likelihood", "bernoulli"))


@dataclass(frozen=True)
class Dataset:
    """Inputs ``X`` of shape (n, d) and binary targets ``y``."""

    X: np.ndarray
    y: np.ndarray
    class_tags: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if X.shape[0] != y.size:
            raise ShapeError(f"{X.shape[0]} inputs but {y.size} targets")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_tags", tuple(self.class_tags))

    def __len__(self):
        return self.y.size

    @classmethod
    def from_features(cls, features: Sequence) -> "Dataset":
        """Build from FeatureVector-like items (``.x``, ``.label``, ``.class_tag``)."""
        return cls(np.array([f.x for f in features]), np.array([f.label for f in features]),
                   tuple(f.class_tag for f in features))


def _as_vector(params, shape: NetworkShape | None):
    if isinstance(params, NetworkParams):
        return params.w, params.shape
    if shape is None:
        raise TypeError("raw parameter vectors need an explicit shape")
    return np.asarray(params, dtype=np.float64), shape


def _forward_pass(w: np.ndarray, shape: NetworkShape, X: np.ndarray):
    """Return the raw output probabilities and the activations needed for backprop."""
    if X.shape[-1] != shape.n_inputs:
        raise ShapeError(f"network expects {shape.n_inputs} inputs, got {X.shape[-1]}")
    layers = shape.unflatten(w)
    acts = [X]
    h = X
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    z = (h @ W + b)[..., 0]
    return expit(z), acts, layers


def predict(params, X, shape: NetworkShape | None = None) -> np.ndarray:
    """Vectorised forward pass over the rows of ``X``."""
    w, shape = _as_vector(params, shape)
    p, _, _ = _forward_pass(w, shape, np.atleast_2d(np.asarray(X, dtype=np.float64)))
    return np.clip(p, _P_MIN, _P_MAX)


def forward(params, x, shape: NetworkShape | None = None) -> float:
    """Network output f(x, w) in (0, 1) for a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("forward takes a single input vector; use predict for batches")
    return float(predict(params, x[None, :], shape)[0])


def log_prior(params, cfg: ModelConfig, shape: NetworkShape | None = None) -> float:
    w = params.w if isinstance(params, NetworkParams) else np.asarray(params, dtype=np.float64)
    lam = cfg.lam
    return float(-0.5 * w.size * (_LOG_2PI - math.log(lam)) - 0.5 * lam * np.dot(w, w))


def grad_log_prior(params, cfg: ModelConfig) -> np.ndarray:
    w = params.w if isinstance(params, NetworkParams) else np.asarray(params, dtype=np.float64)
    return -cfg.lam * w


def _loglik_terms(p: np.ndarray, y: np.ndarray, likelihood: str) -> np.ndarray:
    if likelihood == "bernoulli":
        pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
        return y * np.log(pc) + (1.0 - y) * np.log1p(-pc)
    return -0.5 * _LOG_2PI - 0.5 * (y - p) ** 2


def log_likelihood(params, data: Dataset, cfg: ModelConfig,
                   shape: NetworkShape | None = None) -> float:
    if len(data) == 0:
        raise ValueError("log-likelihood of an empty dataset")
    w, shape = _as_vector(params, shape)
    p, _, _ = _forward_pass(w, shape, data.X)
    return float(np.sum(_loglik_terms(p, data.y, cfg.likelihood)))


def log_joint(params, data: Dataset, cfg: ModelConfig,
              shape: NetworkShape | None = None) -> float:
    """Unnormalised log posterior: log-likelihood plus log-prior."""
    w, shape = _as_vector(params, shape)
    return log_likelihood(w, data, cfg, shape) + log_prior(w, cfg)


def log_joint_and_grad(w: np.ndarray, shape: NetworkShape, data: Dataset,
                       cfg: ModelConfig) -> tuple[float, np.ndarray]:
    """Log joint and its exact gradient from one forward and one backward sweep."""
    p, acts, layers = _forward_pass(w, shape, data.X)
    y = data.y
    value = float(np.sum(_loglik_terms(p, y, cfg.likelihood)))
    value += log_prior(w, cfg)

    if cfg.likelihood == "bernoulli":
        # the clamp is flat outside [c, 1-c], so its derivative vanishes there
        inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
        delta = np.where(inside, y - p, 0.0)
    else:
        delta = (y - p) * p * (1.0 - p)
    delta = delta[:, None]

    grads = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        a_in = acts[i]
        grads.append((a_in.T @ delta, delta.sum(axis=0)))
        if i > 0:
            delta = (delta @ W.T) * (1.0 - a_in ** 2)
    flat = np.concatenate([np.concatenate((gW.ravel(), gb)) for gW, gb in reversed(grads)])
    return value, flat + grad_log_prior(w, cfg)


def grad_log_joint(params, data: Dataset, cfg: ModelConfig,
                   shape: NetworkShape | None = None) -> np.ndarray:
    w, shape = _as_vector(params, shape)
    return log_joint_and_grad(w, shape, data, cfg)[1]


def squared_error_loss(params, data: Dataset, lam: float,
                       shape: NetworkShape | None = None) -> float:
    """Sum of squared residuals plus ``lam`` times the squared weight norm."""
    w, shape = _as_vector(params, shape)
    p, _, _ = _forward_pass(w, shape, data.X)
    return float(np.sum((data.y - p) ** 2) + lam * np.dot(w, w))


def init_params(shape: NetworkShape, cfg: ModelConfig, rng: np.random.Generator) -> NetworkParams:
    """Draw an initial weight vector from the prior."""
    return NetworkParams(rng.normal(0.0, 1.0 / math.sqrt(cfg.lam), shape.n_params), shape)


@dataclass(frozen=True)
class MapResult:
    params: NetworkParams
    initial_log_joint: float
    final_log_joint: float
    improved: bool


def map_estimate(data: Dataset, cfg: ModelConfig, shape: NetworkShape,
                 init: NetworkParams, steps: int = 1000,
                 learning_rate: float = 0.01) -> MapResult:
    """Fixed-step gradient ascent on the log joint.

    With the gaussian likelihood this minimises :func:`squared_error_loss`
    with weight decay ``cfg.lam``, up to a factor of two and a constant.
    ``improved`` is False when the final log joint is below the starting one.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    w = np.array(init.w)
    start, g = log_joint_and_grad(w, shape, data, cfg)
    for step in range(steps):
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient at step {step}", step=step)
        w = w + learning_rate * g
        _, g = log_joint_and_grad(w, shape, data, cfg)
    if not np.all(np.isfinite(w)):
        raise DivergenceError(f"non-finite parameters after step {steps}", step=steps)
    final = log_joint(w, data, cfg, shape)
    return MapResult(NetworkParams(w, shape), start, final, final >= start)
