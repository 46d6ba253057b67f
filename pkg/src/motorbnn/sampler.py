"""Random-walk Metropolis and Hamiltonian Monte Carlo over flat parameter vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from motorbnn import model as bnn
from motorbnn.errors import DivergenceError, SamplerInitError

ALGORITHMS = ("rwm", "hmc")
# fraction of divergent HMC transitions above which the run is abandoned
MAX_DIVERGENT_FRACTION = 0.9


@dataclass(frozen=True)
class ChainConfig:
    n_steps: int = 2000
    burn_in: int | None = None
    thin: int = 10
    seed: int = 0
    algorithm: str = "hmc"
    rwm_scale: float = 0.05
    hmc_step_size: float = 0.01
    hmc_leapfrog_steps: int = 20

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.n_steps // 2)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.n_steps < 1 or self.thin < 1 or self.hmc_leapfrog_steps < 1:
            raise ValueError("n_steps, thin and hmc_leapfrog_steps must be positive")
        if not 0 <= self.burn_in < self.n_steps:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_steps")
        if self.rwm_scale <= 0 or self.hmc_step_size <= 0:
            raise ValueError("step scales must be positive")

    @property
    def n_retained(self) -> int:
        return len(range(self.burn_in, self.n_steps, self.thin))

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "ChainConfig":
        return cls(**d)


@dataclass(frozen=True)
class PosteriorChain:
    """Retained samples (rows) plus acceptance bookkeeping.

    ``shape`` is set when the samples are network weights, which lets
    :func:`posterior_predictive` evaluate them.
    """

    samples: np.ndarray
    n_accepted: int
    n_proposed: int
    config: ChainConfig
    n_divergent: int = 0
    shape: bnn.NetworkShape | None = field(default=None)

    @property
    def accept_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else 0.0

    @property
    def seed(self) -> int:
        return self.config.seed

    def __len__(self):
        return self.samples.shape[0]

    def params(self) -> list[bnn.NetworkParams]:
        return [bnn.NetworkParams(w, self.shape) for w in self.samples]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "seed": self.config.seed,
            "accept_rate": self.accept_rate,
            "n_accepted": self.n_accepted,
            "n_proposed": self.n_proposed,
            "n_divergent": self.n_divergent,
            "shape": self.shape.to_dict() if self.shape else None,
            "samples": self.samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PosteriorChain":
        shape = bnn.NetworkShape.from_dict(d["shape"]) if d.get("shape") else None
        samples = np.array(d["samples"], dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("chain must hold a nonempty 2-D sample array")
        return cls(samples, int(d["n_accepted"]), int(d["n_proposed"]),
                   ChainConfig.from_dict(d["config"]), int(d.get("n_divergent", 0)), shape)


def _initial_point(dim: int, init) -> np.ndarray:
    if init is None:
        return np.zeros(dim)
    w = np.array(init.w if isinstance(init, bnn.NetworkParams) else init, dtype=np.float64)
    if w.shape != (dim,):
        raise SamplerInitError(f"initial point has shape {w.shape}, expected ({dim},)")
    return w


def rwm_sample(log_density: Callable[[np.ndarray], float], dim: int, cfg: ChainConfig,
               init=None) -> PosteriorChain:
    """Random-walk Metropolis with isotropic Gaussian proposals of scale ``cfg.rwm_scale``."""
    if cfg.algorithm != "rwm":
        raise ValueError("rwm_sample needs a config with algorithm='rwm'")
    rng = np.random.default_rng(cfg.seed)
    w = _initial_point(dim, init)
    logp = float(log_density(w))
    if not math.isfinite(logp):
        raise SamplerInitError(f"log density is {logp} at the initial point")

    # draw all randomness up front; the stream is then fixed by the seed alone
    steps = rng.standard_normal((cfg.n_steps, dim)) * cfg.rwm_scale
    log_u = np.log(rng.random(cfg.n_steps))
    keep = np.zeros((cfg.n_retained, dim))
    accepted = 0
    slot = 0
    for t in range(cfg.n_steps):
        proposal = w + steps[t]
        logp_new = float(log_density(proposal))
        if log_u[t] < logp_new - logp:
            w, logp = proposal, logp_new
            accepted += 1
        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            keep[slot] = w
            slot += 1
    return PosteriorChain(keep, accepted, cfg.n_steps, cfg)


def leapfrog(q: np.ndarray, p: np.ndarray, grad_log_density: Callable, step_size: float,
             n_steps: int, grad_q: np.ndarray | None = None):
    """Integrate Hamiltonian dynamics with unit mass.

    Returns the final position, momentum and the gradient at the final
    position (so the caller can reuse it).
    """
    q = np.array(q, dtype=np.float64)
    p = np.array(p, dtype=np.float64)
    g = grad_log_density(q) if grad_q is None else grad_q
    p = p + 0.5 * step_size * g
    for i in range(n_steps):
        q = q + step_size * p
        g = grad_log_density(q)
        if i != n_steps - 1:
            p = p + step_size * g
    p = p + 0.5 * step_size * g
    return q, p, g


def hmc_sample(log_density: Callable[[np.ndarray], float],
               grad_log_density: Callable[[np.ndarray], np.ndarray] | None,
               dim: int, cfg: ChainConfig, init=None,
               value_and_grad: Callable | None = None) -> PosteriorChain:
    """Hamiltonian Monte Carlo with a unit mass matrix and a fixed leapfrog schedule.

    ``value_and_grad`` may be supplied instead of the two callables to share
    work between the density and its gradient. Proposals whose energy becomes
    non-finite are rejected and counted as divergent.
    """
    if cfg.algorithm != "hmc":
        raise ValueError("hmc_sample needs a config with algorithm='hmc'")
    if value_and_grad is None:
        def value_and_grad(w):
            return log_density(w), grad_log_density(w)

    rng = np.random.default_rng(cfg.seed)
    q = _initial_point(dim, init)
    logp, g = value_and_grad(q)
    if not (math.isfinite(logp) and np.all(np.isfinite(g))):
        raise SamplerInitError(f"log density or gradient is not finite at the initial point")

    momenta = rng.standard_normal((cfg.n_steps, dim))
    log_u = np.log(rng.random(cfg.n_steps))
    eps = cfg.hmc_step_size
    keep = np.zeros((cfg.n_retained, dim))
    accepted = divergent = slot = 0
    for t in range(cfg.n_steps):
        p0 = momenta[t]
        qn, pn, gn, logp_new = q, p0, g, -math.inf
        with np.errstate(over="ignore", invalid="ignore"):
            pn = p0 + 0.5 * eps * g
            for i in range(cfg.hmc_leapfrog_steps):
                qn = qn + eps * pn
                logp_new, gn = value_and_grad(qn)
                if not np.all(np.isfinite(gn)):
                    break
                if i != cfg.hmc_leapfrog_steps - 1:
                    pn = pn + eps * gn
            pn = pn + 0.5 * eps * gn
            h_old = -logp + 0.5 * np.dot(p0, p0)
            h_new = -logp_new + 0.5 * np.dot(pn, pn)
        if not (math.isfinite(h_new) and np.all(np.isfinite(qn))):
            divergent += 1
        elif log_u[t] < h_old - h_new:
            q, logp, g = qn, logp_new, gn
            accepted += 1
        if t >= cfg.burn_in and (t - cfg.burn_in) % cfg.thin == 0:
            keep[slot] = q
            slot += 1
    if divergent > MAX_DIVERGENT_FRACTION * cfg.n_steps:
        raise DivergenceError(f"{divergent} of {cfg.n_steps} HMC transitions diverged")
    return PosteriorChain(keep, accepted, cfg.n_steps, cfg, divergent)


def sample_posterior(data: bnn.Dataset, shape: bnn.NetworkShape, model_cfg: bnn.ModelConfig,
                     chain_cfg: ChainConfig, init: bnn.NetworkParams | None = None) -> PosteriorChain:
    """Sample network weights from the posterior given ``data``.

    Without ``init`` the chain starts from a prior draw seeded by ``chain_cfg.seed``.
    """
    if init is None:
        rng = np.random.default_rng([chain_cfg.seed, 1])
        init = bnn.init_params(shape, model_cfg, rng)

    def value_and_grad(w):
        return bnn.log_joint_and_grad(w, shape, data, model_cfg)

    def log_density(w):
        return bnn.log_joint(w, data, model_cfg, shape)

    if chain_cfg.algorithm == "rwm":
        chain = rwm_sample(log_density, shape.n_params, chain_cfg, init)
    else:
        chain = hmc_sample(None, None, shape.n_params, chain_cfg, init,
                           value_and_grad=value_and_grad)
    return replace(chain, shape=shape)


@dataclass(frozen=True)
class PredictiveSummary:
    mean: float
    std: float


def predictive_samples(chain: PosteriorChain, X) -> np.ndarray:
    """Network outputs for every retained sample; shape (n_samples, n_inputs)."""
    if chain.shape is None:
        raise ValueError("chain carries no network shape")
    if len(chain) == 0:
        raise ValueError("chain holds no samples")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.stack([bnn.predict(w, X, chain.shape) for w in chain.samples])


def posterior_predictive(chain: PosteriorChain, x) -> PredictiveSummary:
    """Monte Carlo estimate of the posterior-predictive probability for one input."""
    vals = predictive_samples(chain, np.asarray(x, dtype=np.float64)[None, :])[:, 0]
    std = float(np.std(vals, ddof=1)) if vals.size > 1 else 0.0
    return PredictiveSummary(float(np.mean(vals)), std)


@dataclass(frozen=True)
class Classification:
    label: int
    confidence: PredictiveSummary


def decide(mean: float, threshold: float = 0.5) -> int:
    # ties go to the faulty class
    return int(mean >= threshold)


def classify(chain: PosteriorChain, x, threshold: float = 0.5) -> Classification:
    summary = posterior_predictive(chain, x)
    return Classification(decide(summary.mean, threshold), summary)
