import math

import numpy as np
import pytest

from motorbnn import model as m
from motorbnn.errors import DivergenceError, SamplerInitError
from motorbnn.sampler import (
    ChainConfig,
    PosteriorChain,
    classify,
    hmc_sample,
    leapfrog,
    posterior_predictive,
    rwm_sample,
    sample_posterior,
)
from oracles import grid_logistic_predictive


def std_normal(w):
    return -0.5 * float(np.dot(w, w))


def std_normal_grad(w):
    return -w


def test_chain_config_defaults_and_validation():
    cfg = ChainConfig(n_steps=100)
    assert cfg.burn_in == 50 and cfg.thin == 10 and cfg.n_retained == 5
    assert (cfg.rwm_scale, cfg.hmc_step_size, cfg.hmc_leapfrog_steps) == (0.05, 0.01, 20)
    for bad in [dict(burn_in=100), dict(thin=0), dict(algorithm="nuts"), dict(rwm_scale=0)]:
        with pytest.raises(ValueError):
            ChainConfig(n_steps=100, **bad)


def test_rwm_same_seed_same_chain():
    cfg = ChainConfig(n_steps=500, seed=9, algorithm="rwm", rwm_scale=1.0)
    a = rwm_sample(std_normal, 3, cfg)
    b = rwm_sample(std_normal, 3, cfg)
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.n_accepted == b.n_accepted
    c = rwm_sample(std_normal, 3, ChainConfig(n_steps=500, seed=10, algorithm="rwm"))
    assert c.samples.tobytes() != a.samples.tobytes()


def test_rwm_vanishing_scale_accepts_everything():
    cfg = ChainConfig(n_steps=2000, algorithm="rwm", rwm_scale=1e-9, seed=1)
    chain = rwm_sample(std_normal, 2, cfg, init=np.array([0.3, -0.2]))
    assert chain.accept_rate >= 0.999
    assert chain.n_accepted + (chain.n_proposed - chain.n_accepted) == cfg.n_steps


def test_rwm_init_must_be_finite():
    cfg = ChainConfig(n_steps=10, algorithm="rwm")
    with pytest.raises(SamplerInitError):
        rwm_sample(lambda w: -math.inf, 1, cfg)


def test_constant_offset_does_not_change_chains():
    rwm = ChainConfig(n_steps=2000, algorithm="rwm", rwm_scale=1.5, seed=4)
    a = rwm_sample(std_normal, 2, rwm)
    b = rwm_sample(lambda w: std_normal(w) + 7.0, 2, rwm)
    np.testing.assert_array_equal(a.samples, b.samples)
    hmc = ChainConfig(n_steps=300, algorithm="hmc", hmc_step_size=0.3, hmc_leapfrog_steps=5, seed=4)
    a = hmc_sample(std_normal, std_normal_grad, 2, hmc)
    b = hmc_sample(lambda w: std_normal(w) + 7.0, std_normal_grad, 2, hmc)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_rwm_detailed_balance_on_discretised_target():
    # mixture target; states are the cells of a coarse grid
    def logp(w):
        x = w[0]
        return float(np.logaddexp(-0.5 * (x + 1.5) ** 2, -0.5 * ((x - 1.0) / 0.7) ** 2 + math.log(0.6 / 0.7)))

    cfg = ChainConfig(n_steps=200_000, burn_in=0, thin=1, algorithm="rwm", rwm_scale=1.2, seed=11)
    chain = rwm_sample(logp, 1, cfg)
    cells = np.digitize(chain.samples[:, 0], [-2.0, -1.0, 0.0, 1.0, 2.0])
    k = 6
    counts = np.zeros((k, k))
    np.add.at(counts, (cells[:-1], cells[1:]), 1)
    for i in range(k):
        for j in range(i + 1, k):
            total = counts[i, j] + counts[j, i]
            if total < 50:
                continue
            # transitions i->j and j->i have equal expectation under balance
            assert abs(counts[i, j] - counts[j, i]) <= 5 * math.sqrt(total), (i, j, counts)


def test_leapfrog_is_reversible():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(4, 4))
    prec = A @ A.T + np.eye(4)

    def grad(q):
        return -prec @ q - 0.1 * q ** 3

    q0, p0 = rng.normal(size=4), rng.normal(size=4)
    q1, p1, _ = leapfrog(q0, p0, grad, 0.05, 40)
    q2, p2, _ = leapfrog(q1, -p1, grad, 0.05, 40)
    np.testing.assert_allclose(q2, q0, atol=1e-9)
    np.testing.assert_allclose(-p2, p0, atol=1e-9)


def test_hmc_tiny_step_on_gaussian_accepts_nearly_everything():
    cfg = ChainConfig(n_steps=500, algorithm="hmc", hmc_step_size=1e-4, hmc_leapfrog_steps=10, seed=2)
    chain = hmc_sample(std_normal, std_normal_grad, 3, cfg, init=np.ones(3))
    assert chain.accept_rate >= 0.999


def test_hmc_determinism():
    cfg = ChainConfig(n_steps=400, algorithm="hmc", hmc_step_size=0.2, hmc_leapfrog_steps=8, seed=5)
    a = hmc_sample(std_normal, std_normal_grad, 4, cfg)
    b = hmc_sample(std_normal, std_normal_grad, 4, cfg)
    assert a.samples.tobytes() == b.samples.tobytes()


def quartic(w):
    return -float(np.sum(w ** 4))


def quartic_grad(w):
    return -4 * w ** 3


def test_hmc_rejects_divergent_proposals_and_keeps_going():
    cfg = ChainConfig(n_steps=400, algorithm="hmc", hmc_step_size=0.9, hmc_leapfrog_steps=30, seed=3)
    chain = hmc_sample(quartic, quartic_grad, 1, cfg, init=np.array([0.1]))
    assert 0 < chain.n_divergent <= 0.9 * cfg.n_steps
    assert np.all(np.isfinite(chain.samples))


def test_hmc_persistent_divergence_raises():
    cfg = ChainConfig(n_steps=100, algorithm="hmc", hmc_step_size=5.0, hmc_leapfrog_steps=30, seed=3)
    with pytest.raises(DivergenceError):
        hmc_sample(quartic, quartic_grad, 1, cfg, init=np.array([3.0]))


def test_algorithm_guard():
    with pytest.raises(ValueError):
        rwm_sample(std_normal, 1, ChainConfig(n_steps=10, algorithm="hmc"))
    with pytest.raises(ValueError):
        hmc_sample(std_normal, std_normal_grad, 1, ChainConfig(n_steps=10, algorithm="rwm"))


def single_sample_chain(w, shape):
    return PosteriorChain(np.atleast_2d(np.asarray(w, dtype=float)), 1, 1,
                          ChainConfig(n_steps=1, burn_in=0, thin=1), shape=shape)


def test_predictive_of_identical_samples():
    shape = m.NetworkShape(2, (3,))
    w = np.random.default_rng(0).normal(size=shape.n_params)
    chain = PosteriorChain(np.tile(w, (25, 1)), 25, 25, ChainConfig(n_steps=25, burn_in=0, thin=1),
                           shape=shape)
    x = [0.4, -1.2]
    pred = posterior_predictive(chain, x)
    assert pred.mean == pytest.approx(m.forward(w, x, shape), rel=1e-15)
    assert pred.std == 0.0


def test_predictive_mean_is_a_probability():
    shape = m.NetworkShape(3, (5,))
    samples = np.random.default_rng(1).normal(size=(50, shape.n_params)) * 30
    chain = PosteriorChain(samples, 1, 1, ChainConfig(), shape=shape)
    for x in np.random.default_rng(2).normal(size=(20, 3)) * 10:
        pred = posterior_predictive(chain, x)
        assert 0 < pred.mean < 1 and pred.std >= 0


def logit(p):
    return math.log(p / (1 - p))


@pytest.mark.parametrize("mean,label", [(0.046, 0), (0.824, 1), (0.5, 1)])
def test_classify_threshold(mean, label):
    shape = m.NetworkShape(1, ())
    chain = single_sample_chain([0.0, logit(mean)], shape)
    out = classify(chain, [0.3])
    assert out.confidence.mean == pytest.approx(mean, abs=1e-15)
    assert out.label == label


def toy_logistic(n=20, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    y = (rng.random(n) < 1 / (1 + np.exp(-(1.5 * x - 0.5)))).astype(float)
    return x, y


def test_rwm_predictive_matches_grid_oracle():
    x, y = toy_logistic(seed=1)
    shape = m.NetworkShape(1, ())
    data = m.Dataset(x[:, None], y)
    cfg = ChainConfig(n_steps=150_000, burn_in=5000, thin=10, algorithm="rwm", rwm_scale=0.8, seed=21)
    chain = sample_posterior(data, shape, m.ModelConfig(), cfg)
    queries = np.linspace(-2.5, 2.5, 6)
    expected = grid_logistic_predictive(x, y, queries)
    got = np.array([posterior_predictive(chain, [q]).mean for q in queries])
    np.testing.assert_allclose(got, expected, atol=0.02)


def test_chain_serialisation_round_trip():
    shape = m.NetworkShape(2, (2,))
    data = m.Dataset([[0.0, 1.0], [1.0, 0.0]], [0, 1])
    chain = sample_posterior(data, shape, m.ModelConfig(), ChainConfig(n_steps=60, seed=3))
    back = PosteriorChain.from_dict(chain.to_dict())
    np.testing.assert_array_equal(back.samples, chain.samples)
    assert back.accept_rate == chain.accept_rate and back.config == chain.config
    assert back.shape == shape and back.seed == 3
