"""Repeated stratified train/test evaluation of the Bayesian classifier."""

from __future__ import annotations

import logging
import math
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from motorbnn import model as bnn
from motorbnn.audio_io import CLASS_LABELS
from motorbnn.errors import TrialError
from motorbnn.sampler import ChainConfig, PosteriorChain, decide, predictive_samples, sample_posterior
from motorbnn.spectral import FeatureVector
from motorbnn.synth import generate_synthetic_dataset  # noqa: F401  (re-export)

log = logging.getLogger(__name__)


class StratificationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Normalizer:
    """Per-feature standardisation fitted on training rows only."""

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, X) -> "Normalizer":
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        means = X.mean(axis=0)
        stds = X.std(axis=0)
        stds = np.where(stds > 0, stds, 1.0)
        return cls(means, stds)

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.means) / self.stds

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.array(d["means"], dtype=np.float64), np.array(d["stds"], dtype=np.float64))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_dataset(items: Sequence[FeatureVector], ratio: float = 0.8,
                  seed: int = 0) -> tuple[list[FeatureVector], list[FeatureVector]]:
    """Stratified split by five-way class, at the recording level.

    All segments of one recording land on the same side. Within each class,
    recordings are ordered by id and then shuffled with ``seed``, so the
    result does not depend on the order of ``items``.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    groups: dict[str, dict[str, list[FeatureVector]]] = defaultdict(lambda: defaultdict(list))
    for item in items:
        groups[item.class_tag][item.source_id].append(item)

    rng = np.random.default_rng(seed)
    train_ids, test_ids = [], []
    for tag in sorted(groups, key=_class_order):
        ids = sorted(groups[tag])
        order = [ids[i] for i in rng.permutation(len(ids))]
        if len(ids) < 2:
            warnings.warn(f"class {tag!r} has {len(ids)} recording(s); all go to training",
                          StratificationWarning, stacklevel=2)
            n_train = len(ids)
        else:
            n_train = min(max(_round_half_up(ratio * len(ids)), 1), len(ids) - 1)
        train_ids += [(tag, s) for s in order[:n_train]]
        test_ids += [(tag, s) for s in order[n_train:]]

    def expand(keys):
        out = []
        for tag, sid in keys:
            out.extend(sorted(groups[tag][sid], key=lambda f: f.segment))
        return out

    return expand(train_ids), expand(test_ids)


def _class_order(tag: str):
    return (CLASS_LABELS.index(tag) if tag in CLASS_LABELS else len(CLASS_LABELS), tag)


@dataclass(frozen=True)
class Prediction:
    source_id: str
    segment: int
    class_tag: str
    label: int
    mean: float
    std: float
    predicted: int


@dataclass(frozen=True)
class TrialResult:
    seed: int
    accuracy: float
    confusion: np.ndarray  # rows true label, columns predicted label
    per_class_stats: dict[str, tuple[float, float]]
    predictions: list[Prediction] = field(default_factory=list)
    accept_rate: float = float("nan")
    chain: PosteriorChain | None = field(default=None, repr=False, compare=False)
    normalizer: Normalizer | None = field(default=None, repr=False, compare=False)

    @property
    def tn(self): return int(self.confusion[0, 0])

    @property
    def fp(self): return int(self.confusion[0, 1])

    @property
    def fn(self): return int(self.confusion[1, 0])

    @property
    def tp(self): return int(self.confusion[1, 1])

    def without_chain(self) -> "TrialResult":
        return replace(self, chain=None, normalizer=None)


@dataclass(frozen=True)
class ExperimentConfig:
    n_trials: int = 100
    ratio: float = 0.8
    base_seed: int = 0
    threshold: float = 0.5
    jobs: int = 1

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def confusion_matrix(labels, predicted) -> np.ndarray:
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels, dtype=int), np.asarray(predicted, dtype=int)), 1)
    return cm


def run_trial(features: Sequence[FeatureVector], model_cfg: bnn.ModelConfig,
              chain_cfg: ChainConfig, seed: int, hidden_layers=(5,), ratio: float = 0.8,
              threshold: float = 0.5) -> TrialResult:
    """One split, posterior sampling on the training part, evaluation on the rest."""
    train, test = split_dataset(features, ratio, seed)
    if {f.label for f in train} != {0, 1}:
        raise ValueError("training split must contain both healthy and faulty items")
    if not test:
        raise ValueError("test split is empty")

    norm = Normalizer.fit([f.x for f in train])
    train_data = bnn.Dataset(norm.transform([f.x for f in train]), [f.label for f in train])
    shape = bnn.NetworkShape(train_data.X.shape[1], tuple(hidden_layers))
    chain = sample_posterior(train_data, shape, model_cfg, replace(chain_cfg, seed=seed))

    outputs = predictive_samples(chain, norm.transform([f.x for f in test]))
    means = outputs.mean(axis=0)
    stds = outputs.std(axis=0, ddof=1) if outputs.shape[0] > 1 else np.zeros(len(test))
    predictions = [
        Prediction(f.source_id, f.segment, f.class_tag, f.label, float(m), float(s),
                   decide(float(m), threshold))
        for f, m, s in zip(test, means, stds)
    ]
    cm = confusion_matrix([p.label for p in predictions], [p.predicted for p in predictions])

    # class statistics pool every posterior draw for every test item of the class
    per_class = {}
    tags = np.array([f.class_tag for f in test])
    for tag in sorted(set(tags), key=_class_order):
        vals = outputs[:, tags == tag]
        per_class[str(tag)] = (float(vals.mean()), float(vals.std()))

    return TrialResult(seed, float(np.trace(cm) / cm.sum()), cm, per_class, predictions,
                       chain.accept_rate, chain, norm)


@dataclass(frozen=True)
class ExperimentSummary:
    n_trials: int
    mean_accuracy: float
    accuracy_std: float
    mean_confusion: np.ndarray
    table: dict[str, tuple[float, float]]
    healthy_recall: float
    fault_recall: float
    trials: list[TrialResult] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "mean_accuracy": self.mean_accuracy,
            "accuracy_std": self.accuracy_std,
            "mean_confusion": self.mean_confusion.tolist(),
            "healthy_recall": self.healthy_recall,
            "fault_recall": self.fault_recall,
            "table": {k: {"mean": m, "std": s} for k, (m, s) in self.table.items()},
            "trials": [
                {"trial": i, "seed": t.seed, "accuracy": t.accuracy,
                 "confusion": t.confusion.tolist(), "accept_rate": t.accept_rate,
                 "per_class": {k: {"mean": m, "std": s} for k, (m, s) in t.per_class_stats.items()}}
                for i, t in enumerate(self.trials)
            ],
        }


def _recall(cm: np.ndarray, row: int) -> float:
    total = cm[row].sum()
    return float(cm[row, row] / total) if total else float("nan")


def summarize(trials: Sequence[TrialResult]) -> ExperimentSummary:
    if not trials:
        raise ValueError("no trials to summarise")
    acc = np.array([t.accuracy for t in trials])
    stacked = np.stack([t.confusion for t in trials])
    pooled = stacked.sum(axis=0)
    table = {}
    tags = {tag for t in trials for tag in t.per_class_stats}
    for tag in sorted(tags, key=_class_order):
        rows = np.array([t.per_class_stats[tag] for t in trials if tag in t.per_class_stats])
        table[tag] = (float(rows[:, 0].mean()), float(rows[:, 1].mean()))
    return ExperimentSummary(len(trials), float(acc.mean()), float(acc.std()),
                             stacked.mean(axis=0), table, _recall(pooled, 0),
                             _recall(pooled, 1), list(trials))


def _trial_job(args):
    i, features, model_cfg, chain_cfg, exp_cfg, hidden_layers = args
    seed = exp_cfg.base_seed + i
    try:
        result = run_trial(features, model_cfg, chain_cfg, seed, hidden_layers,
                           exp_cfg.ratio, exp_cfg.threshold)
    except Exception as exc:
        raise TrialError(i, exc) from exc
    return result.without_chain()


def run_experiment(features: Sequence[FeatureVector], model_cfg: bnn.ModelConfig,
                   chain_cfg: ChainConfig, exp_cfg: ExperimentConfig = ExperimentConfig(),
                   hidden_layers=(5,)) -> ExperimentSummary:
    """Run ``exp_cfg.n_trials`` independent trials; trial ``i`` uses seed ``base_seed + i``."""
    if exp_cfg.n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    jobs = [(i, features, model_cfg, chain_cfg, exp_cfg, tuple(hidden_layers))
            for i in range(exp_cfg.n_trials)]
    if exp_cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=exp_cfg.jobs) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = []
        for job in jobs:
            results.append(_trial_job(job))
            log.info("trial %d: accuracy %.3f", job[0], results[-1].accuracy)
    return summarize(results)
