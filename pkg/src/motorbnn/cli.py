"""Command-line interface: ``motorbnn {synth,features,train,experiment,classify}``.

Exit codes: 0 success, 2 input error, 3 inference error, 4 usage or
compatibility error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from motorbnn import model as bnn
from motorbnn.audio_io import load_wav, read_manifest, segment, write_manifest, write_wav
from motorbnn.config import RunConfig
from motorbnn.errors import (
    ConfigError,
    DivergenceError,
    MotorBNNError,
    SamplerInitError,
    ShapeError,
    TrialError,
)
from motorbnn.experiment import Normalizer, run_experiment, run_trial, split_dataset
from motorbnn.report import HistogramSpec, render_confusion, write_experiment_outputs
from motorbnn.sampler import PosteriorChain, decide, predictive_samples
from motorbnn.snapshot import Snapshot
from motorbnn.spectral import (
    featurize_record,
    features_csv,
    read_features_csv,
    segment_features,
)
from motorbnn.synth import generate_synthetic_dataset

EXIT_OK, EXIT_INPUT, EXIT_INFERENCE, EXIT_USAGE = 0, 2, 3, 4

log = logging.getLogger("motorbnn")


class CLIError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _manifest_features(path, spectral_cfg):
    try:
        entries = read_manifest(path)
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc), EXIT_INPUT) from exc
    feats = []
    for entry in entries:
        try:
            record = load_wav(entry.path, label=entry.label)
            record = replace(record, source_id=entry.raw.rpartition(",")[0].strip())
        except (OSError, MotorBNNError) as exc:
            raise CLIError(f"{path}:{entry.line}: {entry.raw}: {exc}", EXIT_INPUT) from exc
        feats.extend(featurize_record(record, spectral_cfg))
    return feats


def _synthetic_features(cfg: RunConfig):
    syn = cfg.raw["synthetic"]
    records = generate_synthetic_dataset(syn["n_per_class"], syn["sample_rate"], syn["seed"])
    return [f for r in records for f in featurize_record(r, cfg.spectral)]


def _load_features(args, cfg: RunConfig):
    sources = [bool(getattr(args, "features", None)), bool(args.manifest), bool(args.synthetic)]
    if sum(sources) != 1:
        raise CLIError("give exactly one of --features, --manifest or --synthetic", EXIT_USAGE)
    if args.synthetic:
        return _synthetic_features(cfg)
    if args.manifest:
        return _manifest_features(args.manifest, cfg.spectral)
    try:
        return read_features_csv(args.features)
    except (OSError, ValueError) as exc:
        raise CLIError(str(exc), EXIT_INPUT) from exc


def _load_config(args) -> RunConfig:
    try:
        return RunConfig.load(args.config)
    except OSError as exc:
        raise CLIError(str(exc), EXIT_INPUT) from exc


def cmd_synth(args) -> int:
    cfg = _load_config(args).override("synthetic", n_per_class=args.per_class, seed=args.seed)
    syn = cfg.raw["synthetic"]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for rec in generate_synthetic_dataset(syn["n_per_class"], syn["sample_rate"], syn["seed"]):
        rel = f"{rec.source_id}.wav"
        write_wav(out / rel, rec.samples, rec.sample_rate)
        rows.append((rel, rec.label))
    write_manifest(out / "manifest.csv", rows)
    log.info("wrote %d recordings to %s", len(rows), out)
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _load_config(args)
    spectral = cfg.spectral
    feats = _manifest_features(args.manifest, spectral)
    text = features_csv(feats, spectral.n_features)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args).override("chain", seed=args.seed)
    feats = _load_features(args, cfg)
    if args.features:
        n = len(feats[0].x) if feats else 0
        if n != cfg.spectral.n_features:
            raise CLIError(f"feature file has {n} columns, config expects "
                           f"{cfg.spectral.n_features}", EXIT_USAGE)
    exp = cfg.experiment
    seed = cfg.chain.seed
    if args.map:
        train, test = split_dataset(feats, exp.ratio, seed)
        norm = Normalizer.fit([f.x for f in train])
        data = bnn.Dataset(norm.transform([f.x for f in train]), [f.label for f in train])
        shape = bnn.NetworkShape(data.X.shape[1], cfg.hidden_layers)
        init = bnn.init_params(shape, cfg.model, np.random.default_rng([seed, 1]))
        fit = bnn.map_estimate(data, cfg.model, shape, init, args.map_steps, args.map_lr)
        if not fit.improved:
            log.warning("MAP ascent did not improve the log joint")
        chain = PosteriorChain(fit.params.w[None, :], 0, 0, replace(cfg.chain, n_steps=1, burn_in=0,
                                                                      thin=1), shape=shape)
        outputs = predictive_samples(chain, norm.transform([f.x for f in test]))[0]
        labels = [f.label for f in test]
        preds = [decide(float(p), exp.threshold) for p in outputs]
        cm = np.zeros((2, 2), dtype=int)
        for t, p in zip(labels, preds):
            cm[t, p] += 1
        kind = "map"
    else:
        result = run_trial(feats, cfg.model, cfg.chain, seed, cfg.hidden_layers, exp.ratio,
                           exp.threshold)
        chain, norm, shape, cm = result.chain, result.normalizer, result.chain.shape, result.confusion
        kind = "posterior"
    snap = Snapshot(kind, cfg.spectral, shape, cfg.model, norm, chain, exp.threshold)
    out = Path(args.out)
    snap.save(out)
    acc = float(np.trace(cm) / cm.sum())
    report = f"seed {seed}\naccuracy {acc:.4f}\n" + render_confusion(cm)
    out.with_suffix(".trial.txt").write_text(report)
    sys.stdout.write(report)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _load_config(args).override("experiment", n_trials=args.trials, base_seed=args.seed,
                                      jobs=args.jobs)
    outdir = args.out or cfg.raw["paths"]["outdir"]
    if not outdir:
        raise CLIError("no output directory (use --out)", EXIT_USAGE)
    if not args.manifest and not args.synthetic and not args.features:
        args.manifest = cfg.raw["paths"]["manifest"]
    feats = _load_features(args, cfg)
    summary = run_experiment(feats, cfg.model, cfg.chain, cfg.experiment, cfg.hidden_layers)
    write_experiment_outputs(summary, outdir, HistogramSpec(cfg.raw["report"]["hist_bins"]),
                             config=cfg.to_dict())
    sys.stdout.write(f"trials {summary.n_trials}  mean accuracy {summary.mean_accuracy:.4f}  "
                     f"fault recall {summary.fault_recall:.4f}  "
                     f"healthy recall {summary.healthy_recall:.4f}\n")
    return EXIT_OK


def cmd_classify(args) -> int:
    try:
        snap = Snapshot.load(args.snapshot)
    except OSError as exc:
        raise CLIError(str(exc), EXIT_INPUT) from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise CLIError(f"invalid snapshot: {exc}", EXIT_USAGE) from exc
    try:
        record = load_wav(args.wav)
    except (OSError, MotorBNNError) as exc:
        raise CLIError(f"{args.wav}: {exc}", EXIT_INPUT) from exc
    segs = segment(record, snap.spectral.window_seconds)
    if not segs:
        raise CLIError(f"{args.wav}: recording is {record.duration:.3f} s, shorter than one "
                       f"{snap.spectral.window_seconds} s window", EXIT_USAGE)
    X = np.array([segment_features(s, snap.spectral) for s in segs])
    if X.shape[1] != snap.shape.n_inputs or X.shape[1] != snap.normalizer.means.size:
        raise CLIError(f"snapshot expects {snap.shape.n_inputs} features, got {X.shape[1]}",
                       EXIT_USAGE)
    draws = predictive_samples(snap.chain, snap.normalizer.transform(X))
    per_segment = []
    for i in range(len(segs)):
        vals = draws[:, i]
        mean = float(vals.mean())
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        per_segment.append({"index": i, "label": decide(mean, snap.threshold),
                            "mean": mean, "std": std})
    votes = sum(s["label"] for s in per_segment)
    # majority vote, ties go to faulty
    label = int(2 * votes >= len(per_segment))
    out = {"label": label, "mean": float(draws.mean()),
           "std": float(draws.std(ddof=1)) if draws.size > 1 else 0.0,
           "segments": per_segment}
    sys.stdout.write(json.dumps(out) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="motorbnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        return p

    p = common(sub.add_parser("synth", help="write a synthetic dataset and manifest"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--per-class", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("features", help="manifest -> feature CSV"))
    p.add_argument("manifest")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.set_defaults(func=cmd_features)

    def data_source(p):
        p.add_argument("--manifest")
        p.add_argument("--features", help="feature CSV written by 'features'")
        p.add_argument("--synthetic", action="store_true")

    p = common(sub.add_parser("train", help="one split + inference, write a snapshot"))
    data_source(p)
    p.add_argument("--out", required=True, help="snapshot JSON path")
    p.add_argument("--seed", type=int)
    p.add_argument("--map", action="store_true", help="fit a MAP point estimate instead")
    p.add_argument("--map-steps", type=int, default=2000)
    p.add_argument("--map-lr", type=float, default=0.01)
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("experiment", help="repeated-split evaluation"))
    data_source(p)
    p.add_argument("--out", help="output directory")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("classify", help="classify a WAV file with a snapshot")
    p.add_argument("snapshot")
    p.add_argument("wav")
    p.set_defaults(func=cmd_classify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"motorbnn: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, ShapeError) as exc:
        print(f"motorbnn: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrialError as exc:
        print(f"motorbnn: {exc}", file=sys.stderr)
        return EXIT_INFERENCE
    except (DivergenceError, SamplerInitError) as exc:
        print(f"motorbnn: inference failed: {exc}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
