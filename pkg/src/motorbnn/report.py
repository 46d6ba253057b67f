"""Text tables and plot-ready CSV files for experiment results."""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from motorbnn.audio_io import CLASS_LABELS

DISPLAY_NAMES = {
    "healthy": "Healthy",
    "fault1": "Fault 1",
    "fault2": "Fault 2",
    "fault3": "Fault 3",
    "fault4": "Fault 4",
}


@dataclass(frozen=True)
class HistogramSpec:
    bins: int = 20
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("a histogram needs at least 2 bins")


def _percent(count: int, total: int) -> str:
    return "n/a" if total == 0 else f"{100.0 * count / total:.1f}%"


def render_confusion(confusion) -> str:
    """2x2 confusion table with per-row percentages.

    Accepts a TrialResult or a bare matrix (rows true, columns predicted).
    """
    cm = np.asarray(getattr(confusion, "confusion", confusion))
    names = ("healthy", "faulty")
    lines = [f"{'':<14}{'pred healthy':>20}{'pred faulty':>20}"]
    for i, name in enumerate(names):
        total = int(cm[i].sum())
        cells = [f"{int(cm[i, j])} ({_percent(int(cm[i, j]), total)})" for j in range(2)]
        lines.append(f"{'true ' + name:<14}{cells[0]:>20}{cells[1]:>20}")
    return "\n".join(lines) + "\n"


def histogram_counts(values, spec: HistogramSpec = HistogramSpec()) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    width = (spec.hi - spec.lo) / spec.bins
    idx = np.floor((values - spec.lo) / width).astype(int)
    idx = np.clip(idx, 0, spec.bins - 1)
    return np.bincount(idx, minlength=spec.bins)


def predictive_histograms(grouped: dict[str, list[float]],
                          spec: HistogramSpec = HistogramSpec()) -> dict[str, str]:
    """Per-class CSV text with columns ``bin_lo,bin_hi,count``."""
    edges = np.linspace(spec.lo, spec.hi, spec.bins + 1)
    out = {}
    for tag, values in grouped.items():
        counts = histogram_counts(values, spec)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            writer.writerow([f"{lo:.4f}", f"{hi:.4f}", int(c)])
        out[tag] = buf.getvalue()
    return out


def render_table1(summary) -> str:
    """Per-class predictor mean and standard deviation, three decimals."""
    table = getattr(summary, "table", summary)
    lines = [f"{'Class name':<12}{'Predictor mean value':>22}{'Predictor standard deviation':>30}"]
    for tag in CLASS_LABELS:
        if tag in table:
            mean, std = table[tag]
            lines.append(f"{DISPLAY_NAMES[tag]:<12}{mean:>22.3f}{std:>30.3f}")
        else:
            lines.append(f"{DISPLAY_NAMES[tag]:<12}{'n/a':>22}{'n/a':>30}")
    return "\n".join(lines) + "\n"


def grouped_predictions(summary) -> dict[str, list[float]]:
    """Predictive means of every test item across all trials, keyed by class."""
    grouped = defaultdict(list)
    for trial in summary.trials:
        for p in trial.predictions:
            grouped[p.class_tag].append(p.mean)
    return {tag: grouped[tag] for tag in CLASS_LABELS if tag in grouped}


def results_csv(summary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["trial", "seed", "accuracy", "tn", "fp", "fn", "tp"]
    for tag in CLASS_LABELS:
        header += [f"{tag}_mean", f"{tag}_std"]
    writer.writerow(header)
    for i, t in enumerate(summary.trials):
        row = [i, t.seed, repr(t.accuracy), t.tn, t.fp, t.fn, t.tp]
        for tag in CLASS_LABELS:
            stats = t.per_class_stats.get(tag)
            row += [repr(stats[0]), repr(stats[1])] if stats else ["", ""]
        writer.writerow(row)
    return buf.getvalue()


def write_experiment_outputs(summary, outdir, spec: HistogramSpec = HistogramSpec(),
                             config: dict | None = None) -> list[Path]:
    """Write results.csv, summary.json, table1.txt, confusion_<trial>.txt and hist_<class>.csv."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    def put(name, text):
        path = outdir / name
        path.write_text(text)
        written.append(path)

    put("results.csv", results_csv(summary))
    payload = summary.to_dict()
    if config is not None:
        payload = {"config": config, **payload}
    put("summary.json", json.dumps(payload, indent=2, sort_keys=False) + "\n")
    put("table1.txt", render_table1(summary))
    for i, t in enumerate(summary.trials):
        put(f"confusion_{i}.txt", render_confusion(t))
    for tag, text in predictive_histograms(grouped_predictions(summary), spec).items():
        put(f"hist_{tag}.csv", text)
    return written
