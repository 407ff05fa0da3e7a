"""Multi-seed sweeps and bits-to-threshold summaries."""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import csv
import io
import logging
import os

import numpy as np

from .config import RunConfig
from .errors import AggregationError
from .optim import run
from . import traces as tio

log = logging.getLogger(__name__)

MISSING = "—"
DEFAULT_QUANTILES = (0.5, 0.2, 0.05)
OUTPUT_ENV = "CANITA_OUTPUT_DIR"


def output_dir(path=None):
    return path or os.environ.get(OUTPUT_ENV) or "."


def _slug(text):
    return "".join(c if c.isalnum() else "-" for c in text).strip("-")


def trace_filename(algo, compressor, seed, fmt="csv"):
    return f"{algo}_{_slug(compressor)}_seed{seed}.{fmt}"


def run_cell(config):
    """Run every seed of one (algo, compressor) config; one trace per seed."""
    out = []
    for seed in config.seeds:
        out.extend(run(replace(config, seeds=(seed,))))
    return out


def run_to_files(config, directory=None):
    directory = output_dir(directory)
    paths = []
    for tr in run_cell(config):
        path = os.path.join(directory, trace_filename(config.algo, config.compressor, tr.meta["seed"], config.format))
        tio.write_trace(tr, path, config.format)
        paths.append(path)
    return paths


def _cell(args):
    config, directory = args
    return run_to_files(config, directory)


def sweep(config, algos, compressors, directory=None, jobs=1):
    """Cross algos x compressors x seeds; write every trace plus ``summary.csv``."""
    directory = output_dir(directory)
    cells = [(replace(config, algo=a, compressor=c), directory) for a in algos for c in compressors]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            groups = list(pool.map(_cell, cells))
    else:
        groups = [_cell(c) for c in cells]
    paths = [p for g in groups for p in g]
    summary = summarize([tio.read_trace(p) for p in paths], thresholds=config.thresholds or None)
    summary_path = os.path.join(directory, "summary.csv")
    with open(summary_path, "w") as fh:
        fh.write(summary.to_csv())
    return paths, summary


def bits_to_threshold(trace, threshold):
    """Smallest cumulative bit count at which loss_w <= threshold (inf if never)."""
    loss = trace.column("loss_w")
    bits = trace.column("bits_cum")
    hit = np.flatnonzero(loss <= threshold)
    return float(bits[hit[0]]) if hit.size else float("inf")


@dataclass
class SummaryRow:
    algo: str
    compressor: str
    threshold: float
    median_bits: float
    q1_bits: float
    q3_bits: float
    reached: int
    seeds: int

    @property
    def iqr(self):
        return self.q3_bits - self.q1_bits


@dataclass
class SweepSummary:
    rows: list
    thresholds: tuple

    def lookup(self, algo, compressor, threshold):
        for r in self.rows:
            if r.algo == algo and r.compressor == compressor and r.threshold == threshold:
                return r
        raise KeyError((algo, compressor, threshold))

    def to_csv(self):
        def fmt(v):
            return MISSING if not np.isfinite(v) else repr(float(v))

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["algo", "compressor", "threshold", "median_bits", "q1_bits", "q3_bits", "iqr_bits",
                         "reached", "seeds"])
        for r in self.rows:
            iqr = r.iqr if np.isfinite(r.q1_bits) and np.isfinite(r.q3_bits) else float("inf")
            writer.writerow([r.algo, r.compressor, repr(r.threshold), fmt(r.median_bits), fmt(r.q1_bits),
                             fmt(r.q3_bits), fmt(iqr), r.reached, r.seeds])
        return buf.getvalue()


def default_thresholds(traces, quantiles=DEFAULT_QUANTILES):
    base = [t for t in traces if t.meta.get("algo") == "qsgd"] or list(traces)
    losses = np.concatenate([t.column("loss_w") for t in base])
    losses = losses[np.isfinite(losses)]
    return tuple(float(np.quantile(losses, q)) for q in quantiles)


def summarize(traces, thresholds=None):
    """Median and IQR across seeds of bits-to-threshold per (algo, compressor)."""
    traces = list(traces)
    if not traces:
        raise AggregationError("no traces to summarize")
    dims = {t.meta.get("d") for t in traces}
    if len(dims) > 1:
        raise AggregationError(f"traces mix problem dimensions {sorted(map(str, dims))}")
    thresholds = tuple(thresholds) if thresholds else default_thresholds(traces)
    cells = {}
    for t in traces:
        cells.setdefault((t.meta.get("algo", "?"), t.meta.get("compressor", "?")), []).append(t)
    rows = []
    for (algo, comp) in sorted(cells):
        group = sorted(cells[(algo, comp)], key=lambda t: t.meta.get("seed", 0))
        for thr in thresholds:
            bits = np.sort([bits_to_threshold(t, thr) for t in group])
            q1, q3 = np.percentile(bits, [25, 75], method="nearest") if np.all(np.isfinite(bits)) else (
                float(bits[(len(bits) - 1) // 4]), float(bits[(3 * (len(bits) - 1) + 3) // 4]))
            rows.append(SummaryRow(algo, comp, thr, float(np.median(bits)), float(q1), float(q3),
                                   int(np.isfinite(bits).sum()), len(bits)))
    return SweepSummary(rows, thresholds)


def load_config(path=None, overrides=None):
    base = RunConfig()
    if path:
        with open(path) as fh:
            base = RunConfig.from_text(fh.read())
    if overrides:
        base = RunConfig.from_strings(overrides, base=base)
    return base
