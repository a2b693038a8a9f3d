"""Experiment driver: grid tuning, benchmark runs, CSV/figure output.

The protocol mirrored here: learning rates are tuned per method on a
10% subsample over a fixed grid, then each method trains on the full
set at its chosen rate with identical sampling seeds, logging exact
log-loss and error rate at evenly spaced epochs.  Results stream to a
CSV (flushed row by row, so partial output survives an abort) with a
rendered PNG next to it.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .data import Dataset, class_weights
from .errors import ConfigError, TuningError
from .modelio import load_model
from .objective import error_rate, init_state, log_loss
from .optimizers import EpochRecord, OptimizerConfig, run_epochs
from .plots import render_curves

DEFAULT_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0)
CSV_HEADER = ("method", "dataset", "formulation", "eta0", "epoch",
              "log_loss", "error_rate", "elapsed_sec", "failed")
PAPER_FORMULATION_RATIO = 3.08   # reference average ratio at full scale


@dataclass
class TuneResult:
    method: str
    chosen_eta0: float
    finals: dict = field(default_factory=dict)     # eta0 -> final log-loss
    failures: dict = field(default_factory=dict)   # eta0 -> reason


@dataclass
class ComparisonResult:
    records: list
    finals: dict                 # (formulation, eta0) -> final log-loss
    stable_rates: list
    mean_final_ours: float
    mean_final_raman: float
    avg_ratio: float             # mean over stable rates of raman/ours


class CsvSink:
    """Streams EpochRecords to disk, one flushed line each."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(CSV_HEADER)
        self._fh.flush()
        self.rows = []

    def write(self, rec: EpochRecord) -> None:
        self._writer.writerow([
            rec.method, rec.dataset, rec.formulation, repr(rec.eta0),
            rec.epoch, repr(rec.log_loss), repr(rec.error_rate),
            repr(rec.elapsed_sec), "true" if rec.failed else "false"])
        self._fh.flush()
        self.rows.append(rec)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records_csv(path):
    """Parse a results CSV back into EpochRecords, strictly."""
    from .errors import DataFormatError
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != list(CSV_HEADER):
            raise DataFormatError(f"unexpected CSV header {header!r}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DataFormatError(
                    f"wrong field count {len(row)}", line_number=lineno)
            try:
                records.append(EpochRecord(
                    method=row[0], dataset=row[1], formulation=row[2],
                    eta0=float(row[3]), epoch=int(row[4]),
                    log_loss=float(row[5]), error_rate=float(row[6]),
                    elapsed_sec=float(row[7]),
                    failed={"true": True, "false": False}[row[8]]))
            except (ValueError, KeyError) as exc:
                raise DataFormatError(str(exc), line_number=lineno)
    return records


MIN_TUNE_EXAMPLES = 20
TUNE_EPOCHS = 50


def tuning_subsample(dataset: Dataset, frac: float, seed: int) -> Dataset:
    """Uniform without-replacement subsample, indices sorted for stability.

    Floored at MIN_TUNE_EXAMPLES (or the whole set if smaller) so that
    tuning on very small datasets still sees enough examples to screen
    out divergent rates.
    """
    import numpy as np
    n = dataset.n
    size = min(n, max(MIN_TUNE_EXAMPLES, int(frac * n)))
    rng = np.random.default_rng(np.random.PCG64(seed))
    idx = np.sort(rng.choice(n, size=size, replace=False))
    return dataset.subset(idx, name=f"{dataset.name}-tune")


def tune(dataset: Dataset, method: str, grid=DEFAULT_GRID,
         subsample_frac: float = 0.1, config: OptimizerConfig = None,
         formulation: str = "ours", timer=None) -> TuneResult:
    """Pick the grid rate with the lowest final log-loss on a subsample.

    Probes run TUNE_EPOCHS epochs regardless of the target run length.
    Failed rates (overflow, divergence) are recorded and skipped; ties
    resolve to the smaller rate.  Raises TuningError when nothing on
    the grid survives.
    """
    if not grid:
        raise ConfigError("empty learning-rate grid")
    if config is None:
        config = OptimizerConfig(method=method, eta0=1.0)
    sub = tuning_subsample(dataset, subsample_frac, config.seed)
    weights = class_weights(sub)
    result = TuneResult(method=method, chosen_eta0=math.nan)
    best = math.inf
    for eta0 in sorted(grid):
        cfg = replace(config, method=method, eta0=float(eta0),
                      eval_points=1, epochs=TUNE_EPOCHS)
        run = run_epochs(sub, weights, cfg,
                         init_state(sub, formulation), timer=timer)
        if run.failed:
            result.failures[float(eta0)] = (
                f"failed at epoch {run.records[-1].epoch}")
            result.finals[float(eta0)] = math.inf
            continue
        final = run.records[-1].log_loss
        result.finals[float(eta0)] = final
        if final < best:
            best = final
            result.chosen_eta0 = float(eta0)
    if not math.isfinite(result.chosen_eta0):
        raise TuningError(
            f"every learning rate failed for {method} on {dataset.name}",
            failures=result.failures)
    return result


def bench(dataset: Dataset, methods, config: OptimizerConfig, out,
          eta0s: dict = None, grid=DEFAULT_GRID, subsample_frac: float = 0.1,
          formulation: str = "ours", timer=None, plot: bool = True):
    """Train each method at its tuned (or given) rate, streaming a CSV.

    eta0s maps method name to an explicit rate; methods absent from it
    are grid-tuned first.  Returns (records, tune_results).
    """
    eta0s = dict(eta0s or {})
    tuned = {}
    for method in methods:
        if method not in eta0s:
            tr = tune(dataset, method, grid=grid,
                      subsample_frac=subsample_frac, config=config,
                      formulation=formulation, timer=timer)
            tuned[method] = tr
            eta0s[method] = tr.chosen_eta0
    weights = class_weights(dataset)
    with CsvSink(out) as sink:
        for method in methods:
            cfg = replace(config, method=method, eta0=eta0s[method])
            run_epochs(dataset, weights, cfg,
                       init_state(dataset, formulation),
                       eval_hook=sink.write, timer=timer)
        records = sink.rows
    if plot:
        render_curves(records, Path(out).with_suffix(".png"),
                      title=dataset.name)
    return records, tuned


def compare_formulations(dataset: Dataset, grid, config: OptimizerConfig,
                         out, timer=None, plot: bool = True,
                         method: str = "umax") -> ComparisonResult:
    """Run both u-conventions over the grid and report the loss ratio.

    A rate counts as stable when both arms complete without an overflow
    abort.  U-max runs always do because the clip bounds every exponent,
    so this comparison averages over the whole grid; the published
    full-scale ratio was computed the same way.  The summary lands in a
    JSON sidecar next to the CSV, alongside that reference for context.
    """
    weights = class_weights(dataset)
    finals = {}
    with CsvSink(out) as sink:
        for eta0 in sorted(grid):
            for formulation in ("ours", "raman"):
                cfg = replace(config, method=method, eta0=float(eta0))
                run = run_epochs(dataset, weights, cfg,
                                 init_state(dataset, formulation),
                                 eval_hook=sink.write, timer=timer)
                last = run.records[-1]
                finals[(formulation, float(eta0))] = (
                    math.inf if run.failed else last.log_loss)
        records = sink.rows

    stable = [float(e) for e in sorted(grid)
              if math.isfinite(finals[("ours", float(e))])
              and math.isfinite(finals[("raman", float(e))])]
    if stable:
        mean_ours = sum(finals[("ours", e)] for e in stable) / len(stable)
        mean_raman = sum(finals[("raman", e)] for e in stable) / len(stable)
        avg_ratio = sum(finals[("raman", e)] / finals[("ours", e)]
                        for e in stable) / len(stable)
    else:
        mean_ours = mean_raman = avg_ratio = math.nan
    result = ComparisonResult(records=records, finals=finals,
                              stable_rates=stable,
                              mean_final_ours=mean_ours,
                              mean_final_raman=mean_raman,
                              avg_ratio=avg_ratio)
    meta = {
        "dataset": dataset.name,
        "method": method,
        "grid": [float(e) for e in sorted(grid)],
        "stable_rates": stable,
        "mean_final_ours": mean_ours,
        "mean_final_raman": mean_raman,
        "avg_ratio_raman_over_ours": avg_ratio,
        "reference_avg_ratio": PAPER_FORMULATION_RATIO,
    }
    with open(str(out) + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if plot:
        render_curves(records, Path(out).with_suffix(".png"),
                      title=f"{dataset.name}: ours vs raman")
    return result


def evaluate(dataset: Dataset, model_path) -> dict:
    """Exact metrics of a saved model against a dataset."""
    state = load_model(model_path)
    k, d = state.W.shape
    if (k, d) != (dataset.k, dataset.d):
        raise ConfigError(
            f"model is {k} classes x {d} features, dataset is "
            f"{dataset.k} x {dataset.d}")
    return {
        "log_loss": log_loss(dataset, state.W),
        "error_rate": error_rate(dataset, state.W),
    }


def train(dataset: Dataset, config: OptimizerConfig, out_model=None,
          formulation: str = "ours", eval_hook=None, timer=None):
    """Single full training run; optionally saves the final model."""
    from .modelio import save_model
    weights = class_weights(dataset)
    result = run_epochs(dataset, weights, config,
                        init_state(dataset, formulation),
                        eval_hook=eval_hook, timer=timer)
    if out_model is not None:
        save_model(out_model, result.state)
    return result
