"""Unbiased stochastic optimizers for softmax models with many classes.

The likelihood is rewritten as a double sum over (datapoint, class)
pairs with one auxiliary variable per example, which admits cheap
unbiased stochastic gradients.  Two stabilized trainers (an exact
implicit/proximal update solved through Lambert-W, and the clip-based
U-max scheme) are provided next to vanilla SGD and the usual biased
baselines, plus a benchmarking harness.
"""

from .data import (Dataset, SparseVector, class_weights, load_dataset,
                   parse_sparse_file, preprocess, summary, summary_json,
                   write_libsvm)
from .errors import (BigSoftmaxError, BlowUpError, ConfigError,
                     DataFormatError, DomainError, EmptyDatasetError,
                     OverflowSignal, SolverError, TuningError,
                     UnsupportedExtensionError)
from .harness import (ComparisonResult, TuneResult, bench,
                      compare_formulations, evaluate, read_records_csv,
                      train, tune)
from .implicit import (ImplicitUpdateResult, implicit_update_1x1,
                       implicit_update_1xm, implicit_update_multi)
from .lambertw import lambert_w0, lambert_w0_exp
from .modelio import load_model, save_model
from .objective import (Bounds, ModelState, bounds, error_rate, f_ik_value,
                        f_value, init_state, log_likelihood, log_loss,
                        stoch_grad, u_star, u_star_all)
from .optimizers import (BASELINE_METHODS, METHODS, EpochRecord,
                         OptimizerConfig, RunResult, StepOutcome,
                         run_epochs)
from .synth import make_bibtex_like, make_synthetic, tiny_demo_examples

__version__ = "0.1.0"

__all__ = [
    "BASELINE_METHODS", "BigSoftmaxError", "BlowUpError", "Bounds",
    "ComparisonResult", "ConfigError", "DataFormatError", "Dataset",
    "DomainError", "EmptyDatasetError", "EpochRecord",
    "ImplicitUpdateResult", "METHODS", "ModelState", "OptimizerConfig",
    "OverflowSignal", "RunResult", "SolverError", "SparseVector",
    "StepOutcome", "TuneResult", "TuningError",
    "UnsupportedExtensionError", "bench", "bounds", "class_weights",
    "compare_formulations", "error_rate", "evaluate", "f_ik_value",
    "f_value", "implicit_update_1x1", "implicit_update_1xm",
    "implicit_update_multi", "init_state", "lambert_w0", "lambert_w0_exp",
    "load_dataset", "load_model", "log_likelihood", "log_loss",
    "make_bibtex_like", "make_synthetic", "parse_sparse_file",
    "preprocess", "read_records_csv", "run_epochs", "save_model",
    "stoch_grad", "summary", "summary_json", "tiny_demo_examples",
    "train", "tune", "u_star", "u_star_all", "write_libsvm",
]
