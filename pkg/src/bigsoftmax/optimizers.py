"""Training loops over the double-sum objective.

Four unbiased methods (vanilla SGD, U-max, implicit SGD in single and
multi class variants) and three biased baselines (OVE, NCE, IS) share
one epoch driver.  Sampling, the learning-rate schedule, and evaluation
points are identical across methods for a given seed, so curves from
different methods are directly comparable.

Conventions baked in here:

  * learning rates are per-datapoint: the step uses eta0/N decayed by a
    fixed factor each epoch;
  * one epoch is N sampled iterations, i drawn uniformly with
    replacement;
  * vanilla and U-max draw their m classes with replacement, implicit
    multi-class and the baselines draw without replacement;
  * every run starts from W = 0, u = log K.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import ClassWeights, Dataset
from .errors import BlowUpError, ConfigError
from .implicit import implicit_update_1x1, implicit_update_1xm
from .objective import (EXP_GUARD, FORMULATIONS, ModelState, bounds,
                        error_rate, f_value, init_state, log_loss,
                        u_cap_default)

METHODS = ("vanilla", "umax", "isgd", "isgd_multi", "ove", "nce", "is")
BASELINE_METHODS = ("ove", "nce", "is")
# these sample their class set without replacement
_DISTINCT_SAMPLERS = ("isgd_multi", "ove", "nce", "is")


@dataclass
class OptimizerConfig:
    """Everything a run needs besides the dataset itself."""
    method: str
    eta0: float
    decay: float = 0.9
    mu: float = 0.0
    delta: float = 1.0
    m: int = 5
    epochs: int = 50
    seed: int = 0
    projection: bool = False
    u_cap: float = None     # override for the u box when mu = 0
    eval_points: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if not (self.eta0 > 0.0 and math.isfinite(self.eta0)):
            raise ConfigError(f"eta0 must be positive, got {self.eta0!r}")
        if not 0.0 < self.decay <= 1.0:
            raise ConfigError(f"decay must be in (0, 1], got {self.decay!r}")
        if self.mu < 0.0:
            raise ConfigError(f"mu must be nonnegative, got {self.mu!r}")
        if not self.delta > 0.0:
            raise ConfigError(f"delta must be positive, got {self.delta!r}")
        if self.m < 1:
            raise ConfigError(f"m must be at least 1, got {self.m!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be at least 1, got {self.epochs!r}")
        if not 1 <= self.eval_points <= self.epochs:
            raise ConfigError(
                f"eval_points must be in [1, epochs], got {self.eval_points!r}")
        if self.u_cap is not None and not self.u_cap > 0.0:
            raise ConfigError(f"u_cap must be positive, got {self.u_cap!r}")


@dataclass
class StepOutcome:
    applied: bool
    overflow: bool = False
    exponent: float = 0.0
    clip_event: bool = False
    f_decrease_on_clip: float = None


@dataclass
class EpochRecord:
    method: str
    dataset: str
    formulation: str
    eta0: float
    epoch: int
    log_loss: float
    error_rate: float
    elapsed_sec: float
    failed: bool


@dataclass
class RunResult:
    state: ModelState
    records: list = field(default_factory=list)
    failed: bool = False


def _sgd_core(dataset: Dataset, weights: ClassWeights, state: ModelState,
              mu: float, eta: float, i: int, ks, z_y: float,
              z_k: np.ndarray) -> StepOutcome:
    """Explicit gradient step shared by vanilla and U-max.

    Logits are precomputed by the caller so U-max can clip u_i between
    computing them and taking the step.  Returns without touching the
    state when any exponent breaches the overflow guard.
    """
    n, big_k = dataset.n, dataset.k
    y = int(dataset.labels[i])
    sv = dataset.features[i]
    idx, vals = sv.indices, sv.values
    m = len(ks)
    u = float(state.u[i])
    scale = eta * n * (big_k - 1) / m

    if state.formulation == "ours":
        expos = z_k - z_y - u
        worst = float(expos.max())
        if not worst <= EXP_GUARD:
            return StepOutcome(applied=False, overflow=True, exponent=worst)
        ex = np.exp(expos)
        du = n * (1.0 - math.exp(-u)) - n * (big_k - 1) / m * float(ex.sum())
        state.u[i] = max(0.0, u - eta * du)
    else:
        expo_y = z_y - u
        expos = z_k - u
        worst = max(float(expos.max()), expo_y)
        if not worst <= EXP_GUARD:
            return StepOutcome(applied=False, overflow=True, exponent=worst)
        ex = np.exp(expos)
        e_y = math.exp(expo_y)
        du = n * (1.0 - e_y - (big_k - 1) / m * float(ex.sum()))
        state.u[i] = u - eta * du

    # aggregate duplicate draws of the same class: exp terms add, and the
    # ridge shrink applies once per occurrence
    acc = {}
    for j in range(m):
        k = int(ks[j])
        if k in acc:
            ent = acc[k]
            ent[0] += 1
            ent[1] += ex[j]
        else:
            acc[k] = [1, ex[j]]
    total = 0.0
    for k, (count, csum) in acc.items():
        if mu > 0.0:
            state.W[k] *= 1.0 - eta * mu * float(weights.beta[k]) * count
        state.W[k, idx] -= (scale * csum) * vals
        total += csum
    if state.formulation == "ours":
        label_coef = scale * total
    else:
        label_coef = -eta * n * (e_y - 1.0)
    if mu > 0.0:
        state.W[y] *= 1.0 - eta * mu * float(weights.beta[y])
    state.W[y, idx] += label_coef * vals
    return StepOutcome(applied=True, exponent=worst)


def _logits(state: ModelState, idx, vals, y: int, ks):
    z_y = float(state.W[y, idx] @ vals)
    z_k = np.array([float(state.W[k, idx] @ vals) for k in ks])
    return z_y, z_k


def step_vanilla(dataset: Dataset, weights: ClassWeights, state: ModelState,
                 mu: float, eta: float, i: int, ks) -> StepOutcome:
    y = int(dataset.labels[i])
    sv = dataset.features[i]
    z_y, z_k = _logits(state, sv.indices, sv.values, y, ks)
    return _sgd_core(dataset, weights, state, mu, eta, i, ks, z_y, z_k)


def _clip_target(state: ModelState, z_y: float, z_k: np.ndarray) -> float:
    # log(1 + sum_j e^{gap_j}) for ours; log(e^{z_y} + sum_j e^{z_kj})
    # for the shifted variable, both via a max-shifted log-sum-exp
    if state.formulation == "ours":
        terms = np.concatenate(([0.0], z_k - z_y))
    else:
        terms = np.concatenate(([z_y], z_k))
    t = float(terms.max())
    return t + math.log(float(np.exp(terms - t).sum()))


def step_umax(dataset: Dataset, weights: ClassWeights, state: ModelState,
              mu: float, eta: float, i: int, ks, delta: float,
              u_box: float, w_ball: float = math.inf,
              projection: bool = False,
              measure_clip: bool = False) -> StepOutcome:
    """Clip u_i if it lags the sampled classes, step, then project.

    u_box and w_ball are the precomputed projection radii; w_ball only
    binds when mu > 0 and projection is enabled.  measure_clip records
    the exact objective decrease of the clip (quadratic cost, tests
    only).
    """
    y = int(dataset.labels[i])
    sv = dataset.features[i]
    z_y, z_k = _logits(state, sv.indices, sv.values, y, ks)
    clip = False
    f_drop = None
    # duplicate draws must count once here: the clip target has to stay
    # below the full-sum optimum or the descent guarantee breaks
    _, first = np.unique(np.asarray(ks), return_index=True)
    target = _clip_target(state, z_y, z_k[first])
    if state.u[i] < target - delta:
        if measure_clip:
            before = f_value(dataset, weights, state, mu)
        state.u[i] = target
        clip = True
        if measure_clip:
            f_drop = before - f_value(dataset, weights, state, mu)
    out = _sgd_core(dataset, weights, state, mu, eta, i, ks, z_y, z_k)
    if out.applied:
        if state.formulation == "ours":
            state.u[i] = min(max(0.0, float(state.u[i])), u_box)
        else:
            state.u[i] = min(float(state.u[i]), z_y + u_box)
        if mu > 0.0 and projection and math.isfinite(w_ball):
            norm = float(np.linalg.norm(state.W))
            if norm > w_ball:
                state.W *= w_ball / norm
    return StepOutcome(applied=out.applied, overflow=out.overflow,
                       exponent=out.exponent, clip_event=clip,
                       f_decrease_on_clip=f_drop)


def step_isgd(dataset: Dataset, weights: ClassWeights, state: ModelState,
              mu: float, eta: float, i: int, k: int) -> StepOutcome:
    res = implicit_update_1x1(dataset, weights, state, mu, eta, i, k)
    y = int(dataset.labels[i])
    state.W[k] = res.w_k_new
    state.W[y] = res.w_y_new
    state.u[i] = res.u_new
    return StepOutcome(applied=True)


def step_isgd_multi(dataset: Dataset, state: ModelState, mu: float,
                    eta: float, i: int, classes) -> StepOutcome:
    res = implicit_update_1xm(dataset, state, mu, eta, i, classes)
    y = int(dataset.labels[i])
    state.W[list(classes)] = res.w_class_new
    state.W[y] = res.w_y_new
    state.u[i] = res.u_new
    return StepOutcome(applied=True)


def _sigmoid(t: float) -> float:
    if t >= 0.0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def step_baseline(method: str, dataset: Dataset, weights: ClassWeights,
                  state: ModelState, mu: float, eta: float, i: int,
                  ks) -> StepOutcome:
    """One step of OVE, NCE, or IS.  W only; u is not consulted.

    All three have gradients bounded by N(K-1)|x| regardless of the
    state, so there is no overflow path here.
    """
    if method not in BASELINE_METHODS:
        raise ConfigError(f"not a baseline method: {method!r}")
    n, big_k = dataset.n, dataset.k
    y = int(dataset.labels[i])
    sv = dataset.features[i]
    idx, vals = sv.indices, sv.values
    m = len(ks)
    z_y = float(state.W[y, idx] @ vals)
    z_k = np.array([float(state.W[k, idx] @ vals) for k in ks])

    if method == "ove":
        scale = eta * n * (big_k - 1) / m
        sig = np.array([_sigmoid(z - z_y) for z in z_k])
        coefs = scale * sig
        label_coef = float(coefs.sum())
    elif method == "is":
        # softmax over {y} u ks with sampled logits tilted by the
        # proposal mass m/(K-1)
        s = np.concatenate(([z_y], z_k - math.log(m / (big_k - 1.0))))
        s -= s.max()
        p = np.exp(s)
        p /= p.sum()
        coefs = eta * n * p[1:]
        label_coef = eta * n * (1.0 - p[0])
    else:
        log_mq = math.log(m / (big_k - 1.0))
        sig = np.array([_sigmoid(z - log_mq) for z in z_k])
        coefs = eta * n * sig
        label_coef = eta * n * _sigmoid(-(z_y - log_mq))

    for j, k in enumerate(ks):
        if mu > 0.0:
            state.W[k] *= 1.0 - eta * mu * float(weights.beta[k])
        state.W[k, idx] -= coefs[j] * vals
    if mu > 0.0:
        state.W[y] *= 1.0 - eta * mu * float(weights.beta[y])
    state.W[y, idx] += label_coef * vals
    return StepOutcome(applied=True)


def _sample_classes(rng, method: str, big_k: int, m: int, y: int):
    if method == "isgd":
        k = int(rng.integers(big_k - 1))
        return k + (k >= y)
    if method in _DISTINCT_SAMPLERS:
        ks = rng.choice(big_k - 1, size=m, replace=False)
    else:
        ks = rng.integers(big_k - 1, size=m)
    return ks + (ks >= y)


def run_epochs(dataset: Dataset, weights: ClassWeights,
               config: OptimizerConfig, state: ModelState = None,
               eval_hook=None, timer=None) -> RunResult:
    """Drive config.epochs epochs of the configured method.

    Evaluation happens after epochs ceil-spaced so that eval_points
    records land evenly through the run, the last at the final epoch.
    Wall time accumulates over training iterations only; metric
    evaluation is untimed, and the timer is injectable so tests can pin
    the elapsed column.  A vanilla overflow aborts the run with a
    single failed record.
    """
    if state is None:
        state = init_state(dataset, "ours")
    if state.formulation not in FORMULATIONS:
        raise ConfigError(f"unknown formulation {state.formulation!r}")
    method = config.method
    if method in ("isgd", "isgd_multi") and state.formulation != "ours":
        raise ConfigError(
            "the implicit solver is only derived for the u-convention "
            "formulation; run it with formulation=ours")
    n, big_k = dataset.n, dataset.k
    m = 1 if method == "isgd" else config.m
    if method in _DISTINCT_SAMPLERS and m > big_k - 1:
        raise ConfigError(
            f"m={m} exceeds the {big_k - 1} distinct non-label classes")
    if timer is None:
        timer = time.perf_counter

    box = bounds(dataset, config.mu, weights)
    if config.mu > 0.0:
        u_box = box.b_u
    else:
        u_box = config.u_cap if config.u_cap is not None \
            else u_cap_default(big_k)
    eval_epochs = {config.epochs * j // config.eval_points
                   for j in range(1, config.eval_points + 1)}

    rng = np.random.default_rng(np.random.PCG64(config.seed))
    result = RunResult(state=state)
    elapsed = 0.0

    def emit(epoch: int, failed: bool):
        if not failed:
            try:
                ll = log_loss(dataset, state.W, config.mu)
                er = error_rate(dataset, state.W)
            except BlowUpError:
                # weights degraded to non-finite without tripping the
                # step guard (possible through ridge blowup)
                failed = True
        if failed:
            result.failed = True
            rec = EpochRecord(method, dataset.name, state.formulation,
                              config.eta0, epoch, math.inf, math.nan,
                              elapsed, True)
        else:
            rec = EpochRecord(method, dataset.name, state.formulation,
                              config.eta0, epoch, ll, er, elapsed, False)
        result.records.append(rec)
        if eval_hook is not None:
            eval_hook(rec)
        return failed

    for epoch_idx in range(config.epochs):
        eta = (config.eta0 / n) * config.decay ** epoch_idx
        t0 = timer()
        for _ in range(n):
            i = int(rng.integers(n))
            y = int(dataset.labels[i])
            ks = _sample_classes(rng, method, big_k, m, y)
            if method == "vanilla":
                out = step_vanilla(dataset, weights, state, config.mu,
                                   eta, i, ks)
            elif method == "umax":
                out = step_umax(dataset, weights, state, config.mu, eta,
                                i, ks, config.delta, u_box, box.b_w,
                                config.projection)
            elif method == "isgd":
                out = step_isgd(dataset, weights, state, config.mu, eta,
                                i, ks)
            elif method == "isgd_multi":
                out = step_isgd_multi(dataset, state, config.mu, eta,
                                      i, ks)
            else:
                out = step_baseline(method, dataset, weights, state,
                                    config.mu, eta, i, ks)
            if out.overflow:
                elapsed += timer() - t0
                emit(epoch_idx + 1, failed=True)
                return result
        elapsed += timer() - t0
        if epoch_idx + 1 in eval_epochs:
            if emit(epoch_idx + 1, failed=False):
                return result
    return result
