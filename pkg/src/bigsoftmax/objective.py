"""Softmax likelihood and its double-sum reformulation.

The ridge-penalized log-likelihood L(W) is expensive per step because of
the log-normalizer over all K classes.  Bounding -log by its convex
conjugate introduces one auxiliary variable u_i per example and yields an
objective f(u, W) that is a plain double sum over (example, class) pairs,

    L(W) = -min_u f(u, W) + N,

so unbiased stochastic gradients exist that touch one class row at a
time.  Two variants are implemented: "ours", whose exponents are class
margins minus u_i, and "raman", which keeps a per-example estimate of the
full log-normalizer instead.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import ClassWeights, Dataset
from .errors import BlowUpError, ConfigError, OverflowSignal

# exp() is finite up to ~709; stop well short so downstream products stay
# representable.
EXP_GUARD = 700.0

FORMULATIONS = ("ours", "raman")


def guarded_exp(z: float, context: str = "") -> float:
    """exp(z) that refuses to overflow: z > EXP_GUARD (or nan) raises."""
    if not z <= EXP_GUARD:
        raise OverflowSignal(z, context)
    return math.exp(z)


@dataclass
class ModelState:
    """Weight rows plus the per-example auxiliary variables.

    For formulation "raman" the u slot stores the shifted variable
    u_i + x_i.w_{y_i}; the interpretation flag is the only difference.
    """
    W: np.ndarray                 # (K, D)
    u: np.ndarray                 # (N,)
    formulation: str = "ours"

    def copy(self) -> "ModelState":
        return ModelState(self.W.copy(), self.u.copy(), self.formulation)

    def check_finite(self) -> None:
        if not np.isfinite(self.W).all():
            bad = np.argwhere(~np.isfinite(self.W))[0]
            raise BlowUpError(f"non-finite weight at row {bad[0]}, col {bad[1]}")
        if not np.isfinite(self.u).all():
            bad = int(np.flatnonzero(~np.isfinite(self.u))[0])
            raise BlowUpError(f"non-finite u at example {bad}")


@dataclass(frozen=True)
class Bounds:
    """Compact-set and gradient bounds used by the projected variants."""
    b_x: float
    b_w: float
    b_u: float
    b_f: float
    finite: bool


@dataclass
class StochGrad:
    """Gradient of the sampled summand; only three coordinates are active."""
    du: float
    dw_k: np.ndarray
    dw_y: np.ndarray
    exponent: float
    i: int
    k: int


def init_state(dataset: Dataset, formulation: str = "ours") -> ModelState:
    """Zero weights; u_i = log K is exact for both variants at W = 0."""
    if formulation not in FORMULATIONS:
        raise ConfigError(f"unknown formulation {formulation!r}")
    return ModelState(
        W=np.zeros((dataset.k, dataset.d)),
        u=np.full(dataset.n, math.log(dataset.k)),
        formulation=formulation,
    )


def _label_logits(dataset: Dataset, W: np.ndarray) -> np.ndarray:
    Z = dataset.to_csr() @ W.T
    return Z


def log_likelihood(dataset: Dataset, W: np.ndarray, mu: float = 0.0) -> float:
    """Exact ridge-penalized log-likelihood, log-sum-exp stabilized."""
    if not np.isfinite(W).all():
        raise BlowUpError("non-finite weights in log_likelihood")
    Z = _label_logits(dataset, W)
    zmax = Z.max(axis=1)
    lse = zmax + np.log(np.exp(Z - zmax[:, None]).sum(axis=1))
    zy = Z[np.arange(dataset.n), dataset.labels]
    penalty = 0.5 * mu * float((W * W).sum())
    return float((zy - lse).sum()) - penalty


def log_loss(dataset: Dataset, W: np.ndarray, mu: float = 0.0) -> float:
    """Negated log-likelihood; N log K at W = 0, lower is better."""
    # 0.0 - x rather than -x so a saturated model reports 0.0, not -0.0
    return 0.0 - log_likelihood(dataset, W, mu)


def error_rate(dataset: Dataset, W: np.ndarray) -> float:
    """Argmax prediction error; ties resolve to the lowest class id."""
    Z = _label_logits(dataset, W)
    pred = np.argmax(Z, axis=1)
    return float((pred != dataset.labels).mean())


def u_star(dataset: Dataset, W: np.ndarray, i: int) -> float:
    """Optimal auxiliary value log(1 + sum_{k != y_i} e^{margin_k})."""
    sv = dataset.features[i]
    z = W[:, sv.indices] @ sv.values
    y = int(dataset.labels[i])
    gaps = np.delete(z - z[y], y)
    m = max(0.0, float(gaps.max())) if len(gaps) else 0.0
    return m + math.log(math.exp(-m) + float(np.exp(gaps - m).sum()))


def u_star_all(dataset: Dataset, W: np.ndarray) -> np.ndarray:
    """Vectorized u_star over all examples."""
    Z = _label_logits(dataset, W)
    zy = Z[np.arange(dataset.n), dataset.labels]
    gaps = Z - zy[:, None]
    gaps[np.arange(dataset.n), dataset.labels] = -np.inf
    m = np.maximum(0.0, gaps.max(axis=1))
    return m + np.log(np.exp(-m) + np.exp(gaps - m[:, None]).sum(axis=1))


def f_value(dataset: Dataset, weights: ClassWeights, state: ModelState,
            mu: float = 0.0) -> float:
    """Exact double-sum objective; -min_u f + N recovers the likelihood.

    Raises BlowUpError if any exponent crosses the overflow guard.
    """
    W, u = state.W, state.u
    state.check_finite()
    Z = _label_logits(dataset, W)
    rows = np.arange(dataset.n)
    zy = Z[rows, dataset.labels]
    if state.formulation == "ours":
        expo = Z - zy[:, None] - u[:, None]
    elif state.formulation == "raman":
        expo = Z - u[:, None]
    else:
        raise ConfigError(f"unknown formulation {state.formulation!r}")
    expo[rows, dataset.labels] = -np.inf
    worst = float(expo.max())
    if not worst <= EXP_GUARD:
        raise BlowUpError(f"f_value exponent {worst} exceeds guard")
    cross = np.exp(expo).sum(axis=1)
    if state.formulation == "ours":
        per_example = u + np.exp(-u) + cross
    else:
        eyy = zy - u
        if not float(eyy.max()) <= EXP_GUARD:
            raise BlowUpError("f_value label exponent exceeds guard")
        per_example = u - zy + np.exp(eyy) + cross
    penalty = 0.5 * mu * float((W * W).sum())
    return float(per_example.sum()) + penalty


def f_ik_value(dataset: Dataset, weights: ClassWeights, state: ModelState,
               mu: float, i: int, k: int) -> float:
    """The sampled summand whose expectation over (i, k) is f_value."""
    y = int(dataset.labels[i])
    if k == y:
        raise ConfigError("sampled class equals the label")
    n, big_k = dataset.n, dataset.k
    sv = dataset.features[i]
    zk = sv.dot(state.W[k])
    zy = sv.dot(state.W[y])
    ui = float(state.u[i])
    ridge = 0.5 * mu * (weights.beta[y] * float(state.W[y] @ state.W[y])
                        + weights.beta[k] * float(state.W[k] @ state.W[k]))
    if state.formulation == "ours":
        main = ui + math.exp(-ui) + (big_k - 1) * guarded_exp(zk - zy - ui)
    else:
        main = (ui - zy + guarded_exp(zy - ui)
                + (big_k - 1) * guarded_exp(zk - ui))
    return n * main + ridge


def stoch_grad(dataset: Dataset, weights: ClassWeights, state: ModelState,
               mu: float, i: int, k: int) -> StochGrad:
    """Gradient of f_ik in its active coordinates (u_i, w_k, w_{y_i}).

    The exponent is returned so callers can detect danger before any
    state is touched; crossing the guard raises OverflowSignal.
    """
    y = int(dataset.labels[i])
    if k == y:
        raise ConfigError("sampled class equals the label")
    n, big_k = dataset.n, dataset.k
    sv = dataset.features[i]
    x = sv.to_dense(dataset.d)
    zk = sv.dot(state.W[k])
    zy = sv.dot(state.W[y])
    ui = float(state.u[i])
    bk = float(weights.beta[k])
    by = float(weights.beta[y])
    if state.formulation == "ours":
        exponent = zk - zy - ui
        big_e = n * (big_k - 1) * guarded_exp(exponent, f"pair ({i},{k})")
        dw_k = big_e * x + mu * bk * state.W[k]
        dw_y = -big_e * x + mu * by * state.W[y]
        du = n * (1.0 - math.exp(-ui)) - big_e
    elif state.formulation == "raman":
        ey = zy - ui
        ek = zk - ui
        exponent = max(ey, ek)
        ey_val = n * guarded_exp(ey, f"pair ({i},{k}) label term")
        ek_val = n * (big_k - 1) * guarded_exp(ek, f"pair ({i},{k})")
        dw_k = ek_val * x + mu * bk * state.W[k]
        dw_y = (ey_val - n) * x + mu * by * state.W[y]
        du = n - ey_val - ek_val
    else:
        raise ConfigError(f"unknown formulation {state.formulation!r}")
    return StochGrad(du=du, dw_k=dw_k, dw_y=dw_y, exponent=exponent, i=i, k=k)


def bounds(dataset: Dataset, mu: float, weights: ClassWeights = None) -> Bounds:
    """Projection-set radii; infinite (flagged) when mu = 0."""
    b_x = math.sqrt(float(dataset.xsq.max()))
    if mu <= 0.0:
        return Bounds(b_x=b_x, b_w=math.inf, b_u=math.inf, b_f=math.inf,
                      finite=False)
    n, k = dataset.n, dataset.k
    b_w = math.sqrt(2.0 / mu * n * math.log(k))
    t = 2.0 * b_x * b_w
    b_u = t + math.log(math.exp(-t) + (k - 1))
    if weights is None:
        from .data import class_weights
        weights = class_weights(dataset)
    eb = math.exp(b_u) if b_u <= EXP_GUARD else math.inf
    b_f = n * max(1.0, eb - 1.0) + 2.0 * (n * eb * b_x
                                          + mu * weights.max_beta * b_w)
    return Bounds(b_x=b_x, b_w=b_w, b_u=b_u, b_f=b_f, finite=True)


def u_cap_default(k: int) -> float:
    """Generous u ceiling for mu = 0 runs: log(1 + (K-1)e^40)."""
    return 40.0 + math.log(math.exp(-40.0) + (k - 1))


def to_raman(state: ModelState, dataset: Dataset) -> ModelState:
    """Shift each u_i by the label logit; weights unchanged."""
    if state.formulation != "ours":
        raise ConfigError("state is not in the ours-formulation")
    zy = np.array([dataset.features[i].dot(state.W[int(dataset.labels[i])])
                   for i in range(dataset.n)])
    return ModelState(state.W.copy(), state.u + zy, "raman")


def to_ours(state: ModelState, dataset: Dataset) -> ModelState:
    if state.formulation != "raman":
        raise ConfigError("state is not in the raman-formulation")
    zy = np.array([dataset.features[i].dot(state.W[int(dataset.labels[i])])
                   for i in range(dataset.n)])
    return ModelState(state.W.copy(), state.u - zy, "ours")
