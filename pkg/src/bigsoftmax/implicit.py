"""Exact solution of the implicit (proximal) SGD update.

One step of implicit SGD solves

    minimize_theta  2*eta*f_sample(theta) + |theta - theta_old|^2

over the coordinates the sample touches: u_i, the sampled class rows,
and the label row.  For a single sampled class the row part collapses in
closed form through the principal Lambert-W branch, leaving a scalar
strictly-increasing equation in u_i that a bracketed Brent solve
finishes.  For several sampled classes the same elimination leaves a 1-D
strongly convex problem in the shifted variable v = u_i + x.w_y, solved
by a safeguarded Newton iteration.

Every Lambert-W argument is handled in log space, so steps stay finite
even when the sampled margin exceeds the exp() range: the step size
grows only linearly in the margin where explicit SGD would overflow.
"""

import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .data import ClassWeights, Dataset
from .errors import ConfigError, SolverError, UnsupportedExtensionError
from .lambertw import w0_exp_value
from .rootfind import brent, expand_to_bracket

# Counts D-dimensional inner products when enabled by tests; the 1x1
# update is specified to need exactly two.
_ip_counter = None


@contextmanager
def count_inner_products():
    global _ip_counter
    _ip_counter = counter = [0]
    try:
        yield counter
    finally:
        _ip_counter = None


def _dot(row: np.ndarray, idx: np.ndarray, vals: np.ndarray) -> float:
    if _ip_counter is not None:
        _ip_counter[0] += 1
    return float(row[idx] @ vals)


def _logaddexp0(t: float) -> float:
    # log(1 + e^t), stable both directions
    if t > 0.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@dataclass
class ImplicitContext:
    """Scalar quantities the 1x1 solve runs on."""
    i: int
    k: int
    eta: float
    gamma: float
    c: float                # x.(w_k*shrink_k - w_y*shrink_y), the decayed gap
    shrink_k: float         # 1/(1 + eta*mu*beta_k)
    shrink_y: float
    u_old: float


@dataclass
class ImplicitUpdateResult:
    u_new: float
    a: float                # Lambert-W step magnitude, >= 0
    w_k_new: np.ndarray
    w_y_new: np.ndarray
    iterations: int         # Brent function evaluations
    context: ImplicitContext
    bracket: tuple


def implicit_update_1x1(dataset: Dataset, weights: ClassWeights,
                        state, mu: float, eta: float, i: int, k: int,
                        xtol: float = 1e-10) -> ImplicitUpdateResult:
    """Solve the proximal step exactly for one sampled class.

    Parameters
    ----------
    eta : float
        Learning rate for this iteration, already divided by N.
    i, k : int
        Example id and sampled class, k != label(i).

    The root of the reduced derivative

        g(u) = 2*eta*N*(1 - e^{-u}) + 2*(u - u_old) - 2*gamma*a(u),
        a(u) = W0( eta*N*(K-1)/gamma * e^{c - u} )

    is bracketed by bounds derived from g's monotone pieces, then
    polished by Brent.  Exactly two D-dimensional inner products are
    computed (the two row logits); everything else is scalar work.
    """
    if eta <= 0.0:
        raise ConfigError(f"eta must be positive, got {eta!r}")
    y = int(dataset.labels[i])
    if k == y:
        raise ConfigError("sampled class equals the label")
    n, big_k = dataset.n, dataset.k
    sv = dataset.features[i]
    idx, vals = sv.indices, sv.values
    xsq = float(dataset.xsq[i])

    shrink_k = 1.0 / (1.0 + eta * mu * float(weights.beta[k]))
    shrink_y = 1.0 / (1.0 + eta * mu * float(weights.beta[y]))
    c = _dot(state.W[k], idx, vals) * shrink_k \
        - _dot(state.W[y], idx, vals) * shrink_y
    gamma = 1.0 / (xsq * (shrink_k + shrink_y))
    u_old = float(state.u[i])
    en = eta * n
    log_pref = math.log(en * (big_k - 1) / gamma)

    def a_of(u: float) -> float:
        return w0_exp_value(log_pref + c - u)

    def g(u: float) -> float:
        return (2.0 * en * (1.0 - math.exp(-u)) + 2.0 * (u - u_old)
                - 2.0 * gamma * a_of(u))

    g0 = g(u_old)
    if g0 == 0.0:
        root, iters = u_old, 0
        lo = hi = u_old
    else:
        # Bracket endpoints from the closed-form bounds on the root; the
        # Lambert argument is only ever formed in log space.
        if g0 < 0.0:
            lo = u_old
            arg = math.log(en) + en - u_old \
                + _logaddexp0(math.log(big_k - 1.0) + c)
            hi = u_old + w0_exp_value(arg) - en
            hi = max(hi, lo)
        else:
            hi = u_old
            arg = math.log(en) + en - u_old \
                + _logaddexp0(math.log(big_k - 1.0) + c - en / gamma)
            lo = u_old + w0_exp_value(arg) - en
            lo = min(lo, hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise SolverError(
                f"non-finite bracket ({lo!r}, {hi!r}) for eta*N={en!r}, "
                f"c={c!r}, u={u_old!r}")
        g_lo = g0 if lo == u_old else g(lo)
        g_hi = g0 if hi == u_old else g(hi)
        if g_lo == 0.0:
            root, iters = lo, 0
        elif g_hi == 0.0:
            root, iters = hi, 0
        elif (g_lo > 0.0) == (g_hi > 0.0):
            # fp slop put the root marginally outside; widen along g's
            # known monotone direction
            lo, hi, _, _ = expand_to_bracket(
                g, lo if g_lo > 0.0 else hi, increasing=True,
                step=max(1e-8, xtol))
            root, iters = brent(g, lo, hi, xtol=xtol)
        else:
            root, iters = brent(g, lo, hi, xtol=xtol)

    a = a_of(root)
    coef = gamma * a
    w_k_new = shrink_k * state.W[k]
    w_k_new[idx] -= (coef * shrink_k) * vals
    w_y_new = shrink_y * state.W[y]
    w_y_new[idx] += (coef * shrink_y) * vals
    ctx = ImplicitContext(i=i, k=k, eta=eta, gamma=gamma, c=c,
                          shrink_k=shrink_k, shrink_y=shrink_y, u_old=u_old)
    return ImplicitUpdateResult(u_new=root, a=a, w_k_new=w_k_new,
                                w_y_new=w_y_new, iterations=iters,
                                context=ctx, bracket=(lo, hi))


def brent_budget(ctx: ImplicitContext, dataset: Dataset,
                 xtol: float = 1e-10) -> float:
    """Upper bound on the evaluations needed to localize the 1x1 root.

    The search interval is no wider than |c - u_old| + 2*eta*N*|x|^2
    + log(2K), and brent halves it at worst, so the count is the log of
    that width over xtol plus endpoint evaluations.
    """
    en = ctx.eta * dataset.n
    xsq = float(dataset.xsq[ctx.i])
    width = abs(ctx.c - ctx.u_old) + 2.0 * en * xsq + math.log(2.0 * dataset.k)
    return math.log2(1.0 / xtol) + math.log2(width) + 2.0


@dataclass
class ImplicitMultiResult:
    u_new: float
    v: float
    a_y: float
    a_classes: np.ndarray
    w_y_new: np.ndarray
    w_class_new: np.ndarray   # (m, D)
    newton_iters: int


def implicit_update_1xm(dataset: Dataset, state, mu: float, eta: float,
                        i: int, classes, newton_tol: float = 1e-12,
                        max_newton_iters: int = 80) -> ImplicitMultiResult:
    """Proximal step with m distinct sampled classes (without replacement).

    Works in the shifted variable v = u_i + x.w_y.  Eliminating each
    sampled row gives a_k(v) through Lambert-W; eliminating the label row
    gives a_y(v) through a second Lambert-W expression sigma(v).  The
    remaining scalar derivative

        phi'(v) = 2*eta*N - 2*S*p(v) + 2*(v - b_y(v) - u_old)
                  - 2 * sum_k a_k(v) * (1 + eta*mu*beta_k)/|x|^2

    is strictly increasing; Newton with a maintained sign-change bracket
    finds its root, falling back to bisection when a step leaves the
    bracket.  The sampled-class weighting uses the without-replacement
    inclusion probability m/(K-1) and its matching ridge weights.
    """
    classes = np.asarray(classes, dtype=np.int64)
    m = len(classes)
    if m == 0:
        raise ConfigError("need at least one sampled class")
    if len(np.unique(classes)) != m:
        raise ConfigError("sampled classes must be distinct")
    y = int(dataset.labels[i])
    if y in classes:
        raise ConfigError("label row cannot be a sampled class")
    if eta <= 0.0:
        raise ConfigError(f"eta must be positive, got {eta!r}")

    n, big_k = dataset.n, dataset.k
    sv = dataset.features[i]
    idx, vals = sv.indices, sv.values
    xsq = float(dataset.xsq[i])
    counts = dataset.class_counts.astype(np.float64)
    # inclusion probability of each non-label class is m/(K-1)
    alpha = (big_k - 1.0) / m
    incl = m / (big_k - 1.0)
    beta_all = n / (counts + incl * (n - counts))
    beta_y = float(beta_all[y])
    beta_c = beta_all[classes]

    shrink_y = 1.0 / (1.0 + eta * mu * beta_y)
    shrink_c = 1.0 / (1.0 + eta * mu * beta_c)
    dot_y = _dot(state.W[y], idx, vals)
    dot_c = np.array([_dot(state.W[int(kk)], idx, vals) for kk in classes])
    c_y = dot_y * shrink_y
    c_c = dot_c * shrink_c

    en = eta * n
    u_old = float(state.u[i])
    s_y = (1.0 + eta * mu * beta_y) / xsq
    big_s = 1.0 + s_y
    log_sig_pref = math.log(en / big_s)
    log_ak_pref = np.log(en * alpha * xsq * shrink_c)
    s_c = (1.0 + eta * mu * beta_c) / xsq

    def pieces(v: float):
        p = w0_exp_value(log_sig_pref + (en - u_old + s_y * (c_y - v)) / big_s)
        a_k = np.array([w0_exp_value(log_ak_pref[j] + c_c[j] - v)
                        for j in range(m)])
        a_y = (en + v - u_old - c_y) / big_s - p
        return p, a_k, a_y

    def dphi(v: float):
        p, a_k, a_y = pieces(v)
        by = c_y + a_y
        val = (2.0 * en - 2.0 * big_s * p + 2.0 * (v - by - u_old)
               - 2.0 * float((a_k * s_c).sum()))
        curv = (2.0 * (s_y / big_s) * (1.0 + s_y * p / (1.0 + p))
                + 2.0 * float((s_c * a_k / (1.0 + a_k)).sum()))
        return val, curv, (p, a_k, a_y)

    v0 = u_old + c_y
    val0, _, _ = dphi(v0)
    if val0 == 0.0:
        v_lo = v_hi = v0
    else:
        v_lo, v_hi, _, _ = expand_to_bracket(
            lambda v: dphi(v)[0], v0, increasing=True,
            step=max(1.0, 0.1 * abs(v0)))

    v = 0.5 * (v_lo + v_hi)
    iters = 0
    last = None
    while v_hi - v_lo > newton_tol * max(1.0, abs(v_hi)):
        val, curv, last = dphi(v)
        iters += 1
        if val == 0.0:
            v_lo = v_hi = v
            break
        if val > 0.0:
            v_hi = v
        else:
            v_lo = v
        v_next = v - val / curv
        if not (v_lo < v_next < v_hi):
            v_next = 0.5 * (v_lo + v_hi)
        if iters >= max_newton_iters:
            # bisection fallback to the same width target
            while v_hi - v_lo > newton_tol * max(1.0, abs(v_hi)):
                mid = 0.5 * (v_lo + v_hi)
                if dphi(mid)[0] > 0.0:
                    v_hi = mid
                else:
                    v_lo = mid
                iters += 1
                if iters > 10 * max_newton_iters:
                    raise SolverError("1xm solve failed to localize the root")
            v_next = 0.5 * (v_lo + v_hi)
            v = v_next
            break
        v = v_next
    _, _, (p, a_k, a_y) = dphi(v)

    w_y_new = shrink_y * state.W[y]
    w_y_new[idx] += (a_y / xsq) * vals
    w_class_new = shrink_c[:, None] * state.W[classes]
    w_class_new[:, idx] -= (a_k / xsq)[:, None] * vals[None, :]
    u_new = v - (c_y + a_y)
    return ImplicitMultiResult(u_new=u_new, v=v, a_y=a_y, a_classes=a_k,
                               w_y_new=w_y_new, w_class_new=w_class_new,
                               newton_iters=iters)


def implicit_update_multi(dataset, state, mu, eta, datapoints, classes):
    """Extension point for multi-datapoint proximal steps; not implemented."""
    raise UnsupportedExtensionError(
        "proximal updates over more than one datapoint per iteration are "
        "not implemented; sample a single example per step")
