"""Independent ground-truth generators for the numerical tests.

Everything here is deliberately implemented with different machinery than
the code it checks: golden-section search instead of Brent plus
Lambert-W, full-batch descent instead of SGD, central differences
instead of analytic gradients.  Agreement between the two routes is the
evidence the test suite runs on.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import ClassWeights, Dataset, SparseVector, class_weights
from .errors import ConfigError
from .objective import ModelState, f_ik_value, stoch_grad

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class OracleReport:
    max_rel_error: float
    instances_checked: int
    worst_case: dict
    seed: int = None


@dataclass
class PairInstance:
    """One (example, class) draw with everything a summand evaluation needs."""
    dataset: Dataset
    weights: ClassWeights
    state: ModelState
    mu: float
    i: int
    k: int


@dataclass
class ProxInstance1x1:
    """Reduced two-variable proximal problem after eliminating the rows.

    minimize  2*eta*n*(u + e^{-u} + (k-1) e^{b-u}) + (u - u_tilde)^2
              + gamma*(b - c)^2
    """
    eta: float
    n: int
    k: int
    gamma: float
    c: float
    u_tilde: float

    def objective(self, u: float, b: float) -> float:
        return (2.0 * self.eta * self.n
                * (u + math.exp(-u) + (self.k - 1) * math.exp(b - u))
                + (u - self.u_tilde) ** 2 + self.gamma * (b - self.c) ** 2)


def golden_min(f, lo: float, hi: float, xtol: float = 1e-9):
    """Golden-section minimum of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > xtol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def brute_force_prox_1x1(inst: ProxInstance1x1, xtol: float = 1e-9):
    """Nested golden-section: outer over u, inner over b.

    Valid because the objective is jointly convex, so each partial
    minimization is unimodal.  Returns (u, b, objective value).
    """
    def b_width(u: float) -> float:
        # at the inner optimum gamma*(c - b) equals the exponential term,
        # which is largest at b = c; that caps how far below c to search.
        expo = min(35.0, inst.c - u)
        return inst.eta * inst.n * (inst.k - 1) * math.exp(expo) / inst.gamma

    def inner(u: float):
        width = b_width(u) + 1.0
        return golden_min(lambda b: inst.objective(u, b),
                          inst.c - width, inst.c + 1.0, xtol)

    def reduced(u: float) -> float:
        return inner(u)[1]

    v0 = reduced(inst.u_tilde)
    # (u' - u_tilde)^2 <= objective at u_tilde minus the floor 2*eta*n.
    spread = math.sqrt(max(0.0, v0 - 2.0 * inst.eta * inst.n)) + 1.0
    u_best, _ = golden_min(reduced, inst.u_tilde - spread,
                           inst.u_tilde + spread, xtol)
    b_best, val = inner(u_best)
    return u_best, b_best, val


def central_diff(fun, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function, coordinatewise."""
    g = np.zeros_like(x)
    for j in range(len(x)):
        xp = x.copy(); xp[j] += h
        xm = x.copy(); xm[j] -= h
        g[j] = (fun(xp) - fun(xm)) / (2.0 * h)
    return g


def _pair_theta(inst: PairInstance) -> np.ndarray:
    y = int(inst.dataset.labels[inst.i])
    return np.concatenate(([inst.state.u[inst.i]],
                           inst.state.W[inst.k], inst.state.W[y]))


def _pair_fun(inst: PairInstance):
    y = int(inst.dataset.labels[inst.i])
    d = inst.dataset.d

    def fun(theta: np.ndarray) -> float:
        st = inst.state.copy()
        st.u[inst.i] = theta[0]
        st.W[inst.k] = theta[1:1 + d]
        st.W[y] = theta[1 + d:]
        return f_ik_value(inst.dataset, inst.weights, st, inst.mu,
                          inst.i, inst.k)
    return fun


def finite_diff_check(function_id: str, inst: PairInstance,
                      h: float = 1e-6) -> OracleReport:
    """Central-difference check of the sampled-summand gradient."""
    if inst.state.formulation != function_id:
        raise ConfigError(
            f"instance formulation {inst.state.formulation!r} != {function_id!r}")
    g = stoch_grad(inst.dataset, inst.weights, inst.state, inst.mu,
                   inst.i, inst.k)
    analytic = np.concatenate(([g.du], g.dw_k, g.dw_y))
    numeric = central_diff(_pair_fun(inst), _pair_theta(inst), h)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = np.abs(analytic - numeric) / denom
    worst = int(np.argmax(rel))
    return OracleReport(
        max_rel_error=float(rel[worst]),
        instances_checked=1,
        worst_case={"coord": worst, "analytic": float(analytic[worst]),
                    "numeric": float(numeric[worst]), "i": inst.i, "k": inst.k},
    )


def random_dataset(rng, n: int, k: int, d: int, name: str = "oracle") -> Dataset:
    """Dense unit-norm gaussian features, labels covering all classes."""
    labels = rng.integers(k, size=n)
    labels[:k] = rng.permutation(k)
    feats = []
    for _ in range(n):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        feats.append(SparseVector(np.arange(d, dtype=np.int64), v))
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    return Dataset(name=name, labels=labels.astype(np.int64), features=feats,
                   k=k, d=d, class_counts=counts, xsq=np.ones(n))


def random_pair_instance(rng, formulation: str = "ours", mu: float = 0.1,
                         n: int = 6, k: int = 5, d: int = 4,
                         w_scale: float = 0.8) -> PairInstance:
    """Random instance with exponents safely inside the overflow guard."""
    ds = random_dataset(rng, n, k, d)
    w = class_weights(ds)
    state = ModelState(W=w_scale * rng.standard_normal((k, d)),
                       u=rng.uniform(0.0, 3.0, size=n),
                       formulation=formulation)
    i = int(rng.integers(n))
    y = int(ds.labels[i])
    kk = int(rng.integers(k - 1))
    kk += kk >= y
    return PairInstance(ds, w, state, mu, i, kk)


def finite_diff_sweep(function_id: str, n_instances: int = 100,
                      seed: int = 0, h: float = 1e-6) -> OracleReport:
    rng = np.random.default_rng(np.random.PCG64(seed))
    worst = None
    for _ in range(n_instances):
        rep = finite_diff_check(
            function_id, random_pair_instance(rng, formulation=function_id), h)
        if worst is None or rep.max_rel_error > worst.max_rel_error:
            worst = rep
    return OracleReport(max_rel_error=worst.max_rel_error,
                        instances_checked=n_instances,
                        worst_case=worst.worst_case, seed=seed)


def full_gradient(dataset: Dataset, weights: ClassWeights, state: ModelState,
                  mu: float):
    """Exact gradient of the double-sum objective, computed directly.

    Returns (du, dW).  Written from the summation definition, not by
    averaging stoch_grad, so the unbiasedness test has two routes.
    """
    n, k = dataset.n, dataset.k
    X = dataset.to_csr().toarray()
    Z = X @ state.W.T
    rows = np.arange(n)
    y = dataset.labels
    zy = Z[rows, y]
    if state.formulation == "ours":
        E = np.exp(Z - zy[:, None] - state.u[:, None])
        E[rows, y] = 0.0
        du = 1.0 - np.exp(-state.u) - E.sum(axis=1)
        dW = E.T @ X
        np.add.at(dW, y, -E.sum(axis=1)[:, None] * X)
    elif state.formulation == "raman":
        E = np.exp(Z - state.u[:, None])
        ey = E[rows, y].copy()
        E[rows, y] = 0.0
        du = 1.0 - ey - E.sum(axis=1)
        dW = E.T @ X
        np.add.at(dW, y, (ey - 1.0)[:, None] * X)
    else:
        raise ConfigError(f"unknown formulation {state.formulation!r}")
    dW += mu * state.W
    return du, dW


def minimize_gd(value_and_grad, x0: np.ndarray, tol: float = 1e-10,
                max_iters: int = 100000):
    """Gradient descent with Barzilai-Borwein steps and Armijo backtracking."""
    x = x0.astype(np.float64).copy()
    f, g = value_and_grad(x)
    step = 1.0 / (1.0 + float(np.linalg.norm(g)))
    for it in range(max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return x, f, gnorm, it
        t = step
        gsq = gnorm * gnorm
        for _ in range(80):
            x_new = x - t * g
            f_new, g_new = value_and_grad(x_new)
            if f_new <= f - 1e-4 * t * gsq:
                break
            t *= 0.5
        s = x_new - x
        dg = g_new - g
        sty = float(s @ dg)
        step = float(s @ s) / sty if sty > 0.0 else t * 2.0
        x, f, g = x_new, f_new, g_new
    return x, f, float(np.linalg.norm(g)), max_iters


@dataclass
class ProxInstanceFull:
    """Full proximal problem for one example and a sampled class set.

    minimize over (u, w_y, w_c1..w_cm):
        2*eta*[ n*(u + e^{-u} + alpha * sum_j e^{x.(w_cj - w_y) - u})
                + (mu/2)*(beta_y |w_y|^2 + sum_j beta_j |w_cj|^2) ]
        + (u - u_tilde)^2 + |w_y - wy_tilde|^2 + sum_j |w_cj - wc_tilde_j|^2
    """
    eta: float
    n: int
    alpha: float
    mu: float
    beta_y: float
    beta_c: np.ndarray
    x: np.ndarray
    u_tilde: float
    wy_tilde: np.ndarray
    wc_tilde: np.ndarray    # (m, D)

    def theta0(self) -> np.ndarray:
        return np.concatenate(([self.u_tilde], self.wy_tilde,
                               self.wc_tilde.ravel()))

    def split(self, theta: np.ndarray):
        d = len(self.x)
        u = theta[0]
        wy = theta[1:1 + d]
        wc = theta[1 + d:].reshape(len(self.beta_c), d)
        return u, wy, wc

    def value_and_grad(self, theta: np.ndarray):
        u, wy, wc = self.split(theta)
        m, d = wc.shape
        zy = float(self.x @ wy)
        zc = wc @ self.x
        ex = np.exp(zc - zy - u)
        sum_ex = float(ex.sum())
        f_ik = self.n * (u + math.exp(-u) + self.alpha * sum_ex)
        ridge = 0.5 * self.mu * (self.beta_y * float(wy @ wy)
                                 + float(self.beta_c @ (wc * wc).sum(axis=1)))
        prox = ((u - self.u_tilde) ** 2
                + float(((wy - self.wy_tilde) ** 2).sum())
                + float(((wc - self.wc_tilde) ** 2).sum()))
        val = 2.0 * self.eta * (f_ik + ridge) + prox

        du = (2.0 * self.eta
              * self.n * (1.0 - math.exp(-u) - self.alpha * sum_ex)
              + 2.0 * (u - self.u_tilde))
        dwy = (2.0 * self.eta * (-self.n * self.alpha * sum_ex * self.x
                                 + self.mu * self.beta_y * wy)
               + 2.0 * (wy - self.wy_tilde))
        dwc = (2.0 * self.eta
               * (self.n * self.alpha * ex[:, None] * self.x[None, :]
                  + self.mu * self.beta_c[:, None] * wc)
               + 2.0 * (wc - self.wc_tilde))
        return val, np.concatenate(([du], dwy, dwc.ravel()))


def brute_force_prox_full(inst: ProxInstanceFull, tol: float = 1e-9):
    """Descent-based minimizer of the full proximal objective."""
    theta, val, gnorm, _ = minimize_gd(inst.value_and_grad, inst.theta0(),
                                       tol=tol)
    return theta, val, gnorm


MAX_EXACT_PROBLEM_SIZE = 10 ** 6


def exact_optimum(dataset: Dataset, mu: float, tol: float = 1e-10,
                  max_iters: int = 200000):
    """Reference optimum of the exact likelihood on a small dataset.

    Full-batch descent with line search, certified by the gradient norm.
    Returns (W_star, L(W_star)).
    """
    n, k, d = dataset.n, dataset.k, dataset.d
    if k < 2:
        raise ConfigError("exact_optimum needs at least 2 classes")
    if n * k * d > MAX_EXACT_PROBLEM_SIZE:
        raise ConfigError(f"problem size {n * k * d} exceeds the oracle cap")
    X = dataset.to_csr().toarray()
    y = dataset.labels
    rows = np.arange(n)

    def vag(w_flat: np.ndarray):
        W = w_flat.reshape(k, d)
        Z = X @ W.T
        zmax = Z.max(axis=1)
        E = np.exp(Z - zmax[:, None])
        denom = E.sum(axis=1)
        ll = float((Z[rows, y] - zmax - np.log(denom)).sum()) \
            - 0.5 * mu * float(w_flat @ w_flat)
        P = E / denom[:, None]
        P[rows, y] -= 1.0
        grad = P.T @ X + mu * W
        return -ll, grad.ravel()

    w_flat, neg_ll, gnorm, iters = minimize_gd(
        vag, np.zeros(k * d), tol=tol, max_iters=max_iters)
    return w_flat.reshape(k, d), -neg_ll
