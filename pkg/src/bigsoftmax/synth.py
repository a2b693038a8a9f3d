"""Deterministic synthetic corpora.

Three generators: a dense gaussian-mixture set for desk-scale
convergence studies, a sparse tag-prediction-shaped set matching the
size of the Bibtex benchmark, and a handwritten micro corpus shipped
with the repository for demos and smoke tests.  All randomness flows
from an explicit seed, so the same call always produces the same bytes.
"""

import numpy as np

from .data import Dataset, SparseVector


def make_synthetic(n: int, k: int, d: int, seed: int = 0,
                   separation: float = 2.0, noise: float = 1.0,
                   groups: int = 0, within: float = 0.4, cone: float = 0.0,
                   hetero: float = 0.0, class_noise=None,
                   group_flip: float = 0.0, cross_flip: float = 0.0,
                   dominant_frac: float = 0.0, dominant_pull: float = 0.0,
                   name: str = None) -> Dataset:
    """Unit-norm gaussian class clouds around K random unit directions.

    separation scales the class direction, noise the isotropic part.
    groups > 0 arranges the class directions in that many tight bundles
    (spread `within` inside a bundle), so each example has several
    plausible classes at once instead of one pairwise rival; cone > 0
    additionally squeezes the bundle axes toward one shared direction.
    hetero
    spreads per-class noise scales over [e^-hetero, e^hetero], and
    class_noise applies an explicit per-class width profile on top,
    which lets one corpus mix tight confident clouds, diffuse sprays,
    and mildly overlapping twins.  group_flip relabels a fraction of
    examples inside their bundle,
    and cross_flip relabels into a different bundle, leaving the
    features where they were.  All three push the optimal class
    boundaries outside the linear span, so surrogate losses with
    different example weightings settle on visibly different weights;
    cross flips in particular plant examples deep inside a foreign
    bundle, where a one-vs-each loss pays every bundle member
    separately for the same mistake.  dominant_frac > 0 skews the label
    distribution toward class 0 and dominant_pull adds class 0's
    direction to every example, which makes label logits large across
    the board.  The first K labels are a permutation, so every class
    occurs.
    """
    rng = np.random.default_rng(np.random.PCG64(seed))
    if groups > 0:
        hubs = rng.normal(size=(groups, d))
        if cone > 0.0:
            # squeeze the hubs into a cone around one shared axis
            axis = rng.normal(size=d)
            axis /= np.linalg.norm(axis)
            hubs = axis + cone * hubs
        hubs /= np.linalg.norm(hubs, axis=1, keepdims=True)
        centers = hubs[np.arange(k) % groups] + within * rng.normal(size=(k, d))
    else:
        centers = rng.normal(size=(k, d))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)

    labels = np.empty(n, dtype=np.int64)
    labels[:k] = rng.permutation(k)
    rest = n - k
    if dominant_frac > 0.0:
        take = rng.random(rest) < dominant_frac
        tail = rng.integers(k, size=rest)
        tail[take] = 0
        labels[k:] = tail
    else:
        labels[k:] = rng.integers(k, size=rest)

    scale = np.ones(n)
    if hetero > 0.0:
        per_class = np.exp(rng.uniform(-hetero, hetero, size=k))
        scale = per_class[labels]
    if class_noise is not None:
        per_class = np.asarray(class_noise, dtype=float)
        if per_class.shape != (k,):
            raise ValueError(f"class_noise needs length {k}")
        scale = scale * per_class[labels]
    x = separation * centers[labels] \
        + (noise * scale)[:, None] * rng.normal(size=(n, d))
    if group_flip > 0.0 and groups > 0:
        # relabel within the bundle, sparing the leading permutation so
        # every class keeps at least one example
        for i in k + np.flatnonzero(rng.random(n - k) < group_flip):
            members = np.arange(int(labels[i]) % groups, k, groups)
            labels[i] = int(members[rng.integers(len(members))])
    if cross_flip > 0.0:
        # relabel outside the bundle while the features stay put, so the
        # example lands deep inside foreign territory
        for i in k + np.flatnonzero(rng.random(n - k) < cross_flip):
            old = int(labels[i])
            if groups > 0:
                others = np.flatnonzero(np.arange(k) % groups != old % groups)
            else:
                others = np.flatnonzero(np.arange(k) != old)
            labels[i] = int(others[rng.integers(len(others))])
    if dominant_pull > 0.0:
        x += dominant_pull * centers[0]
    x /= np.linalg.norm(x, axis=1, keepdims=True)

    idx = np.arange(d, dtype=np.int64)
    features = [SparseVector(idx, x[i].copy()) for i in range(n)]
    return Dataset(
        name=name or f"synth{n}x{k}",
        labels=labels,
        features=features,
        k=k, d=d,
        class_counts=np.bincount(labels, minlength=k).astype(np.int64),
        xsq=np.ones(n),
        label_map={j: j for j in range(k)},
    )


def make_bibtex_like(seed: int = 0):
    """Sparse multi-class examples shaped like the Bibtex benchmark.

    4880 examples, 147 classes, 1836 features, about 65 nonzeros per
    example.  Each class owns a disjoint block of signature features;
    background features are shared across all classes and a few percent
    of labels are resampled, so the task is informative but not
    perfectly separable.  Returns (label, [(fid, val), ...]) pairs with
    0-based feature ids, ready for write_libsvm.
    """
    n, k, d = 4880, 147, 1836
    sig_len = 8
    rng = np.random.default_rng(np.random.PCG64(seed))

    freq = (np.arange(k) + 4.0) ** -0.8
    freq /= freq.sum()
    labels = np.empty(n, dtype=np.int64)
    labels[:k] = rng.permutation(k)
    labels[k:] = rng.choice(k, size=n - k, p=freq)
    flip = rng.random(n - k) < 0.05
    labels[k:][flip] = rng.integers(k, size=int(flip.sum()))

    perm = rng.permutation(d)
    sigs = perm[:k * sig_len].reshape(k, sig_len)
    background = perm[k * sig_len:]

    examples = []
    for i in range(n):
        y = int(labels[i])
        nb = int(np.clip(rng.poisson(57), 30, len(background)))
        bg_ids = rng.choice(background, size=nb, replace=False)
        fids = np.concatenate((sigs[y], bg_ids))
        vals = np.concatenate((rng.uniform(0.9, 1.3, size=sig_len),
                               rng.uniform(0.05, 0.45, size=nb)))
        order = np.argsort(fids)
        examples.append((y, SparseVector(fids[order].astype(np.int64),
                                         vals[order])))
    return examples


def tiny_demo_examples():
    """24 handwritten examples, 4 classes, 9 features.

    Class j fires features 2j and 2j+1; feature 8 is a shared offset.
    Values vary mildly so no two examples are identical.
    """
    examples = []
    for rep in range(6):
        for j in range(4):
            bump = 0.05 * ((rep + j) % 3)
            feats = [(2 * j, 1.0 + bump), (2 * j + 1, 0.8 - bump),
                     (8, 0.5)]
            if rep % 2 == 1:
                # a dash of a neighboring class's first feature
                feats.append(((2 * (j + 1)) % 8, 0.3))
                feats.sort()
            ids = np.array([f[0] for f in feats], dtype=np.int64)
            vals = np.array([f[1] for f in feats])
            examples.append((j, SparseVector(ids, vals)))
    return examples
