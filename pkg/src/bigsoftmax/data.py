"""Sparse dataset loading and preprocessing.

Input format is libsvm-style text with optional multi-label fields:

    label[,label...] idx:val idx:val ...

The first label of each line is the training label.  A leading line of
three bare integers (a count header, as written by some multi-label
corpora) is skipped.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataFormatError, EmptyDatasetError

DEFAULT_MAX_FEATURES = 10000
DEFAULT_MAX_EXAMPLES = 100000


@dataclass(frozen=True)
class SparseVector:
    """Feature vector as parallel (indices, values) arrays, 0-based ids."""
    indices: np.ndarray
    values: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.indices)

    def sq_norm(self) -> float:
        return float(self.values @ self.values)

    def dot(self, row: np.ndarray) -> float:
        return float(row[self.indices] @ self.values)

    def to_dense(self, d: int) -> np.ndarray:
        out = np.zeros(d)
        out[self.indices] = self.values
        return out


@dataclass
class Dataset:
    """Preprocessed training set: unit-norm features, dense labels in [0, K)."""
    name: str
    labels: np.ndarray            # (N,) int64, remapped
    features: list                # list[SparseVector]
    k: int
    d: int
    class_counts: np.ndarray      # (K,) int64
    xsq: np.ndarray               # (N,) squared feature norms
    label_map: dict = field(default_factory=dict)   # original id -> dense id
    _csr: object = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.labels)

    def to_csr(self):
        """CSR matrix of the features, built once and cached."""
        if self._csr is None:
            from scipy import sparse
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            for i, sv in enumerate(self.features):
                indptr[i + 1] = indptr[i] + sv.nnz
            indices = np.concatenate([sv.indices for sv in self.features]) \
                if self.features else np.zeros(0, dtype=np.int64)
            vals = np.concatenate([sv.values for sv in self.features]) \
                if self.features else np.zeros(0)
            self._csr = sparse.csr_matrix((vals, indices, indptr),
                                          shape=(self.n, self.d))
        return self._csr

    def subset(self, indices, name: str = None) -> "Dataset":
        """View of selected examples; keeps K and D so models stay compatible.

        Class counts are recomputed and may contain zeros.
        """
        indices = np.asarray(indices, dtype=np.int64)
        labels = self.labels[indices]
        counts = np.bincount(labels, minlength=self.k).astype(np.int64)
        return Dataset(
            name=name or f"{self.name}[{len(indices)}]",
            labels=labels,
            features=[self.features[int(i)] for i in indices],
            k=self.k, d=self.d,
            class_counts=counts,
            xsq=self.xsq[indices],
            label_map=self.label_map,
        )


@dataclass(frozen=True)
class ClassWeights:
    """Inverse sampling probabilities making the sampled ridge term unbiased."""
    beta: np.ndarray
    max_beta: float


def _is_count_header(tokens) -> bool:
    if len(tokens) != 3:
        return False
    return all(t.isdigit() for t in tokens)


def parse_sparse_file(path, index_base: int = 1):
    """Parse a libsvm-style file into raw (label, SparseVector) pairs.

    Parameters
    ----------
    path : str or Path
        Text file, one example per line.
    index_base : int
        0 or 1; feature ids in the file are shifted down by this.

    Returns raw examples with original label ids and unnormalized values.
    Malformed lines raise DataFormatError with their line number.
    """
    if index_base not in (0, 1):
        raise ConfigError(f"index_base must be 0 or 1, got {index_base!r}")
    examples = []
    with open(path, "r", encoding="utf-8-sig") as fh:
        for lineno, line in enumerate(fh, start=1):
            tokens = line.split()
            if not tokens:
                continue
            if lineno == 1 and _is_count_header(tokens):
                continue
            label_field, feat_tokens = tokens[0], tokens[1:]
            try:
                label = int(label_field.split(",")[0])
            except ValueError:
                raise DataFormatError(
                    f"bad label field {label_field!r}", lineno) from None
            if label < 0:
                raise DataFormatError(f"negative label {label}", lineno)
            idx = np.empty(len(feat_tokens), dtype=np.int64)
            val = np.empty(len(feat_tokens))
            for j, tok in enumerate(feat_tokens):
                pieces = tok.split(":")
                if len(pieces) != 2:
                    raise DataFormatError(f"bad feature token {tok!r}", lineno)
                try:
                    fid = int(pieces[0]) - index_base
                    val[j] = float(pieces[1])
                except ValueError:
                    raise DataFormatError(
                        f"bad feature token {tok!r}", lineno) from None
                if fid < 0:
                    raise DataFormatError(
                        f"feature id {pieces[0]} below index base", lineno)
                idx[j] = fid
            if len(np.unique(idx)) != len(idx):
                raise DataFormatError("duplicate feature id", lineno)
            order = np.argsort(idx, kind="stable")
            examples.append((label, SparseVector(idx[order], val[order])))
    return examples


def preprocess(raw, name: str,
               max_features: int = DEFAULT_MAX_FEATURES,
               max_examples: int = DEFAULT_MAX_EXAMPLES) -> Dataset:
    """Build a Dataset from raw parsed examples.

    Pipeline order: drop feature ids >= max_features, discard examples
    left with no features, keep the first max_examples in file order,
    L2-normalize, then densely remap labels to [0, K) by sorted original id.
    """
    kept = []
    for label, sv in raw:
        mask = sv.indices < max_features
        if not mask.all():
            sv = SparseVector(sv.indices[mask], sv.values[mask])
        if sv.nnz == 0 or sv.sq_norm() == 0.0:
            continue
        kept.append((label, sv))
        if len(kept) == max_examples:
            break
    if not kept:
        raise EmptyDatasetError(f"{name}: no examples survived preprocessing")

    features = []
    for _, sv in kept:
        inv = 1.0 / math.sqrt(sv.sq_norm())
        features.append(SparseVector(sv.indices, sv.values * inv))

    orig_labels = np.array([lab for lab, _ in kept], dtype=np.int64)
    uniq = np.unique(orig_labels)
    label_map = {int(orig): new for new, orig in enumerate(uniq)}
    labels = np.array([label_map[int(lab)] for lab in orig_labels],
                      dtype=np.int64)
    k = len(uniq)
    d = int(max(sv.indices.max() for sv in features)) + 1
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    xsq = np.array([sv.sq_norm() for sv in features])
    return Dataset(name=name, labels=labels, features=features, k=k, d=d,
                   class_counts=counts, xsq=xsq, label_map=label_map)


def load_dataset(path, index_base: int = 1,
                 max_features: int = DEFAULT_MAX_FEATURES,
                 max_examples: int = DEFAULT_MAX_EXAMPLES,
                 name: str = None) -> Dataset:
    import os
    stem = os.path.splitext(os.path.basename(str(path)))[0]
    raw = parse_sparse_file(path, index_base=index_base)
    return preprocess(raw, name or stem,
                      max_features=max_features, max_examples=max_examples)


def write_libsvm(path, examples, index_base: int = 1) -> None:
    """Serialize (label, SparseVector) pairs; floats as shortest round-trip."""
    with open(path, "w", encoding="utf-8") as fh:
        for label, sv in examples:
            feats = " ".join(f"{int(i) + index_base}:{float(v)!r}"
                             for i, v in zip(sv.indices, sv.values))
            fh.write(f"{int(label)} {feats}\n")


def class_weights(dataset: Dataset) -> ClassWeights:
    """beta_j = N / (n_j + (N - n_j)/(K - 1)); inverse class-touch probability."""
    if dataset.k < 2:
        raise ConfigError("class weights need at least 2 classes")
    n = dataset.n
    counts = dataset.class_counts.astype(np.float64)
    beta = n / (counts + (n - counts) / (dataset.k - 1))
    return ClassWeights(beta=beta, max_beta=float(beta.max()))


def summary(dataset: Dataset) -> dict:
    """Single JSON-able summary object for the ingest CLI."""
    counts = np.bincount(dataset.class_counts.astype(np.int64))
    histogram = {str(size): int(num) for size, num in enumerate(counts)
                 if num > 0}
    return {
        "name": dataset.name,
        "N": dataset.n,
        "K": dataset.k,
        "D": dataset.d,
        "class_counts_histogram": histogram,
    }


def summary_json(dataset: Dataset) -> str:
    return json.dumps(summary(dataset), sort_keys=True, indent=2)
