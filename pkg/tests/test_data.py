import numpy as np
import pytest

from bigsoftmax.data import (Dataset, SparseVector, class_weights,
                             load_dataset, parse_sparse_file, preprocess,
                             summary, summary_json, write_libsvm)
from bigsoftmax.errors import (ConfigError, DataFormatError,
                               EmptyDatasetError)


def write(tmp_path, text, name="d.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def sv(pairs):
    idx = np.array([i for i, _ in pairs], dtype=np.int64)
    val = np.array([v for _, v in pairs])
    return SparseVector(idx, val)


def raw_to_dataset(pairs, **kw):
    return preprocess([(lab, sv(feats)) for lab, feats in pairs], "t", **kw)


def test_parse_basic(tmp_path):
    p = write(tmp_path, "3,7 1:0.5 4:0.5\n0 2:1.0\n")
    raw = parse_sparse_file(p)
    assert raw[0][0] == 3
    assert list(raw[0][1].indices) == [0, 3]
    assert list(raw[0][1].values) == [0.5, 0.5]
    assert raw[1][0] == 0
    assert list(raw[1][1].indices) == [1]


def test_parse_index_base_zero(tmp_path):
    p = write(tmp_path, "1 0:2.0 3:1.0\n")
    raw = parse_sparse_file(p, index_base=0)
    assert list(raw[0][1].indices) == [0, 3]
    with pytest.raises(ConfigError):
        parse_sparse_file(p, index_base=2)


def test_parse_count_header_skipped(tmp_path):
    p = write(tmp_path, "2 5 4\n0 1:1.0\n1 2:1.0\n")
    raw = parse_sparse_file(p)
    assert len(raw) == 2 and raw[0][0] == 0


def test_parse_crlf_and_blank_lines(tmp_path):
    p = tmp_path / "crlf.txt"
    p.write_bytes(b"1 1:1.0\r\n\r\n2 2:1.0\r\n")
    raw = parse_sparse_file(p)
    assert [lab for lab, _ in raw] == [1, 2]


@pytest.mark.parametrize("line,frag", [
    ("x 1:1.0", "label"),
    ("1 1:zz", "token"),
    ("1 1:1.0 1:2.0", "duplicate"),
    ("1 0:1.0", "below"),
    ("-4 1:1.0", "negative"),
    ("1 1:1.0:2", "token"),
])
def test_parse_errors_carry_line_numbers(tmp_path, line, frag):
    p = write(tmp_path, "5 1:1.0\n" + line + "\n")
    with pytest.raises(DataFormatError) as err:
        parse_sparse_file(p)
    assert err.value.line_number == 2
    assert frag in str(err.value)


def test_empty_feature_example_discarded(tmp_path):
    p = write(tmp_path, "5\n1 1:1.0\n2 2:1.0\n")
    ds = load_dataset(p)
    assert ds.n == 2 and 5 not in ds.label_map


def test_unit_normalization():
    ds = raw_to_dataset([(0, [(0, 3.0), (1, 4.0)]), (1, [(2, 1.0)])])
    x = ds.features[0]
    assert np.allclose(x.values, [0.6, 0.8])
    for f in ds.features:
        assert abs(f.sq_norm() - 1.0) <= 1e-9
    assert np.allclose(ds.xsq, 1.0)


def test_label_remap_dense_sorted():
    ds = raw_to_dataset([(42, [(0, 1.0)]), (9, [(1, 1.0)])])
    assert ds.k == 2
    assert ds.label_map == {9: 0, 42: 1}
    assert list(ds.labels) == [1, 0]


def test_feature_truncation_then_discard_then_cap():
    pairs = [(0, [(7, 1.0)]),            # dies when max_features=5
             (1, [(0, 1.0)]),
             (2, [(1, 1.0), (9, 3.0)]),  # survives with one feature left
             (3, [(2, 1.0)])]
    ds = raw_to_dataset(pairs, max_features=5, max_examples=2)
    # the dropped example does not count against max_examples
    assert ds.n == 2
    assert sorted(ds.label_map) == [1, 2]
    assert list(ds.features[1].indices) == [1]
    assert ds.features[1].values[0] == 1.0


def test_all_discarded_raises():
    with pytest.raises(EmptyDatasetError):
        raw_to_dataset([(0, [(8, 1.0)])], max_features=5)


def test_round_trip(tmp_path, repo_root):
    raw = parse_sparse_file(repo_root / "data" / "tiny_demo.libsvm")
    out = tmp_path / "rt.libsvm"
    write_libsvm(out, raw)
    again = parse_sparse_file(out)
    assert len(again) == len(raw)
    for (la, fa), (lb, fb) in zip(again, raw):
        assert la == lb
        assert list(fa.indices) == list(fb.indices)
        assert list(fa.values) == list(fb.values)


def test_class_weights_examples():
    ds = raw_to_dataset([(0, [(0, 1.0)]), (0, [(1, 1.0)]),
                         (1, [(2, 1.0)]), (2, [(3, 1.0)])])
    beta = class_weights(ds).beta
    assert abs(beta[0] - 4.0 / 3.0) <= 1e-15   # N=4, K=3, n=2
    full = raw_to_dataset([(0, [(0, 1.0)]), (0, [(1, 1.0)]),
                           (1, [(2, 1.0)]), (1, [(3, 1.0)]),
                           (2, [(4, 1.0)])])
    part = full.subset([0, 1, 2, 3])
    beta = class_weights(part).beta
    assert part.class_counts[2] == 0
    assert abs(beta[2] - 2.0) <= 1e-15         # N=4, K=3, n=0
    bal = raw_to_dataset([(j, [(j, 1.0)]) for j in range(3) for _ in range(2)])
    assert np.allclose(class_weights(bal).beta, 1.5)  # N=6, K=3, n=2


def test_class_weights_touch_probability_identity(rng):
    for _ in range(50):
        k = int(rng.integers(2, 12))
        counts = rng.integers(0, 9, size=k)
        counts[rng.integers(k)] += 1   # N >= 1
        labels = np.repeat(np.arange(k), counts)
        ds = Dataset(name="t", labels=labels,
                     features=[sv([(0, 1.0)]) for _ in labels],
                     k=k, d=1,
                     class_counts=counts.astype(np.int64),
                     xsq=np.ones(len(labels)))
        beta = class_weights(ds).beta
        n = ds.n
        p = (counts + (n - counts) / (k - 1)) / n
        assert abs(np.sum(p * beta) - k) <= 1e-9 * k
        assert (beta > 0).all()


def test_class_weights_needs_two_classes():
    ds = raw_to_dataset([(0, [(0, 1.0)]), (0, [(1, 1.0)])])
    with pytest.raises(ConfigError):
        class_weights(ds)


def test_summary_deterministic(repo_root, tiny_dataset):
    path = repo_root / "data" / "tiny_demo.libsvm"
    a = summary_json(load_dataset(path))
    b = summary_json(load_dataset(path))
    assert a == b
    s = summary(tiny_dataset)
    assert s["N"] == 24 and s["K"] == 4 and s["D"] == 9
    assert s["class_counts_histogram"] == {"6": 4}


def test_subset_shares_feature_storage(tiny_dataset):
    sub = tiny_dataset.subset([0, 5, 7])
    assert sub.n == 3 and sub.k == tiny_dataset.k
    assert sub.features[0] is tiny_dataset.features[0]
    assert sub.class_counts.sum() == 3


def test_to_csr_matches_dense(tiny_dataset):
    csr = tiny_dataset.to_csr()
    dense = np.vstack([f.to_dense(tiny_dataset.d)
                       for f in tiny_dataset.features])
    assert np.array_equal(csr.toarray(), dense)
