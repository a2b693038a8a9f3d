import math

import pytest

from bigsoftmax.errors import SolverError
from bigsoftmax.rootfind import brent, expand_to_bracket


def test_cubic_root():
    root, iters = brent(lambda x: x ** 3 - 2.0, 0.0, 2.0)
    assert abs(root - 2.0 ** (1.0 / 3.0)) <= 1e-9
    assert 0 < iters < 60


def test_transcendental_root():
    root, _ = brent(math.sin, 3.0, 4.0, xtol=1e-12)
    assert abs(root - math.pi) <= 1e-10


def test_endpoint_root_short_circuits():
    root, iters = brent(lambda x: x, 0.0, 5.0)
    assert root == 0.0 and iters == 0
    root, iters = brent(lambda x: x - 5.0, 0.0, 5.0)
    assert root == 5.0 and iters == 0


def test_no_sign_change_raises():
    with pytest.raises(SolverError):
        brent(lambda x: x * x + 1.0, -1.0, 1.0)


def test_iteration_count_tracks_bisection_depth():
    # pure bisection needs log2(width/xtol) halvings; Brent should not
    # be dramatically worse on a nasty flat-then-steep function
    f = lambda x: math.tanh(50.0 * (x - 0.7))
    root, iters = brent(f, 0.0, 1.0, xtol=1e-10)
    assert abs(root - 0.7) <= 1e-8
    assert iters <= math.ceil(math.log2(1.0 / 1e-10)) + 10


def test_max_iters_exhaustion():
    # one iteration cannot shrink [0,1] to the tolerance band
    with pytest.raises(SolverError):
        brent(lambda x: math.cos(x) - x, 0.0, 1.0, max_iters=1)


def test_expand_up_and_down():
    f = lambda x: x - 10.0
    lo, hi, flo, fhi = expand_to_bracket(f, 0.0, increasing=True)
    assert lo <= 10.0 <= hi and flo < 0.0 < fhi
    lo, hi, flo, fhi = expand_to_bracket(f, 100.0, increasing=True)
    assert lo <= 10.0 <= hi and flo < 0.0 < fhi


def test_expand_exact_zero():
    lo, hi, flo, fhi = expand_to_bracket(lambda x: x, 0.0, increasing=True)
    assert lo == hi == 0.0 and flo == fhi == 0.0


def test_expand_gives_valid_brent_bracket():
    f = lambda x: math.exp(x) - 123.0
    lo, hi, _, _ = expand_to_bracket(f, 0.0, increasing=True, step=0.5)
    root, _ = brent(f, lo, hi)
    assert abs(root - math.log(123.0)) <= 1e-9


def test_expand_exhaustion():
    with pytest.raises(SolverError):
        expand_to_bracket(lambda x: -1.0, 0.0, increasing=True,
                          max_doublings=5)
