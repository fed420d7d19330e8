import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rmplate import _kernels

needs_numba = pytest.mark.skipif(not _kernels._HAVE_NUMBA, reason="numba not installed")


def _data(seed, nc=5, n=4, m=3, nq=6, k=2):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((nc, n, nq, k)), rng.standard_normal((nc, m, nq, k)), rng.random((nc, nq))


def test_gram_numpy_reference():
    F, _, w = _data(0)
    ref = np.einsum("ciqa,cjqa,cq->cij", F, F, w)
    np.testing.assert_allclose(_kernels.gram_numpy(F, w), ref, atol=1e-12)


@needs_numba
@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), nc=st.integers(1, 6), n=st.integers(1, 7), nq=st.integers(1, 9), k=st.integers(1, 4))
def test_numba_matches_numpy(seed, nc, n, nq, k):
    F, G, w = _data(seed, nc, n, n + 1, nq, k)
    np.testing.assert_allclose(_kernels.gram_numba(F, w), _kernels.gram_numpy(F, w), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_kernels.cross_gram_numba(F, G, w), _kernels.cross_gram_numpy(F, G, w), rtol=1e-12, atol=1e-12)
    c = np.random.default_rng(seed).standard_normal((nc, n))
    np.testing.assert_allclose(_kernels.contract_numba(F, c), _kernels.contract_numpy(F, c), rtol=1e-12, atol=1e-12)


def test_gram_symmetric():
    F, _, w = _data(4)
    g = _kernels.gram(F, w)
    np.testing.assert_allclose(g, np.swapaxes(g, 1, 2), atol=1e-14)


@pytest.mark.parametrize("value, expected", [("0", False), ("off", False), ("1", True)])
def test_environment_switch(monkeypatch, value, expected):
    monkeypatch.setenv("RMPLATE_NUMBA", value)
    assert _kernels.numba_enabled() is (expected and _kernels._HAVE_NUMBA)


def test_assembly_identical_under_both_paths(monkeypatch, two_hole):
    from rmplate.femlib.forms import mass_matrix
    from rmplate.femlib.spaces import Family, build_space

    S = build_space(two_hole, Family.rt(2))
    monkeypatch.setenv("RMPLATE_NUMBA", "0")
    a = mass_matrix(S).toarray()
    monkeypatch.setenv("RMPLATE_NUMBA", "1")
    b = mass_matrix(S).toarray()
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
