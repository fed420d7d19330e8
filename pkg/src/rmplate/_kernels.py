"""Element-batch kernels with a numba path and a pure numpy fallback.

Set ``RMPLATE_NUMBA=0`` in the environment to force the numpy versions; by
default numba is used when it can be imported.  Both paths compute the same
quantities and are cross-checked in the test suite.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised indirectly
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False


def numba_enabled() -> bool:
    return _HAVE_NUMBA and os.environ.get("RMPLATE_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def gram_numpy(F: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Batched weighted Gram matrices.

    Parameters
    ----------
    F : (nc, n, nq, ncomp)
        Per-cell basis data at quadrature points.
    w : (nc, nq)
        Quadrature weights times Jacobian determinants.

    Returns
    -------
    (nc, n, n) with ``out[c, i, j] = sum_q w[c, q] F[c, i, q, :] . F[c, j, q, :]``.
    """
    nc, n, nq, k = F.shape
    Fw = (F * w[:, None, :, None]).reshape(nc, n, nq * k)
    return np.matmul(Fw, F.reshape(nc, n, nq * k).transpose(0, 2, 1))


def cross_gram_numpy(F: np.ndarray, G: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Like :func:`gram_numpy` with different row and column data."""
    nc, n, nq, k = F.shape
    m = G.shape[1]
    Fw = (F * w[:, None, :, None]).reshape(nc, n, nq * k)
    return np.matmul(Fw, G.reshape(nc, m, nq * k).transpose(0, 2, 1))


def contract_numpy(F: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Field values ``sum_i c[cell, i] F[cell, i, ...]`` for every cell."""
    nc, n = c.shape
    return np.matmul(c[:, None, :], F.reshape(nc, n, -1)).reshape((nc,) + F.shape[2:])


if _HAVE_NUMBA:

    @numba.njit(cache=True, fastmath=False)
    def _weighted(F, w, c):
        # rows of F[c] flattened over (q, component), scaled by the weights
        n, nq, k = F.shape[1], F.shape[2], F.shape[3]
        out = np.empty((n, nq * k))
        for i in range(n):
            for q in range(nq):
                for a in range(k):
                    out[i, q * k + a] = w[c, q] * F[c, i, q, a]
        return out

    @numba.njit(cache=True, fastmath=True)
    def _gram_nb(F, w):
        nc, n, nq, k = F.shape
        L = nq * k
        out = np.zeros((nc, n, n))
        for c in range(nc):
            Fw = _weighted(F, w, c)
            Fc = F[c].reshape(n, L)
            for i in range(n):
                for j in range(i, n):
                    s = 0.0
                    for l in range(L):
                        s += Fw[i, l] * Fc[j, l]
                    out[c, i, j] = s
                    out[c, j, i] = s
        return out

    @numba.njit(cache=True, fastmath=True)
    def _cross_gram_nb(F, G, w):
        nc, n, nq, k = F.shape
        m = G.shape[1]
        L = nq * k
        out = np.zeros((nc, n, m))
        for c in range(nc):
            Fw = _weighted(F, w, c)
            Gc = G[c].reshape(m, L)
            for i in range(n):
                for j in range(m):
                    s = 0.0
                    for l in range(L):
                        s += Fw[i, l] * Gc[j, l]
                    out[c, i, j] = s
        return out

    @numba.njit(cache=True, fastmath=False)
    def _contract_nb(F, c):
        nc, n, r = F.shape
        out = np.zeros((nc, r))
        for e in range(nc):
            for i in range(n):
                ci = c[e, i]
                if ci != 0.0:
                    for j in range(r):
                        out[e, j] += ci * F[e, i, j]
        return out


def gram_numba(F, w):
    return _gram_nb(np.ascontiguousarray(F, dtype=np.float64), np.ascontiguousarray(w, dtype=np.float64))


def cross_gram_numba(F, G, w):
    return _cross_gram_nb(
        np.ascontiguousarray(F, dtype=np.float64),
        np.ascontiguousarray(G, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
    )


def contract_numba(F, c):
    nc, n = c.shape
    Fr = np.ascontiguousarray(F, dtype=np.float64).reshape(nc, n, -1)
    return _contract_nb(Fr, np.ascontiguousarray(c, dtype=np.float64)).reshape((nc,) + F.shape[2:])


def gram(F, w):
    return gram_numba(F, w) if numba_enabled() else gram_numpy(F, w)


def cross_gram(F, G, w):
    return cross_gram_numba(F, G, w) if numba_enabled() else cross_gram_numpy(F, G, w)


def contract(F, c):
    return contract_numba(F, c) if numba_enabled() else contract_numpy(F, c)
