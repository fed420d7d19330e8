"""Quadrature on the reference triangle and the unit interval.

Triangle rules are collapsed (Duffy) tensor products of Gauss-Jacobi and
Gauss-Legendre rules.  They have strictly positive weights and exist for any
exactness degree, which matters for the oversampled error integrals.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 40


@dataclass(frozen=True)
class QuadratureRule:
    """Points and weights on the reference triangle {x, y >= 0, x + y <= 1}."""

    points: np.ndarray  # (n, 2)
    weights: np.ndarray  # (n,)
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)


def _jacobi_and_derivative(n: int, a: float, x):
    """P_n^(a,0) and its derivative by the three-term recurrence (b = 0)."""
    p0, d0 = np.ones_like(x), np.zeros_like(x)
    if n == 0:
        return p0, d0
    p1 = (a + 1) + (a + 2) * (x - 1) / 2
    d1 = np.full_like(x, (a + 2) / 2)
    for k in range(1, n):
        c = 2 * k + a
        A = 2 * (k + 1) * (k + a + 1) * c
        B = (c + 1) * (c + 2) * c
        C = (c + 1) * a * a
        D = 2 * (k + a) * k * (c + 2)
        p2 = ((B * x + C) * p1 - D * p0) / A
        d2 = ((B * x + C) * d1 + B * p1 - D * d0) / A
        p0, p1, d0, d1 = p1, p2, d1, d2
    return p1, d1


def _gauss_jacobi(n: int, a: float):
    """Gauss-Jacobi(a, 0) rule on [-1, 1], polished by Newton steps in extended precision."""
    x0, _ = roots_jacobi(n, a, 0.0) if a else roots_legendre(n)
    x = np.asarray(x0, dtype=np.longdouble)
    for _ in range(3):
        p, d = _jacobi_and_derivative(n, a, x)
        x = x - p / d
    _, d = _jacobi_and_derivative(n, a, x)
    w = 2 ** (a + 1) / ((1 - x * x) * d * d)
    return x, w


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """Return a rule exact for all polynomials of total degree <= ``degree``."""
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} outside [0, {MAX_DEGREE}]")
    n = max(1, (degree + 2) // 2)
    # u in [0, 1] carries the (1 - u) Jacobian of the collapse
    s, ws = _gauss_jacobi(n, 1.0)
    u = (1 + s) / 2
    wu = ws / 4
    r, wr = _gauss_jacobi(n, 0.0)
    v = (1 + r) / 2
    wv = wr / 2
    U, Vv = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv)
    x = U.ravel()
    y = ((1 - U) * Vv).ravel()
    pts = np.column_stack([x, y]).astype(float)
    pts.setflags(write=False)
    w = W.ravel().astype(float)
    w.setflags(write=False)
    return QuadratureRule(pts, w, degree)


@lru_cache(maxsize=None)
def interval_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [0, 1], exact to ``degree``."""
    n = max(1, (degree + 2) // 2)
    r, w = roots_legendre(n)
    s = (1.0 + r) / 2.0
    w = w / 2.0
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


def legendre01(m_max: int, s: np.ndarray) -> np.ndarray:
    """Shifted Legendre polynomials L_0..L_{m_max-1} on [0, 1] at ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.empty((m_max,) + s.shape)
    x = 2.0 * s - 1.0
    if m_max > 0:
        out[0] = 1.0
    if m_max > 1:
        out[1] = x
    for m in range(1, m_max - 1):
        out[m + 1] = ((2 * m + 1) * x * out[m] - m * out[m - 1]) / (m + 1)
    return out
