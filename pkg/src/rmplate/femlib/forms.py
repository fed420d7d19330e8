"""Sparse assembly of the basic bilinear and linear forms."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from .quadrature import triangle_rule
from .spaces import FESpace, call_field, cell_chunks


def scatter(rows: FESpace, cols: FESpace | None, local: np.ndarray, cells=slice(None)) -> sp.csr_matrix:
    """Assemble element matrices ``local`` (nc, nr, ncol) into a sparse matrix."""
    cols = rows if cols is None else cols
    rd = rows.cell_dofs[cells]
    cd = cols.cell_dofs[cells]
    nc, nr = rd.shape
    ncol = cd.shape[1]
    I = np.broadcast_to(rd[:, :, None], (nc, nr, ncol)).ravel()
    J = np.broadcast_to(cd[:, None, :], (nc, nr, ncol)).ravel()
    return sp.csr_matrix((local.ravel(), (I, J)), shape=(rows.ndof, cols.ndof))


def _weights(space, rule, cells):
    return rule.weights[None, :] * np.abs(space.geom.detJ[cells])[:, None]


def default_degree(*spaces) -> int:
    return sum(s.ref.poly_degree for s in spaces)


def assemble_pair(rows: FESpace, cols: FESpace | None, data, degree: int) -> sp.csr_matrix:
    """Assemble sum_K int f(rows_i) . g(cols_j).

    ``data(space, vals, jac)`` maps tabulated basis data (nc, nloc, nq, ...)
    to the integrand factor (nc, nloc, nq, k).
    """
    rule = triangle_rule(degree)
    symmetric = cols is None
    cols_ = rows if symmetric else cols
    T = rows.mesh.n_triangles
    per = (rows.nloc + cols_.nloc) * rule.size * 8
    out = None
    for cells in cell_chunks(T, per):
        w = _weights(rows, rule, cells)
        F = data(rows, *rows.tabulate(rule.points, cells))
        F = np.ascontiguousarray(np.broadcast_to(F, (w.shape[0],) + F.shape[1:]))
        if symmetric:
            loc = _kernels.gram(F, w)
        else:
            G = data(cols_, *cols_.tabulate(rule.points, cells))
            G = np.ascontiguousarray(np.broadcast_to(G, (w.shape[0],) + G.shape[1:]))
            loc = _kernels.cross_gram(F, G, w)
        A = scatter(rows, cols_, loc, cells)
        out = A if out is None else out + A
    return out.tocsr()


def values(space, vals, jac):
    return vals


def rot(space, vals, jac):
    if space.family.ncomp != 2:
        raise ValueError("rot needs a vector space")
    return (jac[..., 1, 0] - jac[..., 0, 1])[..., None]


def gradient(space, vals, jac):
    """Flattened Jacobian (gradient for scalars)."""
    return jac.reshape(jac.shape[:3] + (-1,))


def mass_matrix(space: FESpace, degree: int | None = None):
    return assemble_pair(space, None, values, degree if degree is not None else 2 * space.ref.poly_degree)


def stiffness_matrix(space: FESpace, degree: int | None = None):
    """Gradient Gram (full Jacobian Gram for vector spaces)."""
    return assemble_pair(space, None, gradient, degree if degree is not None else 2 * space.ref.poly_degree)


def h1_gram(space: FESpace):
    return mass_matrix(space) + stiffness_matrix(space)


def cross_mass(a: FESpace, b: FESpace, degree: int | None = None):
    """Matrix of int u_i . v_j for u_i in ``a``, v_j in ``b``."""
    return assemble_pair(a, b, values, degree if degree is not None else default_degree(a, b))


def rot_coupling(q_space: FESpace, u_space: FESpace):
    """Matrix of int rot(u_j) q_i (rows Q, columns U)."""
    deg = q_space.ref.poly_degree + u_space.ref.poly_degree
    return assemble_pair(q_space, u_space, lambda s, v, j: values(s, v, j) if s is q_space else rot(s, v, j), deg)


def load_vector(space: FESpace, g, degree: int, kind: str = "values") -> np.ndarray:
    """Vector of int g . phi_i (``kind="values"``) or int g : D phi_i (``"gradient"``).

    ``g(x, y)`` must return data shaped like the tested quantity.
    """
    rule = triangle_rule(degree)
    b = np.zeros(space.ndof)
    per = space.nloc * rule.size * 8
    for cells in cell_chunks(space.mesh.n_triangles, per):
        X = space.geom.map(rule.points, cells)
        gv = call_field(g, X)
        vals, jac = space.tabulate(rule.points, cells)
        F = values(space, vals, jac) if kind == "values" else gradient(space, vals, jac)
        w = _weights(space, rule, cells)
        gv = gv.reshape(gv.shape[:2] + (-1,))
        nc, n = F.shape[:2]
        F = np.broadcast_to(F, (nc,) + F.shape[1:]).reshape(nc, n, -1)
        loc = np.matmul(F, (gv * w[..., None]).reshape(nc, -1, 1))[..., 0]
        np.add.at(b, space.cell_dofs[cells], loc)
    return b


def mean_vector(space: FESpace) -> np.ndarray:
    """Integrals of the scalar basis functions."""
    return load_vector(space, lambda x, y: np.ones_like(x), space.ref.poly_degree)
