"""Degree-of-freedom functionals of the tangentially continuous elements.

Edge functionals are tangential moments against shifted Legendre
polynomials in the global edge parameter, using the unscaled edge vector as
tangent (so the moments are invariant under the covariant Piola map).
Interior functionals are moments against the element's interior test fields
in the scaled local coordinates ``(x - centroid) / diameter``.
"""
from __future__ import annotations

import numpy as np

from .quadrature import legendre01, triangle_rule
from .reference import LOCAL_EDGES, REF_VERTICES, interior_test_functions
from .spaces import FESpace, call_field


class HrotDual:
    """Per-element functional data and the inverse local dual matrices."""

    def __init__(self, space: FESpace):
        if not space.family.hrot:
            raise ValueError("H(rot) functionals need an rt or bdm space")
        self.space = space
        ref = space.ref
        G = space.geom
        m = space.mesh
        self.ne = ref.n_edge_moments
        self.s, w = ref.edge_s, ref.edge_w
        # edge points in local direction; reversed edges read the Legendre
        # factor at 1 - s and use the opposite tangent
        self.edge_ref = np.array(
            [REF_VERTICES[a][None, :] + self.s[:, None] * (REF_VERTICES[b] - REF_VERTICES[a])[None, :] for a, b in LOCAL_EDGES]
        )  # (3, ns, 2)
        fwd = legendre01(self.ne, self.s) * w[None, :]
        bwd = legendre01(self.ne, 1.0 - self.s) * w[None, :]
        rev = m.tri_edge_reversed  # (T, 3)
        self.edge_weights = np.where(rev[:, :, None, None], bwd[None, None], fwd[None, None])  # (T, 3, ne, ns)
        t_ref = np.array([REF_VERTICES[b] - REF_VERTICES[a] for a, b in LOCAL_EDGES])
        t_loc = np.einsum("tij,ej->tei", G.J, t_ref)
        self.tangent = np.where(rev[:, :, None], -t_loc, t_loc)  # (T, 3, 2)
        self.int_rule = triangle_rule(2 * ref.poly_degree + 2)
        self._int_w = self.int_rule.weights[None, :] * np.abs(G.detJ)[:, None]
        X = G.map(self.int_rule.points)
        xi = (X - G.centroid[:, None, :]) / G.diam[:, None, None]
        self.tests = interior_test_functions(space.family.kind, space.family.degree, xi)  # (ntest, T, nq, 2)
        self.edge_X = np.stack([G.map(self.edge_ref[i]) for i in range(3)], axis=1)  # (T, 3, ns, 2)
        self.int_X = X
        # local dual matrices of the (signed) physical basis
        bv_e = np.stack([space.tabulate(self.edge_ref[i])[0] for i in range(3)], axis=1)  # (T, 3, nloc, ns, 2)
        bv_i = space.tabulate(self.int_rule.points)[0]  # (T, nloc, nq, 2)
        L = self.apply(np.moveaxis(bv_e, 2, 3), np.moveaxis(bv_i, 1, 2))  # (T, nfun, nloc)
        self.L = L
        self.Linv = np.linalg.inv(L)

    def apply(self, edge_vals, int_vals, cells=slice(None)):
        """Functional values of source fields.

        Parameters
        ----------
        edge_vals : (nc, 3, ns, nsrc, 2) source values at the edge points
        int_vals : (nc, nq, nsrc, 2) source values at interior points

        Returns
        -------
        (nc, nloc, nsrc)
        """
        tv = np.einsum("tesnc,tec->tesn", edge_vals, self.tangent[cells])
        edge = np.einsum("temS,teSn->temn", self.edge_weights[cells], tv)
        nc = edge.shape[0]
        edge = edge.reshape(nc, 3 * self.ne, -1)
        inner = np.einsum("ktqc,tqnc,tq->tkn", self.tests[:, cells], int_vals, self._int_w[cells])
        return np.concatenate([edge, inner], axis=1)

    def local_coefficients(self, edge_vals, int_vals, cells=slice(None)):
        """Local coefficients (nc, nloc, nsrc) of the interpolants of sources."""
        return np.matmul(self.Linv[cells], self.apply(edge_vals, int_vals, cells))

    def interpolate(self, g) -> np.ndarray:
        """Full coefficient vector of the canonical interpolant of ``g(x, y)``."""
        ev = call_field(g, self.edge_X)[..., None, :]
        iv = call_field(g, self.int_X)[..., None, :]
        loc = self.local_coefficients(ev, iv)[..., 0]
        return self.scatter_owned(loc)

    def scatter_owned(self, loc: np.ndarray) -> np.ndarray:
        """Write local coefficients (T, nloc) to a global vector; shared edge
        values are identical from both sides, the first writer wins."""
        s = self.space
        u = np.zeros(s.ndof)
        flat_d = s.cell_dofs[::-1].ravel()
        flat_v = loc[::-1].ravel()
        u[flat_d] = flat_v  # later writes win; reversed order makes cell 0 win
        return u

    def owner_mask(self) -> np.ndarray:
        """(T, nloc) True for the (cell, local dof) pair that owns each global dof."""
        s = self.space
        flat = s.cell_dofs.ravel()
        _, first = np.unique(flat, return_index=True)
        mask = np.zeros(flat.shape, dtype=bool)
        mask[first] = True
        return mask.reshape(s.cell_dofs.shape)


def hrot_dual(space: FESpace) -> HrotDual:
    cached = space.__dict__.get("_dual")
    if cached is None:
        cached = HrotDual(space)
        space.__dict__["_dual"] = cached
    return cached
