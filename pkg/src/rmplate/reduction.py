"""Reduction operators and L2 projections.

The reduction ``R`` maps rotations into the tangentially continuous shear
space by evaluating the target element's degree-of-freedom functionals on
each cell.  Because edge functionals only see the tangential trace, the
element-local matrices assemble into a well defined global operator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .femlib.forms import cross_mass, mass_matrix, mean_vector
from .femlib.hrot import HrotDual, hrot_dual
from .femlib.quadrature import triangle_rule
from .femlib.spaces import DiscreteField, FESpace, call_field
from .linalg import Factorization


@dataclass(eq=False)
class ReductionOperator:
    """Element-local reduction from ``source`` into ``target``.

    ``kind`` is ``"rt"``, ``"bdm"`` or ``"identity"``; for the identity the
    target is the source itself.  ``local`` holds the (T, n_target, n_source)
    element matrices, ``matrix`` the assembled operator on full dof vectors.
    """

    kind: str
    source: FESpace
    target: FESpace
    local: np.ndarray = field(repr=False)
    matrix: sp.csr_matrix = field(repr=False)

    @property
    def constrained(self) -> sp.csr_matrix:
        """Operator between the constrained coordinates of both spaces."""
        return (self.target.Z.T @ self.matrix @ self.source.Z).tocsr()


def _source_at_dual_points(dual: HrotDual, src: FESpace, mode: str):
    """Source basis (mode "values") or gradients (mode "grad") at the functional points."""
    ev, iv = [], None
    for i in range(3):
        v, j = src.tabulate(dual.edge_ref[i])
        ev.append(v if mode == "values" else j[..., 0, :])
    v, j = src.tabulate(dual.int_rule.points)
    iv = v if mode == "values" else j[..., 0, :]
    T = src.mesh.n_triangles
    ev = np.stack([np.broadcast_to(e, (T,) + e.shape[1:]) for e in ev], axis=1)  # (T, 3, n, ns, 2)
    iv = np.broadcast_to(iv, (T,) + iv.shape[1:])
    return np.moveaxis(ev, 2, 3), np.moveaxis(iv, 1, 2)


def _assemble_owned(dual: HrotDual, src: FESpace, local: np.ndarray) -> sp.csr_matrix:
    tgt = dual.space
    own = dual.owner_mask()
    t_idx, i_idx = np.nonzero(own)
    rows = np.repeat(tgt.cell_dofs[t_idx, i_idx], src.nloc)
    cols = src.cell_dofs[t_idx].ravel()
    vals = local[t_idx, i_idx, :].ravel()
    M = sp.csr_matrix((vals, (rows, cols)), shape=(tgt.ndof, src.ndof))
    M.eliminate_zeros()
    return M


def make_reduction(source: FESpace, target: FESpace | None = None) -> ReductionOperator:
    """Build the interpolant of ``target`` (rt/bdm) restricted to ``source``.

    With ``target=None`` the identity reduction on ``source`` is returned.
    """
    if target is None:
        n = source.nloc
        loc = np.broadcast_to(np.eye(n), (source.mesh.n_triangles, n, n))
        return ReductionOperator("identity", source, source, loc, sp.identity(source.ndof, format="csr"))
    if not target.family.hrot:
        raise ValueError("reduction target must be an rt or bdm space")
    if source.mesh is not target.mesh:
        raise ValueError("source and target live on different meshes")
    if source.family.ncomp != 2:
        raise ValueError("reduction source must be vector valued")
    dual = hrot_dual(target)
    ev, iv = _source_at_dual_points(dual, source, "values")
    local = dual.local_coefficients(ev, iv)
    return ReductionOperator(target.family.kind, source, target, local, _assemble_owned(dual, source, local))


def gradient_operator(w_space: FESpace, target: FESpace):
    """Local matrices and global operator mapping w to the coefficients of grad w.

    Exact whenever grad W lies in the target space.
    """
    dual = hrot_dual(target)
    ev, iv = _source_at_dual_points(dual, w_space, "grad")
    local = dual.local_coefficients(ev, iv)
    return local, _assemble_owned(dual, w_space, local)


def reduce(r: ReductionOperator, psi) -> DiscreteField:
    """Apply the reduction to a discrete field of the source space or to ``psi(x, y)``."""
    if isinstance(psi, DiscreteField):
        if psi.space is not r.source:
            raise ValueError("field is not in the reduction's source space")
        return DiscreteField(r.target, r.matrix @ psi.coeffs)
    if r.kind == "identity":
        from .femlib.spaces import interpolate

        return interpolate(r.target, psi)
    return DiscreteField(r.target, hrot_dual(r.target).interpolate(psi))


def xi_R(v: DiscreteField, psi: DiscreteField, r: ReductionOperator) -> DiscreteField:
    """grad v - R psi as a field of the reduction target."""
    if r.kind == "identity":
        raise ValueError("xi_R needs an rt or bdm target; identity schemes evaluate grad v - psi pointwise")
    _, Gm = gradient_operator(v.space, r.target)
    return DiscreteField(r.target, Gm @ v.coeffs - r.matrix @ psi.coeffs)


# -- projections ---------------------------------------------------------------------
def _rhs(space: FESpace, q) -> np.ndarray:
    """int q phi_i for callable, scalar field, or ``("rot", vector field)``."""
    deg = 2 * space.ref.poly_degree + 8
    if callable(q):
        rule = triangle_rule(deg)
        X = space.geom.map(rule.points)
        gv = call_field(q, X).reshape(X.shape[:2] + (-1,))
        vals, _ = space.tabulate(rule.points)
        w = rule.weights[None, :] * np.abs(space.geom.detJ)[:, None]
        loc = np.einsum("tiqk,tqk,tq->ti", np.broadcast_to(vals, (len(w),) + vals.shape[1:]), gv, w)
        b = np.zeros(space.ndof)
        np.add.at(b, space.cell_dofs, loc)
        return b
    if isinstance(q, tuple) and q[0] == "rot":
        from .femlib.forms import rot_coupling

        return rot_coupling(space, q[1].space) @ q[1].coeffs
    if isinstance(q, DiscreteField):
        return cross_mass(space, q.space) @ q.coeffs
    raise TypeError(f"cannot project object of type {type(q).__name__}")


def project_Q(Q: FESpace, q) -> DiscreteField:
    """L2 projection onto Q (mean-zero subspace when ``Q.mean_zero``).

    ``q`` is a callable, a discrete field, or ``("rot", field)`` for the rot
    of a vector field.
    """
    return DiscreteField(Q, _project(Q, _rhs(Q, q)))


def project_U(U: FESpace, eta) -> DiscreteField:
    """L2 projection onto the constrained space U."""
    return DiscreteField(U, _project(U, _rhs(U, eta)))


def _project(S: FESpace, b: np.ndarray) -> np.ndarray:
    Z = S.Z
    M = (Z.T @ mass_matrix(S) @ Z).tocsc()
    rhs = Z.T @ b
    if S.mean_zero:
        m = Z.T @ mean_vector(S)
        K = sp.bmat([[M, sp.csc_matrix(m[:, None])], [sp.csc_matrix(m[None, :]), None]], format="csc")
        x = Factorization(K, "saddle").solve(np.append(rhs, 0.0), rtol=1e-12)[:-1]
    else:
        x = Factorization(M, "spd").solve(rhs, rtol=1e-12)
    return Z @ x


def measure_CR(r: ReductionOperator, trials: int = 50, seed: int = 0, exact: bool = False) -> float:
    """Largest observed ratio ||R psi|| / ||psi|| over random psi in V.

    With ``exact=True`` the maximum generalized eigenvalue of the two mass
    matrices is returned instead (the operator norm).
    """
    if r.kind == "identity":
        return 1.0
    V, U = r.source, r.target
    Rc = r.constrained
    MV = (V.Z.T @ mass_matrix(V) @ V.Z).tocsc()
    MU = (U.Z.T @ mass_matrix(U) @ U.Z).tocsc()
    if exact:
        A = (Rc.T @ MU @ Rc).tocsc()
        if A.shape[0] <= 400:
            import scipy.linalg as sla

            top = sla.eigh(A.toarray(), MV.toarray(), eigvals_only=True)[-1]
        else:
            import scipy.sparse.linalg as spla

            top = spla.eigsh(A, k=1, M=MV, which="LA", tol=1e-10)[0][0]
        return float(np.sqrt(max(top, 0.0)))
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        x = rng.standard_normal(V.nfree)
        y = Rc @ x
        best = max(best, float(np.sqrt((y @ (MU @ y)) / (x @ (MV @ x)))))
    return best
