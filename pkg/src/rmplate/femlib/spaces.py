"""Global finite element spaces, boundary constraints and discrete fields."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .. import _kernels
from ..mesh import BoundaryTag, Mesh
from .geometry import Geometry, geometry
from .quadrature import triangle_rule
from .reference import ReferenceElement, reference_element

KINDS = ("lagrange", "lagrange_vector", "bubble_vector", "rt", "bdm", "dg")
_REF = {"lagrange": "lagrange", "lagrange_vector": "lagrange", "bubble_vector": "bubble", "rt": "rt", "bdm": "bdm", "dg": "dg"}
_MIN_DEGREE = {"lagrange": 1, "lagrange_vector": 1, "bubble_vector": 2, "rt": 1, "bdm": 1, "dg": 0}
MAX_DEGREE = 8


class DegreeError(ValueError):
    """Family degree outside the supported range."""


@dataclass(frozen=True)
class Family:
    """Element family and degree.

    ``kind`` is one of ``lagrange``, ``lagrange_vector``, ``bubble_vector``
    (continuous vector P_p with degree p+1 interior bubbles), ``rt``
    (rotated Raviart-Thomas), ``bdm`` (rotated Brezzi-Douglas-Marini) or
    ``dg`` (discontinuous scalar).
    """

    kind: str
    degree: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if not (_MIN_DEGREE[self.kind] <= self.degree <= MAX_DEGREE):
            raise DegreeError(f"{self.kind} degree {self.degree} outside [{_MIN_DEGREE[self.kind]}, {MAX_DEGREE}]")

    @property
    def vector(self) -> bool:
        return self.kind in ("lagrange_vector", "bubble_vector", "rt", "bdm")

    @property
    def hrot(self) -> bool:
        return self.kind in ("rt", "bdm")

    @property
    def ncomp(self) -> int:
        return 2 if self.vector else 1

    def __str__(self):
        return f"{self.kind}{self.degree}"

    @classmethod
    def lagrange(cls, p):
        return cls("lagrange", p)

    @classmethod
    def lagrange_vector(cls, p):
        return cls("lagrange_vector", p)

    @classmethod
    def bubble_vector(cls, p):
        return cls("bubble_vector", p)

    @classmethod
    def rt(cls, p):
        return cls("rt", p)

    @classmethod
    def bdm(cls, p):
        return cls("bdm", p)

    @classmethod
    def dg(cls, p):
        return cls("dg", p)


class FESpace:
    """A finite element space on a mesh with its dof maps and constraints.

    Coefficient vectors live on the full (unconstrained) dof set of size
    ``ndof``.  Boundary conditions are encoded by ``Z``, a sparse matrix with
    orthonormal columns whose range is the constrained subspace; reduced
    unknowns are ``c = Z.T @ u``.  A simply supported tangential condition
    on a vector Lagrange node keeps the single column along the edge normal.

    Parameters
    ----------
    mesh : Mesh
    family : Family
    bc : {"gamma", "none"}
        ``gamma`` applies the natural essential conditions of the space:
        zero on clamped and simply supported edges for scalar H1, zero on
        clamped and tangential zero on simply supported edges for vector H1,
        zero tangential trace on both for H(rot), and mean zero for DG when
        there is no free boundary.
    drop : sequence of int, optional
        Extra full dofs removed from the space (used to build defective
        spaces for negative controls).
    """

    def __init__(self, mesh: Mesh, family: Family, bc: str = "gamma", drop=()):
        if bc not in ("gamma", "none"):
            raise ValueError(f"unknown boundary selector {bc!r}")
        self.mesh = mesh
        self.family = family
        self.bc = bc
        self.ref: ReferenceElement = reference_element(_REF[family.kind], family.degree)
        self.geom: Geometry = geometry(mesh)
        self._build_dofmap()
        self._build_constraints(tuple(int(d) for d in drop))

    # -- dof maps --------------------------------------------------------------
    def _build_dofmap(self):
        m, ref = self.mesh, self.ref
        nv, ne, ni = ref.layout
        T = m.n_triangles
        if self.family.kind == "dg":
            self.nscalar = T * ni
            dofs = np.arange(T * ni).reshape(T, ni)
            signs = np.ones_like(dofs, dtype=float)
        else:
            vert_off = 0
            edge_off = nv * m.n_vertices
            cell_off = edge_off + ne * m.n_edges
            self.nscalar = cell_off + ni * T
            dofs = np.empty((T, ref.ndof), dtype=np.int64)
            signs = np.ones((T, ref.ndof))
            vs, es, cs = ref.entity_slices()
            for i in range(3):
                for k, loc in enumerate(vs[i]):
                    dofs[:, loc] = vert_off + nv * m.triangles[:, i] + k
            rev = m.tri_edge_reversed
            for i in range(3):
                base = edge_off + ne * m.tri_edges[:, i]
                for k, loc in enumerate(es[i]):
                    if ref.edge_orientation == "permute":
                        dofs[:, loc] = base + np.where(rev[:, i], ne - 1 - k, k)
                    else:
                        dofs[:, loc] = base + k
                        # moment k flips by (-1)^(k+1) when the edge is reversed
                        signs[:, loc] = np.where(rev[:, i], (-1.0) ** (k + 1), 1.0)
            for k, loc in enumerate(cs):
                dofs[:, loc] = cell_off + ni * np.arange(T) + k
        if self.family.kind in ("lagrange_vector", "bubble_vector"):
            dofs = np.hstack([dofs, dofs + self.nscalar])
            signs = np.hstack([signs, signs])
            self.ndof = 2 * self.nscalar
        else:
            self.ndof = self.nscalar
        self.cell_dofs = dofs
        self.cell_signs = signs
        self.nloc = dofs.shape[1]

    def _scalar_boundary_dofs(self):
        """Map each boundary-touching scalar dof to the boundary edges it lies on."""
        m, ref = self.mesh, self.ref
        nv, ne, _ = ref.layout
        edge_off = nv * m.n_vertices
        out = {}
        for e in m.boundary_edges:
            a, b = m.edges[e]
            for v in (a, b):
                for k in range(nv):
                    out.setdefault(nv * v + k, []).append(e)
            for k in range(ne):
                out.setdefault(edge_off + ne * e + k, []).append(e)
        return out

    def _build_constraints(self, drop):
        m, kind = self.mesh, self.family.kind
        tags = m.edge_tags
        cs = lambda e: tags[e] in (BoundaryTag.CLAMPED.value, BoundaryTag.SIMPLY_SUPPORTED.value)  # noqa: E731
        self.mean_zero = False
        rows, cols, vals = [], [], []
        fixed = np.zeros(self.ndof, dtype=bool)
        if self.bc == "none":
            pass
        elif kind == "lagrange":
            for d, edges in self._scalar_boundary_dofs().items():
                if any(cs(e) for e in edges):
                    fixed[d] = True
        elif kind in ("lagrange_vector", "bubble_vector"):
            ns = self.nscalar
            tangent_only = {}
            for d, edges in self._scalar_boundary_dofs().items():
                et = [tags[e] for e in edges]
                if BoundaryTag.CLAMPED.value in et:
                    fixed[d] = fixed[d + ns] = True
                    continue
                ss = [e for e in edges if tags[e] == BoundaryTag.SIMPLY_SUPPORTED.value]
                if not ss:
                    continue
                tv = [self._edge_tangent(e) for e in ss]
                if len(tv) > 1 and abs(tv[0][0] * tv[1][1] - tv[0][1] * tv[1][0]) > 1e-10:
                    fixed[d] = fixed[d + ns] = True
                    continue
                fixed[d] = fixed[d + ns] = True
                tangent_only[d] = np.array([-tv[0][1], tv[0][0]])
        elif kind in ("rt", "bdm"):
            ne = self.ref.layout[1]
            for e in m.boundary_edges:
                if cs(e):
                    fixed[ne * e:ne * (e + 1)] = True
        elif kind == "dg":
            self.mean_zero = not np.any(tags == BoundaryTag.FREE.value)
        if drop:
            fixed[list(drop)] = True
        free = np.nonzero(~fixed)[0]
        rows = list(free)
        cols = list(range(len(free)))
        vals = [1.0] * len(free)
        if kind in ("lagrange_vector", "bubble_vector") and self.bc == "gamma":
            col = len(free)
            for d in sorted(tangent_only):
                if d in drop or d + self.nscalar in drop:
                    continue
                n = tangent_only[d]
                rows += [d, d + self.nscalar]
                cols += [col, col]
                vals += [n[0], n[1]]
                col += 1
        ncol = (max(cols) + 1) if cols else 0
        self.Z = sp.csr_matrix((vals, (rows, cols)), shape=(self.ndof, ncol))
        self.fixed = fixed

    def _edge_tangent(self, e):
        a, b = self.mesh.edges[e]
        t = self.mesh.vertices[b] - self.mesh.vertices[a]
        return t / np.linalg.norm(t)

    @property
    def nfree(self) -> int:
        return self.Z.shape[1]

    @property
    def dim(self) -> int:
        """Dimension of the constrained space (mean-zero condition included)."""
        return self.nfree - (1 if self.mean_zero else 0)

    def constrain(self, u: np.ndarray) -> np.ndarray:
        """Orthogonal projection of full coefficients onto the constrained set."""
        return self.Z @ (self.Z.T @ u)

    # -- tabulation --------------------------------------------------------------
    def tabulate(self, pts, cells=slice(None)):
        """Physical basis values and Jacobians at reference points.

        Returns
        -------
        vals : (nc, nloc, nq, ncomp)
        jac : (nc, nloc, nq, ncomp, 2), derivative of each component
        """
        v, g = self.ref.tabulate(pts)  # (nr, nq, rc), (nr, nq, rc, 2)
        G = self.geom
        Jinv = G.Jinv[cells]
        nc = Jinv.shape[0]
        signs = self.cell_signs[cells]
        # reference gradients to physical: d/dx = Jinv^T d/dxhat
        gp = g[None] @ Jinv[:, None, None]
        kind = self.family.kind
        if kind in ("lagrange", "dg"):
            vals = np.broadcast_to(v[None], (nc,) + v.shape)
            return vals, gp
        if kind in ("lagrange_vector", "bubble_vector"):
            nr, nq = v.shape[:2]
            vals = np.zeros((nc, 2 * nr, nq, 2))
            jac = np.zeros((nc, 2 * nr, nq, 2, 2))
            vals[:, :nr, :, 0] = v[None, :, :, 0]
            vals[:, nr:, :, 1] = v[None, :, :, 0]
            jac[:, :nr, :, 0, :] = gp[:, :, :, 0, :]
            jac[:, nr:, :, 1, :] = gp[:, :, :, 0, :]
            return vals, jac
        # covariant Piola: u = Jinv^T uhat, Du = Jinv^T Dhat uhat Jinv
        JT = np.swapaxes(Jinv, 1, 2)[:, None, None]  # (nc, 1, 1, 2, 2)
        vals = (JT @ v[None, ..., None])[..., 0] * signs[:, :, None, None]
        jac = (JT @ g[None] @ Jinv[:, None, None]) * signs[:, :, None, None, None]
        return vals, jac

    def gather(self, u: np.ndarray, cells=slice(None)) -> np.ndarray:
        """Local coefficients (nc, nloc) of the full vector ``u``.

        Orientation signs live in the tabulated basis, so local and global
        coefficients coincide.
        """
        return u[self.cell_dofs[cells]]

    def __repr__(self):
        return f"FESpace({self.family}, ndof={self.ndof}, free={self.nfree})"


def build_space(m: Mesh, fam: Family, bc: str = "gamma", drop=()) -> FESpace:
    return FESpace(m, fam, bc, drop)


def cell_chunks(n_cells: int, per_cell: int, budget: int = 4_000_000):
    """Slices of cells so that ``chunk * per_cell`` stays near ``budget``."""
    step = max(1, budget // max(per_cell, 1))
    for s in range(0, n_cells, step):
        yield slice(s, min(n_cells, s + step))


# -- fields ------------------------------------------------------------------------
class DiscreteField:
    """Coefficient vector (full dof numbering) bound to a space."""

    def __init__(self, space: FESpace, coeffs=None):
        self.space = space
        if coeffs is None:
            coeffs = np.zeros(space.ndof)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got shape {coeffs.shape}")
        self.coeffs = coeffs

    @classmethod
    def from_free(cls, space: FESpace, c):
        return cls(space, space.Z @ np.asarray(c, dtype=float))

    @property
    def free(self) -> np.ndarray:
        return self.space.Z.T @ self.coeffs

    def evaluate(self, pts, cells=slice(None)):
        """Values (nc, nq, ncomp) and Jacobians (nc, nq, ncomp, 2) at reference points."""
        vals, jac = self.space.tabulate(pts, cells)
        c = self.space.gather(self.coeffs, cells)
        nc = c.shape[0]
        vals = np.broadcast_to(vals, (nc,) + vals.shape[1:])
        return _kernels.contract(vals, c), _kernels.contract(jac, c)

    def __add__(self, other):
        _same(self, other)
        return DiscreteField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        _same(self, other)
        return DiscreteField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, s):
        return DiscreteField(self.space, self.coeffs * float(s))

    __rmul__ = __mul__


def _same(a, b):
    if a.space is not b.space:
        raise ValueError("fields live in different spaces")


class FieldValue(NamedTuple):
    value: np.ndarray
    grad: np.ndarray  # gradient (scalar) or Jacobian (vector)
    rot: float | None


def eval_field(f: DiscreteField, elem: int, bary) -> FieldValue:
    """Evaluate ``f`` on element ``elem`` at barycentric coordinates ``bary``."""
    bary = np.asarray(bary, dtype=float)
    if bary.shape != (3,) or np.any(bary < -1e-12) or abs(bary.sum() - 1) > 1e-12:
        raise ValueError("barycentric coordinates must be 3 non-negative numbers summing to 1")
    v, j = f.evaluate(bary[None, 1:], slice(elem, elem + 1))
    v, j = v[0, 0], j[0, 0]
    if f.space.family.vector:
        return FieldValue(v, j, float(j[1, 0] - j[0, 1]))
    return FieldValue(float(v[0]), j[0], None)


# -- analytic data -----------------------------------------------------------------
def call_field(g: Callable, X: np.ndarray) -> np.ndarray:
    """Evaluate ``g(x, y)`` on points ``X`` (..., 2); vectors come back as (..., 2)."""
    out = g(X[..., 0], X[..., 1])
    if isinstance(out, (tuple, list)):
        parts = np.broadcast_arrays(*[np.asarray(o, dtype=float) for o in out], X[..., 0])[:-1]
        return np.stack(parts, axis=-1)
    return np.broadcast_to(np.asarray(out, dtype=float), X.shape[:-1] + np.shape(out)[X.ndim - 1:])


def integrate(m: Mesh, f: Callable, degree: int) -> float:
    """Integral of ``f(x, y)`` over the mesh with a rule exact to ``degree``."""
    rule = triangle_rule(degree)
    G = geometry(m)
    X = G.map(rule.points)
    vals = call_field(f, X)
    w = rule.weights[None, :] * np.abs(G.detJ)[:, None]
    if vals.ndim == 2:
        return float(np.sum(vals * w))
    return np.einsum("tq...,tq->...", vals, w)


def interpolate(s: FESpace, g: Callable) -> DiscreteField:
    """Nodal interpolant (Lagrange, DG) or canonical interpolant (H(rot))."""
    if s.family.hrot:
        from .hrot import hrot_dual

        return DiscreteField(s, hrot_dual(s).interpolate(g))
    nodes = s.ref.nodes
    X = s.geom.map(nodes)
    vals = call_field(g, X)
    u = np.zeros(s.ndof)
    if s.family.vector:
        if vals.shape[-1] != 2:
            raise ValueError("vector space needs a vector valued function")
        nr = s.ref.ndof
        u[s.cell_dofs[:, :nr]] = vals[..., 0]
        u[s.cell_dofs[:, nr:]] = vals[..., 1]
    else:
        u[s.cell_dofs] = vals
    return DiscreteField(s, u)
