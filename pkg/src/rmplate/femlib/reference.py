"""Reference-triangle shape functions.

Every element stores its basis as coefficients over monomials x^a y^b on the
reference triangle with vertices (0, 0), (1, 0), (0, 1).  Bases are obtained by
inverting the Vandermonde matrix of the element's dual functionals, once per
family and degree.

Local edges are numbered by their opposite vertex and directed from the lower
to the higher local vertex: e0 = (1, 2), e1 = (0, 2), e2 = (0, 1).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .quadrature import interval_rule, legendre01, triangle_rule

REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
LOCAL_EDGES = ((1, 2), (0, 2), (0, 1))
REF_CENTROID = np.array([1.0 / 3.0, 1.0 / 3.0])


def monomial_exponents(degree: int) -> list[tuple[int, int]]:
    return [(a, t - a) for t in range(degree + 1) for a in range(t, -1, -1)]


def eval_monomials(exps, pts):
    """Values and first derivatives of monomials at ``pts`` (n, 2)."""
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    nm = len(exps)
    maxd = max(a + b for a, b in exps) if exps else 0
    xp = [np.ones_like(x)]
    yp = [np.ones_like(y)]
    for _ in range(maxd):
        xp.append(xp[-1] * x)
        yp.append(yp[-1] * y)
    val = np.empty((nm,) + x.shape)
    dx = np.zeros((nm,) + x.shape)
    dy = np.zeros((nm,) + x.shape)
    for i, (a, b) in enumerate(exps):
        val[i] = xp[a] * yp[b]
        if a > 0:
            dx[i] = a * xp[a - 1] * yp[b]
        if b > 0:
            dy[i] = b * xp[a] * yp[b - 1]
    return val, dx, dy


class PolyBasis:
    """A set of (possibly vector valued) polynomials on the reference triangle."""

    def __init__(self, coef: np.ndarray, exps):
        self.coef = np.asarray(coef, dtype=float)  # (nfun, ncomp, nmono)
        self.exps = list(exps)

    @property
    def size(self) -> int:
        return self.coef.shape[0]

    @property
    def ncomp(self) -> int:
        return self.coef.shape[1]

    def tabulate(self, pts):
        """Return values (nfun, npts, ncomp) and gradients (nfun, npts, ncomp, 2)."""
        val, dx, dy = eval_monomials(self.exps, pts)
        v = np.einsum("fcm,mp->fpc", self.coef, val)
        g = np.stack(
            [np.einsum("fcm,mp->fpc", self.coef, dx), np.einsum("fcm,mp->fpc", self.coef, dy)],
            axis=-1,
        )
        return v, g

    def combine(self, mat: np.ndarray) -> "PolyBasis":
        """New basis whose k-th member is sum_i mat[i, k] * self[i]."""
        return PolyBasis(np.einsum("ik,icm->kcm", mat, self.coef), self.exps)


def _lattice(k: int):
    """Lagrange lattice of degree k in vertex / edge / interior order."""
    if k == 0:
        return REF_CENTROID[None, :].copy(), (0, 0, 1)
    pts = [REF_VERTICES[i] for i in range(3)]
    for a, b in LOCAL_EDGES:
        for j in range(1, k):
            pts.append(REF_VERTICES[a] + (j / k) * (REF_VERTICES[b] - REF_VERTICES[a]))
    for j in range(1, k):
        for i in range(1, k - j):
            pts.append(np.array([i / k, j / k]))
    n_int = (k - 1) * (k - 2) // 2
    return np.array(pts), (1, k - 1, n_int)


class ReferenceElement:
    """Common data: basis, entity dof layout and how it maps to physical cells.

    ``layout`` is (dofs per vertex, dofs per edge, interior dofs); local dofs
    are ordered vertices, edges (e0, e1, e2), interior.  ``edge_orientation``
    says how edge dofs react to a local edge running against the global edge:
    "permute" reverses them, "sign" flips the odd-moment signs.
    """

    family = ""
    mapping = "affine"
    edge_orientation = "permute"

    def __init__(self, degree: int, basis: PolyBasis, layout, poly_degree: int):
        self.degree = degree
        self.basis = basis
        self.layout = layout
        self.poly_degree = poly_degree

    @property
    def ndof(self) -> int:
        return self.basis.size

    @property
    def ncomp(self) -> int:
        return self.basis.ncomp

    def tabulate(self, pts):
        return self.basis.tabulate(pts)

    def entity_slices(self):
        nv, ne, ni = self.layout
        verts = [list(range(i * nv, (i + 1) * nv)) for i in range(3)]
        off = 3 * nv
        edges = [list(range(off + i * ne, off + (i + 1) * ne)) for i in range(3)]
        off += 3 * ne
        return verts, edges, list(range(off, off + ni))


class LagrangeRef(ReferenceElement):
    family = "lagrange"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("continuous Lagrange elements need degree >= 1")
        nodes, layout = _lattice(k)
        exps = monomial_exponents(k)
        val, _, _ = eval_monomials(exps, nodes)
        prime = PolyBasis(np.eye(len(exps))[:, None, :], exps)
        super().__init__(k, prime.combine(np.linalg.inv(val.T)), layout, k)
        self.nodes = nodes


class EnrichedLagrangeRef(ReferenceElement):
    """P_p plus the degree p+1 bubbles needed for edge traces in P_p.

    Extra dofs are point values at interior points chosen from the degree
    p+3 lattice by pivoted QR, so the element stays nodal.
    """

    family = "bubble"

    def __init__(self, p: int):
        if p < 2:
            raise ValueError("bubble-enriched element needs p >= 2")
        nodes, (nv, ne, ni) = _lattice(p)
        exps = monomial_exponents(p + 1)
        nm = len(exps)
        base = monomial_exponents(p)
        coef = [np.eye(nm)[exps.index(e)] for e in base]
        # b * x^a y^(p-2-a) with b = x y (1 - x - y)
        for a in range(p - 1):
            c = np.zeros(nm)
            q = (a, p - 2 - a)
            for (da, db), s in (((1, 1), 1.0), ((2, 1), -1.0), ((1, 2), -1.0)):
                c[exps.index((q[0] + da, q[1] + db))] += s
            coef.append(c)
        prime = PolyBasis(np.array(coef)[:, None, :], exps)
        cand, _ = _lattice(p + 3)
        cand = cand[3 + 3 * (p + 2):]
        extra = self._pick_points(prime, nodes, cand, p - 1)
        allnodes = np.vstack([nodes, extra])
        vals, _ = prime.tabulate(allnodes)
        super().__init__(p, prime.combine(np.linalg.inv(vals[:, :, 0].T)), (nv, ne, ni + p - 1), p + 1)
        self.nodes = allnodes

    @staticmethod
    def _pick_points(prime, nodes, cand, count):
        import scipy.linalg

        vn, _ = prime.tabulate(nodes)
        vc, _ = prime.tabulate(cand)
        vn, vc = vn[:, :, 0], vc[:, :, 0]
        # project candidate rows onto the complement of the nodal rows
        q, _ = np.linalg.qr(vn)
        resid = vc - q @ (q.T @ vc)
        _, _, piv = scipy.linalg.qr(resid, pivoting=True)
        return cand[np.sort(piv[:count])]


class DGRef(ReferenceElement):
    family = "dg"

    def __init__(self, k: int):
        if k < 0:
            raise ValueError("DG degree must be >= 0")
        nodes, _ = _lattice(k)
        exps = monomial_exponents(k)
        val, _, _ = eval_monomials(exps, nodes)
        prime = PolyBasis(np.eye(len(exps))[:, None, :], exps)
        super().__init__(k, prime.combine(np.linalg.inv(val.T)), (0, 0, len(exps)), k)
        self.nodes = nodes


def _rot_perp_exps(exps_h, exps):
    """Coefficients of x^perp * m = (-y m, x m) for homogeneous monomials m."""
    out = []
    for a, b in exps_h:
        c = np.zeros((2, len(exps)))
        c[0, exps.index((a, b + 1))] = -1.0
        c[1, exps.index((a + 1, b))] = 1.0
        out.append(c)
    return out


def _homogeneous(d):
    return [(a, d - a) for a in range(d, -1, -1)]


def interior_test_functions(kind: str, p: int, xi):
    """Interior moment test fields evaluated at local coordinates ``xi`` (..., 2).

    RT_p tests against P_{p-2}^2, BDM_p against P_{p-2}^2 + xi P_{p-2}
    (homogeneous part).  For the tangential (rotated) BDM element the radial
    complement is the one that is unisolvent; xi^perp P_{p-2} is not.
    Returns (ntest, ..., 2).
    """
    if p < 2:
        return np.zeros((0,) + xi.shape)
    exps = monomial_exponents(p - 2)
    val, _, _ = eval_monomials(exps, xi)
    zero = np.zeros_like(val[0])
    tests = [np.stack([m, zero], axis=-1) for m in val]
    tests += [np.stack([zero, m], axis=-1) for m in val]
    if kind == "bdm":
        hv, _, _ = eval_monomials(_homogeneous(p - 2), xi)
        x, y = xi[..., 0], xi[..., 1]
        tests += [np.stack([x * m, y * m], axis=-1) for m in hv]
    return np.array(tests)


class HrotRef(ReferenceElement):
    """Tangentially continuous (rotated RT / BDM) element, covariant Piola map."""

    mapping = "covariant"
    edge_orientation = "sign"

    def __init__(self, kind: str, p: int):
        self.degree = p
        self.family = kind
        if kind == "rt":
            if p < 1:
                raise ValueError("RT degree must be >= 1")
            pd = p
            exps = monomial_exponents(pd)
            low = monomial_exponents(p - 1)
            coef = []
            for comp in range(2):
                for e in low:
                    c = np.zeros((2, len(exps)))
                    c[comp, exps.index(e)] = 1.0
                    coef.append(c)
            coef += _rot_perp_exps(_homogeneous(p - 1), exps)
            n_edge = p
        elif kind == "bdm":
            if p < 1:
                raise ValueError("BDM degree must be >= 1")
            pd = p
            exps = monomial_exponents(pd)
            coef = []
            for comp in range(2):
                for e in exps:
                    c = np.zeros((2, len(exps)))
                    c[comp, exps.index(e)] = 1.0
                    coef.append(c)
            n_edge = p + 1
        else:
            raise ValueError(kind)
        self.n_edge_moments = n_edge
        prime = PolyBasis(np.array(coef), exps)
        self.edge_s, self.edge_w = interval_rule(2 * pd + 2)
        self.int_rule = triangle_rule(2 * pd)
        dual = self.reference_functionals(prime)
        n_int = prime.size - 3 * n_edge
        if dual.shape[0] != prime.size:
            raise RuntimeError("dual functional count mismatch")
        super().__init__(p, prime.combine(np.linalg.inv(dual)), (0, n_edge, n_int), pd)
        self.kind = kind

    def edge_points(self):
        """Reference points (3, ns, 2) for the edge moments and tangents (3, 2)."""
        pts = []
        tangents = []
        for a, b in LOCAL_EDGES:
            A, B = REF_VERTICES[a], REF_VERTICES[b]
            pts.append(A[None, :] + self.edge_s[:, None] * (B - A)[None, :])
            tangents.append(B - A)
        return np.array(pts), np.array(tangents)

    def edge_weights(self):
        """Quadrature weight times Legendre factor, shape (n_edge_moments, ns)."""
        return legendre01(self.n_edge_moments, self.edge_s) * self.edge_w[None, :]

    def reference_functionals(self, basis: PolyBasis):
        epts, tang = self.edge_points()
        lw = self.edge_weights()
        rows = []
        for i in range(3):
            v, _ = basis.tabulate(epts[i])  # (nf, ns, 2)
            tv = v @ tang[i]
            rows.append(lw @ tv.T)
        qp, qw = self.int_rule.points, self.int_rule.weights
        v, _ = basis.tabulate(qp)
        tests = interior_test_functions(self.family, self.degree, qp - REF_CENTROID)
        rows.append(np.einsum("tqc,fqc,q->tf", tests, v, qw))
        return np.vstack(rows)


@lru_cache(maxsize=None)
def reference_element(family: str, degree: int) -> ReferenceElement:
    if family == "lagrange":
        return LagrangeRef(degree)
    if family == "bubble":
        return EnrichedLagrangeRef(degree)
    if family == "dg":
        return DGRef(degree)
    if family in ("rt", "bdm"):
        return HrotRef(family, degree)
    raise ValueError(f"unknown element family {family!r}")
