"""Numerical checks of the structural conditions behind the reduced schemes.

All rank decisions go through :func:`rank_decision`, which uses a relative
singular value threshold and refuses to decide when the spectral gap is thin.
Dense linear algebra is used throughout; intended meshes have at most a few
thousand dofs per space.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .femlib.forms import h1_gram, mass_matrix, mean_vector, rot_coupling
from .femlib.hrot import hrot_dual
from .femlib.quadrature import interval_rule
from .femlib.spaces import DiscreteField, Family, FESpace, build_space, call_field
from .linalg import Factorization
from .mesh import BoundaryTopology, Mesh, boundary_topology
from .reduction import ReductionOperator, gradient_operator, make_reduction

RANK_RTOL = 1e-8
MIN_GAP = 1e3


class RankAmbiguityError(RuntimeError):
    """Singular values too close to the rank threshold to decide."""


@dataclass(frozen=True)
class RankDecision:
    rank: int
    nullity: int
    gap: float  # smallest kept / largest dropped singular value
    sigma: np.ndarray = field(repr=False)


def rank_decision(A: np.ndarray, rtol: float = RANK_RTOL, min_gap: float = MIN_GAP, want_null: bool = False):
    """Rank of a dense matrix with gap reporting.

    Returns the decision and, if ``want_null``, an orthonormal nullspace basis.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if n == 0:
        return RankDecision(0, 0, math.inf, np.zeros(0)), np.zeros((0, 0))
    if m == 0:
        return RankDecision(0, n, math.inf, np.zeros(0)), np.eye(n)
    if want_null:
        _, s, Vt = np.linalg.svd(A, full_matrices=True)
    else:
        s = np.linalg.svd(A, compute_uv=False)
    smax = s[0] if len(s) else 0.0
    r = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    kept = s[r - 1] if r > 0 else math.inf
    dropped = s[r] if r < len(s) else 0.0
    gap = math.inf if dropped == 0.0 else kept / dropped
    if gap < min_gap:
        tail = s[max(0, r - 3):r + 3]
        raise RankAmbiguityError(f"rank decision ambiguous: gap {gap:.3g} < {min_gap:g}; singular values near cut {tail}")
    dec = RankDecision(r, n - r, gap, s)
    if want_null:
        return dec, Vt[r:].T.copy()
    return dec, None


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def _orthonormal_coords(M: np.ndarray):
    """Cholesky factor L of an SPD matrix (M = L L^T)."""
    return np.linalg.cholesky(M)


# -- harmonic forms -------------------------------------------------------------------
@dataclass(eq=False)
class HarmonicBasis:
    """L2-orthonormal basis of the discrete harmonic fields of ``space``.

    ``coeffs`` has shape (ndof, dim) in the full numbering; ``free`` holds the
    same vectors in constrained coordinates.
    """

    space: FESpace
    coeffs: np.ndarray
    free: np.ndarray
    gap: float
    rot_norm: float = 0.0
    grad_coupling: float = 0.0

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def field(self, i: int) -> DiscreteField:
        return DiscreteField(self.space, self.coeffs[:, i])


def _gradient_free(W: FESpace, U: FESpace) -> np.ndarray:
    """Matrix (U.nfree, W.nfree) of grad W_Gamma in U coordinates."""
    _, G = gradient_operator(W, U)
    return _dense(U.Z.T @ G @ W.Z)


def _q_full(U: FESpace) -> FESpace:
    p = U.family.degree - 1
    return build_space(U.mesh, Family.dg(p), "none")


def _rot_free_coords(U: FESpace):
    """Rot matrix of U_Gamma in orthonormal coordinates on both sides.

    Returns (B, LU) where fields are u = LU^{-T} y.
    """
    Q = _q_full(U)
    MQ = _dense(mass_matrix(Q))
    LQ = _orthonormal_coords(MQ)
    MU = _dense(U.Z.T @ mass_matrix(U) @ U.Z)
    LU = _orthonormal_coords(MU)
    B = _dense(rot_coupling(Q, U) @ U.Z)
    B = sla.solve_triangular(LQ, B, lower=True)
    B = sla.solve_triangular(LU, B.T, lower=True).T
    return B, LU, MU


def harmonic_basis(W: FESpace, U: FESpace) -> HarmonicBasis:
    """Rot-free fields of ``U`` orthogonal to ``grad W``, L2-orthonormal.

    Works in L2-orthonormal coordinates of ``U``: the gradients are split off
    by a complete QR factorization and the nullspace of the rot matrix is
    taken on their orthogonal complement, which is the nullspace of the
    stacked system [rot; gradient coupling].
    """
    B, LU, MU = _rot_free_coords(U)
    Gf = _gradient_free(W, U)
    Yg = LU.T @ Gf  # gradients in orthonormal coordinates
    n = Yg.shape[0]
    if Yg.shape[1]:
        dec_g, _ = rank_decision(Yg)
        if dec_g.rank == Yg.shape[1]:
            Qc, _ = np.linalg.qr(Yg, mode="complete")
        else:
            Qc = np.linalg.svd(Yg, full_matrices=True)[0]
        Y = Qc[:, dec_g.rank:]
    else:
        Y = np.eye(n)
    dec, N = rank_decision(B @ Y, want_null=True)
    Yh = Y @ N
    free = sla.solve_triangular(LU.T, Yh, lower=False)
    coeffs = U.Z @ free
    rot_norm = float(np.abs(B @ Yh).max()) if Yh.size else 0.0
    gc = float(np.abs(Gf.T @ MU @ free).max()) if Yh.size and Gf.size else 0.0
    return HarmonicBasis(U, np.asarray(coeffs), free, dec.gap, rot_norm, gc)


def check_dim_formula(m: Mesh, basis: HarmonicBasis) -> dict:
    topo = boundary_topology(m)
    formula = topo.harmonic_dimension
    return dict(passed=basis.dim == formula, computed=basis.dim, formula=formula, gap=basis.gap)


# -- circulation --------------------------------------------------------------------------
def _edge_lookup(m: Mesh):
    d = m.__dict__.get("_edge_lookup")
    if d is None:
        d = {(int(a), int(b)): i for i, (a, b) in enumerate(m.edges.tolist())}
        m.__dict__["_edge_lookup"] = d
    return d


def circulation(f, loop: int, mesh: Mesh | None = None, degree: int = 12) -> float:
    """Counterclockwise line integral of the tangential component around a loop.

    ``f`` is a vector :class:`DiscreteField` or a callable ``f(x, y)``; for a
    callable ``mesh`` must be given.
    """
    if isinstance(f, DiscreteField):
        mesh = f.space.mesh
        degree = max(degree, f.space.ref.poly_degree + 1)
    if mesh is None:
        raise ValueError("mesh required for analytic fields")
    topo = boundary_topology(mesh)
    cyc = topo.loops[loop]
    s, w = interval_rule(degree)
    lookup = _edge_lookup(mesh)
    total = 0.0
    for k in range(len(cyc)):
        a, b = cyc[k], cyc[(k + 1) % len(cyc)]
        A, Bv = mesh.vertices[a], mesh.vertices[b]
        X = A[None, :] + s[:, None] * (Bv - A)[None, :]
        if isinstance(f, DiscreteField):
            e = lookup[(min(a, b), max(a, b))]
            t = int(mesh.edge_tris[e, 0])
            ref = f.space.geom.pull(X[None], slice(t, t + 1))[0]
            # points lie on the boundary of the cell; evaluate there
            vals, _ = f.evaluate(ref, slice(t, t + 1))
            vals = vals[0]
        else:
            vals = call_field(f, X)
        total += float(np.sum(w * (vals @ (Bv - A))))
    return total


def circulation_functionals(U: FESpace, loops) -> np.ndarray:
    """Rows mapping full U coefficients to loop circulations (exact, via edge moments)."""
    m = U.mesh
    topo = boundary_topology(m)
    ne = U.ref.layout[1]
    lookup = _edge_lookup(m)
    out = np.zeros((len(loops), U.ndof))
    for r, li in enumerate(loops):
        cyc = topo.loops[li]
        for k in range(len(cyc)):
            a, b = cyc[k], cyc[(k + 1) % len(cyc)]
            e = lookup[(min(a, b), max(a, b))]
            out[r, ne * e] = 1.0 if a < b else -1.0
    return out


# -- H1 ---------------------------------------------------------------------------------------
def tied_w_basis(W: FESpace, topo: BoundaryTopology) -> sp.csr_matrix:
    """Columns spanning W intersected with the space of functions constant on
    each clamped/supported component and zero on the first one."""
    m = W.mesh
    nv, ne, _ = W.ref.layout
    edge_off = nv * m.n_vertices
    comp_dofs = []
    on_cs = np.zeros(W.ndof, dtype=bool)
    for comp in topo.cs_components:
        d = set()
        for e in comp.edges:
            a, b = m.edges[e]
            d.update([nv * a, nv * b])
            d.update(edge_off + ne * e + k for k in range(ne))
        d = sorted(d)
        on_cs[d] = True
        comp_dofs.append(d)
    free = np.nonzero(~on_cs)[0]
    rows, cols, vals = list(free), list(range(len(free))), [1.0] * len(free)
    c = len(free)
    for d in comp_dofs[1:]:
        rows += d
        cols += [c] * len(d)
        vals += [1.0] * len(d)
        c += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(W.ndof, c))


@dataclass
class H1Result:
    passed: bool
    inclusion_residual: float
    gradient_distance: float
    n_zero_circulation: int
    n_tied_gradients: int
    circulation_rank: int

    def __bool__(self):
        return self.passed


def check_H1(W: FESpace, U: FESpace, topo: BoundaryTopology | None = None, tol: float = 1e-8) -> H1Result:
    """Rot-free fields with zero reduced circulations must be gradients of tied W.

    Also checks the inclusion of those gradients in ``U``, so a space with a
    missing dof fails.
    """
    topo = topo or boundary_topology(W.mesh)
    MUfull = mass_matrix(U)
    _, G = gradient_operator(W, U)
    Zt = tied_w_basis(W, topo)
    Gt = _dense(G @ Zt)  # full U coefficients of tied gradients
    # inclusion: distance of each gradient to the constrained space
    MUZ = _dense(U.Z.T @ MUfull @ U.Z)
    proj = U.Z @ np.linalg.solve(MUZ, _dense(U.Z.T @ MUfull) @ Gt)
    D = Gt - proj
    num = np.sqrt(np.maximum(np.einsum("ij,ij->j", D, MUfull @ D), 0))
    den = np.sqrt(np.maximum(np.einsum("ij,ij->j", Gt, MUfull @ Gt), 0))
    incl = float(np.max(num / np.where(den > 0, den, 1.0))) if Gt.size else 0.0

    B, LU, MU = _rot_free_coords(U)
    _, N1 = rank_decision(B, want_null=True)
    free1 = sla.solve_triangular(LU.T, N1, lower=False)  # rot-free fields, free coords
    C = circulation_functionals(U, topo.reduced_index_set) @ (U.Z @ free1)
    dec_c, N2 = rank_decision(C, want_null=True)
    fields = U.Z @ (free1 @ N2)  # full coefficients, zero reduced circulations
    # distance of each field to span of tied gradients (L2)
    dec_t, _ = rank_decision(LU.T @ _dense(U.Z.T @ Gt)) if Gt.size else (RankDecision(0, 0, math.inf, np.zeros(0)), None)
    if Gt.size and fields.size:
        MG = Gt.T @ (MUfull @ Gt)
        coef = np.linalg.lstsq(MG, Gt.T @ (MUfull @ fields), rcond=None)[0]
        R = fields - Gt @ coef
        nr = np.sqrt(np.maximum(np.einsum("ij,ij->j", R, MUfull @ R), 0))
        nf = np.sqrt(np.maximum(np.einsum("ij,ij->j", fields, MUfull @ fields), 0))
        dist = float(np.max(nr / nf))
    else:
        dist = 0.0 if fields.shape[1] == 0 else 1.0
    n_fields = fields.shape[1]
    passed = incl <= tol and dist <= tol and n_fields == dec_t.rank
    return H1Result(passed, incl, dist, n_fields, dec_t.rank, dec_c.rank)


def drop_interior_dof(U: FESpace) -> FESpace:
    """Copy of ``U`` with the first cell-interior dof removed (negative control)."""
    nv, ne, ni = U.ref.layout
    if ni == 0:
        raise ValueError("space has no interior dofs")
    d = nv * U.mesh.n_vertices + ne * U.mesh.n_edges
    return build_space(U.mesh, U.family, U.bc, drop=[d])


# -- inf-sup estimates ------------------------------------------------------------------------
def _mean_zero_basis(Q: FESpace):
    m = mean_vector(Q)
    _, N = rank_decision(m[None, :], want_null=True)
    return N


def estimate_beta_rot(V: FESpace, Q: FESpace) -> float:
    """Smallest nonzero generalized singular value of (rot psi, q) against the
    H1 Gram of V and the L2 mass of Q."""
    A1 = (V.Z.T @ h1_gram(V) @ V.Z).tocsc()
    B = _dense(rot_coupling(Q, V) @ V.Z)
    MQ = _dense(mass_matrix(Q))
    if Q.mean_zero:
        N = _mean_zero_basis(Q)
        B = N.T @ B
        MQ = N.T @ MQ @ N
    if B.shape[0] == 0 or B.shape[1] == 0:
        return math.inf
    X = Factorization(A1, "spd").solve(np.ascontiguousarray(B.T), rtol=1e-10)
    S = B @ X
    S = 0.5 * (S + S.T)
    mu = sla.eigh(S, MQ, eigvals_only=True)
    top = mu[-1]
    if top <= 0:
        return 0.0
    nz = mu[mu > RANK_RTOL * top]
    return float(np.sqrt(nz[0]))


def estimate_beta_harmonic(V: FESpace, U: FESpace, r: ReductionOperator, basis: HarmonicBasis) -> float:
    """Inf-sup constant of (R psi, h) over rot-free reduced rotations and harmonic fields.

    With psi in H1-orthonormal coordinates, the supremum over the nullspace K
    of rot R is the norm of the coupling projected onto K, so the constant is
    the smallest singular value of C P_K.
    """
    if basis.dim == 0:
        return math.inf
    A1 = _dense(V.Z.T @ h1_gram(V) @ V.Z)
    LA = _orthonormal_coords(A1)
    Q = _q_full(U)
    LQ = _orthonormal_coords(_dense(mass_matrix(Q)))
    Rc = _dense(r.constrained)  # (U.nfree, V.nfree)
    Bq = _dense(rot_coupling(Q, U) @ U.Z) @ Rc
    Bq = sla.solve_triangular(LQ, Bq, lower=True)
    Bq = sla.solve_triangular(LA, Bq.T, lower=True).T  # psi = LA^{-T} y
    MU = _dense(U.Z.T @ mass_matrix(U) @ U.Z)
    C = basis.free.T @ MU @ Rc
    C = sla.solve_triangular(LA, C.T, lower=True).T
    # project the rows of C onto the nullspace of Bq
    X = np.linalg.lstsq(Bq.T, C.T, rcond=RANK_RTOL)[0]
    CK = C - (Bq.T @ X).T
    s = np.linalg.svd(CK, compute_uv=False)
    return float(s[-1]) if len(s) == basis.dim else 0.0


# -- exactness ------------------------------------------------------------------------------------
def check_exactness(U: FESpace, Q: FESpace, W: FESpace, basis: HarmonicBasis | None = None) -> dict:
    """rank(rot) = dim Q_Gamma and dim U = dim grad W + dim H + dim Q."""
    B, _, _ = _rot_free_coords(U)
    dec, _ = rank_decision(B)
    Gf = _gradient_free(W, U)
    dg, _ = rank_decision(Gf)
    basis = basis or harmonic_basis(W, U)
    dim_q = Q.dim
    rot_ok = dec.rank == dim_q
    sum_ok = U.nfree == dg.rank + basis.dim + dim_q
    return dict(
        passed=rot_ok and sum_ok, rank_rot=dec.rank, dim_Q=dim_q, dim_U=U.nfree,
        dim_gradW=dg.rank, dim_H=basis.dim, exactness_defect=dim_q - dec.rank,
        gap=min(dec.gap, dg.gap),
    )


def check_macro_image(split_mesh: Mesh, p: int) -> dict:
    """On an Alfeld split: dim(grad W + V) equals dim of the constrained BDM_p space."""
    W = build_space(split_mesh, Family.lagrange(p + 1))
    V = build_space(split_mesh, Family.lagrange_vector(p))
    U = build_space(split_mesh, Family.bdm(p))
    Gf = _gradient_free(W, U)
    Rf = _dense(make_reduction(V, U).constrained)
    dec, _ = rank_decision(np.hstack([Gf, Rf]))
    return dict(passed=dec.rank == U.nfree, rank=dec.rank, dim_U=U.nfree, gap=dec.gap)


# -- reduction invariants -----------------------------------------------------------------------
def commuting_residual(r: ReductionOperator, psi: DiscreteField) -> float:
    """||rot R psi - P rot psi|| / ||psi||_1 with P the L2 projection onto DG."""
    Q = _q_full(r.target)
    MQ = mass_matrix(Q)
    from .linalg import sparse_solve

    q1 = sparse_solve(MQ, rot_coupling(Q, r.target) @ (r.matrix @ psi.coeffs), rtol=1e-12)
    q2 = sparse_solve(MQ, rot_coupling(Q, r.source) @ psi.coeffs, rtol=1e-12)
    d = q1 - q2
    n1 = math.sqrt(psi.coeffs @ (h1_gram(r.source) @ psi.coeffs))
    return math.sqrt(max(d @ (MQ @ d), 0.0)) / n1


def edge_moment_residual(r: ReductionOperator, psi: DiscreteField) -> float:
    """max over edges and moments of |l_e(R psi) - l_e(psi)|."""
    dual = hrot_dual(r.target)
    src = psi.space
    ev = np.stack([src.tabulate(dual.edge_ref[i])[0] for i in range(3)], axis=1)
    T = src.mesh.n_triangles
    ev = np.broadcast_to(ev, (T,) + ev.shape[1:])
    c = src.gather(psi.coeffs)
    fv = np.einsum("tenqc,tn->teqc", ev, c)[:, :, :, None, :]
    Rpsi = r.matrix @ psi.coeffs
    uv = np.stack([r.target.tabulate(dual.edge_ref[i])[0] for i in range(3)], axis=1)
    cu = r.target.gather(Rpsi)
    gv = np.einsum("tenqc,tn->teqc", uv, cu)[:, :, :, None, :]
    iv = np.zeros((T, dual.int_rule.size, 1, 2))
    a = dual.apply(fv, iv)[:, : 3 * dual.ne]
    b = dual.apply(gv, iv)[:, : 3 * dual.ne]
    return float(np.abs(a - b).max())


def idempotency_residual(r: ReductionOperator, psi: DiscreteField) -> float:
    """||R(R psi) - R psi|| / ||psi|| in L2."""
    U = r.target
    rr = make_reduction(U, U)
    Rpsi = r.matrix @ psi.coeffs
    d = rr.matrix @ Rpsi - Rpsi
    MU, MV = mass_matrix(U), mass_matrix(r.source)
    return math.sqrt(max(d @ (MU @ d), 0.0)) / math.sqrt(psi.coeffs @ (MV @ psi.coeffs))


def measure_CR(r: ReductionOperator, trials: int = 50, seed: int = 0, exact: bool = False) -> float:
    from .reduction import measure_CR as _m

    return _m(r, trials, seed, exact)


# -- full report ------------------------------------------------------------------------------------
@dataclass
class DiagnosticsReport:
    scheme: str
    mesh_info: str
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v != "FAIL" for v in self.flags.values())

    def lines(self):
        out = []
        for k, v in self.flags.items():
            detail = ", ".join(f"{n}={_fmt(self.values[n])}" for n in self._keys_for(k))
            out.append(f"{k}: {v}  {detail}")
        return out

    def _keys_for(self, flag):
        return {
            "C1": ["commuting_residual"], "H3": ["edge_moment_residual"], "R-idempotent": ["idempotency_residual"],
            "dim-formula": ["dim_harmonic", "dim_formula", "gap"], "exactness": ["rank_rot", "dim_Q", "dim_gradW", "dim_U"],
            "H1": ["h1_inclusion", "h1_distance"], "C2": ["C_R"], "C3": ["beta_rot"], "C4": ["beta_harmonic"],
        }.get(flag, [])

    def to_kv(self) -> str:
        keys = sorted(self.values)
        return "\n".join(f"{k} = {_fmt(self.values[k])}" for k in keys) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6e}"
    return str(v)


def verify(mesh: Mesh, scheme_name: str = "rt", p: int = 2, seed: int = 0, trials: int = 20, defect: bool = False,
           inf_sup: bool = True) -> DiagnosticsReport:
    """Run every condition check for the rt or bdm triple on ``mesh``."""
    if scheme_name not in ("rt", "bdm"):
        raise ValueError("verification covers the rt and bdm families")
    wdeg = p if scheme_name == "rt" else p + 1
    W = build_space(mesh, Family.lagrange(wdeg))
    V = build_space(mesh, Family.bubble_vector(p))
    fam_u = Family(scheme_name, p)
    U = build_space(mesh, fam_u)
    if defect:
        U = drop_interior_dof(U)
    Q = build_space(mesh, Family.dg(p - 1))
    r = make_reduction(V, U)
    rng = np.random.default_rng(seed)
    rep = DiagnosticsReport(f"{scheme_name}{p}", repr(mesh))
    th = dict(commuting=1e-10, edge=1e-11, idempotency=1e-11, h1=1e-8, gap=MIN_GAP)
    rep.thresholds = th
    c1 = h3 = idem = 0.0
    for _ in range(trials):
        psi = DiscreteField.from_free(V, rng.standard_normal(V.nfree))
        c1 = max(c1, commuting_residual(r, psi))
        h3 = max(h3, edge_moment_residual(r, psi))
        idem = max(idem, idempotency_residual(r, psi))
    rep.values.update(commuting_residual=c1, edge_moment_residual=h3, idempotency_residual=idem)
    rep.flags["C1"] = "PASS" if c1 <= th["commuting"] else "FAIL"
    rep.flags["H3"] = "PASS" if h3 <= th["edge"] else "FAIL"
    rep.flags["R-idempotent"] = "PASS" if idem <= th["idempotency"] else "FAIL"
    try:
        basis = harmonic_basis(W, U)
        dimf = check_dim_formula(mesh, basis)
        rep.values.update(dim_harmonic=dimf["computed"], dim_formula=dimf["formula"], gap=dimf["gap"])
        rep.flags["dim-formula"] = "PASS" if dimf["passed"] else "FAIL"
        ex = check_exactness(U, Q, W, basis)
        rep.values.update({k: ex[k] for k in ("rank_rot", "dim_Q", "dim_gradW", "dim_U", "exactness_defect")})
        rep.flags["exactness"] = "PASS" if ex["passed"] else "FAIL"
    except RankAmbiguityError as exc:
        basis = None
        rep.values.update(dim_harmonic="ambiguous", dim_formula=boundary_topology(mesh).harmonic_dimension, gap=str(exc))
        rep.flags["dim-formula"] = "FAIL"
        rep.flags["exactness"] = "FAIL"
        for k in ("rank_rot", "dim_Q", "dim_gradW", "dim_U"):
            rep.values.setdefault(k, "n/a")
    h1 = check_H1(W, U)
    rep.values.update(h1_inclusion=h1.inclusion_residual, h1_distance=h1.gradient_distance)
    rep.flags["H1"] = "PASS" if h1.passed else "FAIL"
    cr = measure_CR(r, trials=trials, seed=seed)
    rep.values["C_R"] = cr
    rep.flags["C2"] = "MEASURED"
    if inf_sup:
        b_rot = estimate_beta_rot(V, Q)
        rep.values["beta_rot"] = b_rot
        rep.flags["C3"] = "MEASURED" if b_rot > 0 else "FAIL"
        if basis is None or basis.dim == 0:
            rep.values["beta_harmonic"] = math.inf
            rep.flags["C4"] = "VACUOUS"
        else:
            b_h = estimate_beta_harmonic(V, U, r, basis)
            rep.values["beta_harmonic"] = b_h
            rep.flags["C4"] = "MEASURED" if b_h > 0 else "FAIL"
        bh = rep.values["beta_harmonic"]
        rep.values["beta_R_lower_bound_up_to_constant"] = (b_rot * bh / cr ** 2) if math.isfinite(bh) else b_rot / cr ** 2
    return rep
