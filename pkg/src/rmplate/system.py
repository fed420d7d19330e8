"""Assembly and solution of the discrete plate problems.

The reduced energy is

    a(theta, theta) / 2 + lambda / (2 t^2) || grad w - R theta ||^2 - F(w) - G(theta)

with ``R`` the identity for the unreduced families.  Unknowns are ordered
``[w | theta]`` on the full dof numbering of the two spaces.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .femlib.forms import assemble_pair, load_vector, mass_matrix
from .femlib.quadrature import triangle_rule
from .femlib.spaces import DiscreteField, Family, FESpace, build_space, cell_chunks
from .linalg import Factorization
from .mesh import Mesh, alfeld_split
from .reduction import ReductionOperator, gradient_operator, make_reduction

SCHEMES = ("rt", "bdm", "macro", "standard", "plain")
DATA_OVERSAMPLING = 8


class ConfigError(ValueError):
    """Invalid scheme, degree or material parameters."""


@dataclass(frozen=True)
class MaterialParams:
    """Young's modulus, Poisson ratio, shear correction factor and thickness."""

    E: float = 1.0
    nu: float = 0.3
    k: float = 5.0 / 6.0
    t: float = 1.0

    def __post_init__(self):
        if not self.E > 0:
            raise ConfigError(f"E must be positive, got {self.E}")
        if not 0.0 <= self.nu < 0.5:
            raise ConfigError(f"nu must lie in [0, 1/2), got {self.nu}")
        if not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if not 0.0 < self.t <= 1.0:
            raise ConfigError(f"t must lie in (0, 1], got {self.t}")

    @property
    def lam(self) -> float:
        """Shear modulus factor E k / (2 (1 + nu))."""
        return self.E * self.k / (2.0 * (1.0 + self.nu))

    @property
    def D(self) -> float:
        """Bending stiffness E / (12 (1 - nu^2))."""
        return self.E / (12.0 * (1.0 - self.nu ** 2))

    def with_t(self, t: float) -> "MaterialParams":
        return MaterialParams(self.E, self.nu, self.k, t)


@dataclass(frozen=True)
class Scheme:
    """A discretization family.

    ``rt`` and ``bdm`` use the bubble-enriched rotations with the matching
    reduction; ``macro`` solves on the Alfeld split; ``standard`` and
    ``plain`` use continuous Lagrange spaces without reduction.  For
    ``plain`` the degrees of w and theta are ``p`` and ``p_theta``.
    """

    name: str
    p: int
    p_theta: int | None = None

    def __post_init__(self):
        if self.name not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.name!r}; choose from {', '.join(SCHEMES)}")
        low = {"rt": 2, "bdm": 2, "macro": 2, "standard": 4, "plain": 1}[self.name]
        if self.p < low:
            raise ConfigError(f"scheme {self.name} needs p >= {low}, got {self.p}")
        if self.p > 7:
            raise ConfigError(f"degree {self.p} is above the supported maximum 7")
        if self.name == "plain" and (self.p_theta or 0) < 1:
            object.__setattr__(self, "p_theta", self.p)

    @property
    def reduced(self) -> bool:
        return self.name in ("rt", "bdm")

    def families(self):
        """(W, V, U or None, Q or None) families."""
        p = self.p
        if self.name == "rt":
            return Family.lagrange(p), Family.bubble_vector(p), Family.rt(p), Family.dg(p - 1)
        if self.name == "bdm":
            return Family.lagrange(p + 1), Family.bubble_vector(p), Family.bdm(p), Family.dg(p - 1)
        if self.name in ("macro", "standard"):
            return Family.lagrange(p + 1), Family.lagrange_vector(p), None, None
        return Family.lagrange(p), Family.lagrange_vector(self.p_theta), None, None

    def solve_mesh(self, m: Mesh) -> Mesh:
        return alfeld_split(m) if self.name == "macro" else m

    def __str__(self):
        if self.name == "plain":
            return f"plain{self.p}/{self.p_theta}"
        return f"{self.name}{self.p}"


# -- loads ------------------------------------------------------------------------
@dataclass(frozen=True)
class LoadDensities:
    """Explicit loads F(v) = int f v and G(psi) = int g . psi."""

    f: Callable | None = None
    g: Callable | None = None

    def w_terms(self, material):
        return [("values", self.f)] if self.f is not None else []

    def theta_terms(self, material):
        return [("values", self.g)] if self.g is not None else []


@dataclass(eq=False)
class PlateProblem:
    mesh: Mesh
    material: MaterialParams
    scheme: Scheme
    load: object = field(default_factory=LoadDensities)


@dataclass(eq=False)
class DiscreteSolution:
    w_h: DiscreteField
    theta_h: DiscreteField
    gamma_h: DiscreteField | None
    material: MaterialParams
    meta: dict = field(default_factory=dict)


# -- system ------------------------------------------------------------------------------
class PlateSystem:
    """Spaces, reduction and t-independent matrices for one scheme on one mesh.

    ``A`` is the bending matrix (nonzero on the theta block only) for the
    system's material, ``S`` the unscaled shear
    matrix ``(Xi_R u, Xi_R u)`` on ``[w | theta]``; the stiffness for a given
    thickness is ``A + lambda t^-2 S``.
    """

    def __init__(self, mesh: Mesh, scheme: Scheme, material: MaterialParams | None = None):
        self.scheme = scheme
        self.input_mesh = mesh
        self.mesh = scheme.solve_mesh(mesh)
        self.material = material or MaterialParams()
        fw, fv, fu, fq = scheme.families()
        self.W = build_space(self.mesh, fw)
        self.V = build_space(self.mesh, fv)
        self.U = build_space(self.mesh, fu) if fu else None
        self.Q_family = fq
        if self.U is not None:
            self.R: ReductionOperator = make_reduction(self.V, self.U)
            self.G_local, self.G = gradient_operator(self.W, self.U)
        else:
            self.R = make_reduction(self.V)
            self.G_local = self.G = None
        self.nw, self.nv = self.W.ndof, self.V.ndof
        self.Z = sp.block_diag([self.W.Z, self.V.Z], format="csr")
        self.cell_dofs = np.hstack([self.W.cell_dofs, self.V.cell_dofs + self.nw])
        self._A = {}
        self._S = None

    # -- matrices --------------------------------------------------------------------
    @property
    def ndof(self) -> int:
        return self.nw + self.nv

    def _scatter(self, local, cells):
        d = self.cell_dofs[cells]
        nc, n = d.shape
        I = np.broadcast_to(d[:, :, None], (nc, n, n)).ravel()
        J = np.broadcast_to(d[:, None, :], (nc, n, n)).ravel()
        return sp.csr_matrix((local.ravel(), (I, J)), shape=(self.ndof, self.ndof))

    def bending_data(self, jac, nu):
        """Weighted strain vectors so that their Gram gives a(., .) / D."""
        e11, e22 = jac[..., 0, 0], jac[..., 1, 1]
        e12 = 0.5 * (jac[..., 0, 1] + jac[..., 1, 0])
        s = np.stack([e11, e22, np.sqrt(2.0) * e12], axis=-1)
        C = np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 1.0 - nu]])
        L = np.linalg.cholesky(C)
        return s @ L

    def assemble_a(self, material: MaterialParams | None = None) -> sp.csr_matrix:
        """Bending matrix on the full theta dofs."""
        mat = material or self.material
        deg = 2 * (self.V.ref.poly_degree - 1)
        A = assemble_pair(self.V, None, lambda s, v, j: self.bending_data(j, mat.nu), max(deg, 0))
        return (mat.D * A).tocsr()

    def shear_basis(self, pts, cells):
        """Values (nc, nw + nv, nq, 2) of Xi_R applied to each local basis pair."""
        _, jw = self.W.tabulate(pts, cells)
        gw = jw[:, :, :, 0, :]
        vv, _ = self.V.tabulate(pts, cells)
        nc = gw.shape[0]
        vv = np.broadcast_to(vv, (nc,) + vv.shape[1:])
        if self.U is None:
            return np.concatenate([gw, -vv], axis=1)
        phi, _ = self.U.tabulate(pts, cells)  # (nc, nu, nq, 2)
        B = np.concatenate([self.G_local[cells], -self.R.local[cells]], axis=2)  # (nc, nu, nw+nv)
        return np.einsum("tuqc,tuk->tkqc", phi, B)

    def shear_degree(self) -> int:
        if self.U is not None:
            return 2 * self.U.ref.poly_degree
        return 2 * max(self.W.ref.poly_degree - 1, self.V.ref.poly_degree)

    def assemble_shear(self) -> sp.csr_matrix:
        rule = triangle_rule(self.shear_degree())
        n = self.cell_dofs.shape[1]
        out = sp.csr_matrix((self.ndof, self.ndof))
        for cells in cell_chunks(self.mesh.n_triangles, n * rule.size * 6):
            F = np.ascontiguousarray(self.shear_basis(rule.points, cells))
            w = rule.weights[None, :] * np.abs(self.W.geom.detJ[cells])[:, None]
            out = out + self._scatter(_kernels.gram(F, w), cells)
        return out.tocsr()

    def bending(self, material: MaterialParams | None = None) -> sp.csr_matrix:
        """Bending matrix on the full ``[w | theta]`` dofs, cached per (E, nu)."""
        mat = material or self.material
        key = (mat.E, mat.nu)
        if key not in self._A:
            a = self.assemble_a(mat)
            self._A[key] = sp.block_diag([sp.csr_matrix((self.nw, self.nw)), a], format="csr")
        return self._A[key]

    @property
    def A(self):
        return self.bending()

    @property
    def S(self):
        if self._S is None:
            self._S = self.assemble_shear()
        return self._S

    def assemble_B_tR(self, material: MaterialParams | None = None, constrained: bool = True) -> sp.csr_matrix:
        mat = material or self.material
        K = self.bending(mat) + (mat.lam / mat.t ** 2) * self.S
        return (self.Z.T @ K @ self.Z).tocsr() if constrained else K.tocsr()

    def assemble_rhs(self, load, material: MaterialParams | None = None, constrained: bool = True) -> np.ndarray:
        mat = material or self.material
        b = np.zeros(self.ndof)
        dw = 2 * self.W.ref.poly_degree + DATA_OVERSAMPLING
        dv = 2 * self.V.ref.poly_degree + DATA_OVERSAMPLING
        for kind, g in load.w_terms(mat):
            b[: self.nw] += load_vector(self.W, g, dw, kind)
        for kind, g in load.theta_terms(mat):
            b[self.nw:] += load_vector(self.V, g, dv, kind)
        return self.Z.T @ b if constrained else b

    # -- shear operator on full coefficients -------------------------------------------
    def xi_matrix(self) -> sp.csr_matrix:
        """Global map [w | theta] -> U coefficients of grad w - R theta."""
        if self.U is None:
            raise ValueError(f"scheme {self.scheme} has no shear space")
        return sp.hstack([self.G, -self.R.matrix], format="csr")

    # -- solves ----------------------------------------------------------------------------
    def solve_primal(self, load, material: MaterialParams | None = None) -> DiscreteSolution:
        mat = material or self.material
        t0 = time.perf_counter()
        K = self.assemble_B_tR(mat)
        b = self.assemble_rhs(load, mat)
        fac = Factorization(K, "spd")
        x = fac.solve(b)
        u = self.Z @ x
        w = DiscreteField(self.W, u[: self.nw])
        th = DiscreteField(self.V, u[self.nw:])
        gamma = None
        if self.U is not None:
            gamma = DiscreteField(self.U, (mat.lam / mat.t ** 2) * (self.xi_matrix() @ u))
        meta = dict(
            ndof=int(K.shape[0]),
            residual=float(getattr(fac, "residual", 0.0)),
            seconds=time.perf_counter() - t0,
            energy=float(-0.5 * b @ x),
        )
        return DiscreteSolution(w, th, gamma, mat, meta)

    def solve_mixed(self, load, material: MaterialParams | None = None) -> DiscreteSolution:
        mat = material or self.material
        if self.U is None:
            raise ValueError(f"scheme {self.scheme} has no shear space for the mixed form")
        t0 = time.perf_counter()
        ZU = self.U.Z
        MU = (ZU.T @ mass_matrix(self.U) @ ZU).tocsr()
        B = (ZU.T @ self.xi_matrix() @ self.Z).tocsr()
        A0 = (self.Z.T @ self.bending(mat) @ self.Z).tocsr()
        C = (MU @ B).tocsr()
        K = sp.bmat([[A0, C.T], [C, -(mat.t ** 2 / mat.lam) * MU]], format="csc")
        b = np.concatenate([self.assemble_rhs(load, mat), np.zeros(MU.shape[0])])
        fac = Factorization(K, "saddle")
        x = fac.solve(b)
        n = A0.shape[0]
        u = self.Z @ x[:n]
        w = DiscreteField(self.W, u[: self.nw])
        th = DiscreteField(self.V, u[self.nw:])
        gamma = DiscreteField(self.U, ZU @ x[n:])
        meta = dict(ndof=int(K.shape[0]), residual=float(getattr(fac, "residual", 0.0)), seconds=time.perf_counter() - t0)
        return DiscreteSolution(w, th, gamma, mat, meta)

    def shear_values(self, sol: DiscreteSolution, pts, cells=slice(None)) -> np.ndarray:
        """Discrete shear stress gamma_h (nc, nq, 2) at reference points."""
        if sol.gamma_h is not None:
            return sol.gamma_h.evaluate(pts, cells)[0]
        _, jw = sol.w_h.evaluate(pts, cells)
        th, _ = sol.theta_h.evaluate(pts, cells)
        mat = sol.material
        return (mat.lam / mat.t ** 2) * (jw[..., 0, :] - th)

    def energy(self, sol: DiscreteSolution, load) -> float:
        """Reduced energy J(w_h, theta_h) = B(u, u) / 2 - F(w_h) - G(theta_h)."""
        u = np.concatenate([sol.w_h.coeffs, sol.theta_h.coeffs])
        K = self.assemble_B_tR(sol.material, constrained=False)
        b = self.assemble_rhs(load, sol.material, constrained=False)
        return float(0.5 * u @ (K @ u) - b @ u)


def solve_primal(problem: PlateProblem) -> DiscreteSolution:
    return PlateSystem(problem.mesh, problem.scheme, problem.material).solve_primal(problem.load)


def solve_mixed(problem: PlateProblem) -> DiscreteSolution:
    return PlateSystem(problem.mesh, problem.scheme, problem.material).solve_mixed(problem.load)
