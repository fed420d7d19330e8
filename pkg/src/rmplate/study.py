"""Manufactured solutions, error norms and refinement studies."""
from __future__ import annotations

import hashlib
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .femlib.quadrature import triangle_rule
from .femlib.spaces import cell_chunks, call_field
from .mesh import Mesh, builtin_mesh, refine_uniform
from .system import DATA_OVERSAMPLING, ConfigError, DiscreteSolution, MaterialParams, PlateSystem, Scheme

CSV_COLUMNS = (
    "family", "p", "level", "h", "ndof_w", "ndof_theta", "t",
    "err_w_h1", "err_theta_h1", "err_gamma_l2", "err_total", "rate_total",
)


@dataclass(frozen=True)
class ManufacturedSolution:
    """w = sin^3(4 pi x) sin^3(4 pi y), theta = (1 - 100 t^2 / lambda) grad w, gamma = 100 grad w.

    With these fields ``lambda t^-2 (grad w - theta) = gamma`` holds exactly, so
    the loads F(v) = (gamma, grad v) and G(psi) = a(theta, psi) - (gamma, psi)
    make them the exact solution for any boundary conditions they satisfy.
    """

    material: MaterialParams
    amplitude: float = 100.0
    freq: float = 4.0 * math.pi

    @property
    def theta_factor(self) -> float:
        m = self.material
        return 1.0 - self.amplitude * m.t ** 2 / m.lam

    def w(self, x, y):
        return np.sin(self.freq * x) ** 3 * np.sin(self.freq * y) ** 3

    def grad_w(self, x, y):
        k = self.freq
        sx, cx, sy, cy = np.sin(k * x), np.cos(k * x), np.sin(k * y), np.cos(k * y)
        return np.stack([3 * k * sx ** 2 * cx * sy ** 3, 3 * k * sy ** 2 * cy * sx ** 3], axis=-1)

    def hess_w(self, x, y):
        k = self.freq
        sx, cx, sy, cy = np.sin(k * x), np.cos(k * x), np.sin(k * y), np.cos(k * y)
        wxx = 3 * k * k * (2 * sx * cx ** 2 - sx ** 3) * sy ** 3
        wyy = 3 * k * k * (2 * sy * cy ** 2 - sy ** 3) * sx ** 3
        wxy = 9 * k * k * sx ** 2 * cx * sy ** 2 * cy
        return np.stack([np.stack([wxx, wxy], -1), np.stack([wxy, wyy], -1)], -2)

    def theta(self, x, y):
        return self.theta_factor * self.grad_w(x, y)

    def grad_theta(self, x, y):
        return self.theta_factor * self.hess_w(x, y)

    def gamma(self, x, y):
        return self.amplitude * self.grad_w(x, y)

    def moment(self, x, y):
        """Bending moment tensor of theta, flattened row-major."""
        m = self.material
        eps = self.grad_theta(x, y)
        tr = eps[..., 0, 0] + eps[..., 1, 1]
        sig = (1 - m.nu) * eps + m.nu * tr[..., None, None] * np.eye(2)
        return m.D * sig.reshape(sig.shape[:-2] + (4,))

    # load terms consumed by PlateSystem.assemble_rhs
    def w_terms(self, material):
        return [("gradient", self.gamma)]

    def theta_terms(self, material):
        return [("gradient", self.moment), ("values", lambda x, y: -self.gamma(x, y))]


def manufactured_36(material: MaterialParams, t: float | None = None) -> ManufacturedSolution:
    if material.lam <= 0:
        raise ConfigError("lambda must be positive")
    if t is not None:
        material = material.with_t(t)
    return ManufacturedSolution(material)


@dataclass(frozen=True)
class ErrorRecord:
    err_w_h1: float
    err_theta_h1: float
    err_gamma_l2: float
    err_total: float
    norm_w_h1: float
    norm_theta_h1: float
    norm_gamma_l2: float
    abs_w_h1: float
    abs_theta_h1: float
    abs_gamma_l2: float


def error_norms(system: PlateSystem, sol: DiscreteSolution, exact: ManufacturedSolution, oversample: int = DATA_OVERSAMPLING) -> ErrorRecord:
    """Relative H1 errors of w and theta, L2 error of gamma, and the combined error.

    The combined error is
    (|w - w_h|_1 + |theta - theta_h|_1 + t |gamma - gamma_h|) / (|w|_1 + |theta|_1 + t |gamma|),
    with full H1 norms.
    """
    p = max(system.W.ref.poly_degree, system.V.ref.poly_degree)
    rule = triangle_rule(min(2 * p + oversample, 40))
    acc = np.zeros(6)
    G = system.W.geom
    T = system.mesh.n_triangles
    for cells in cell_chunks(T, (system.W.nloc + system.V.nloc) * rule.size * 8):
        X = G.map(rule.points, cells)
        x, y = X[..., 0], X[..., 1]
        wq = rule.weights[None, :] * np.abs(G.detJ[cells])[:, None]
        wv, wj = sol.w_h.evaluate(rule.points, cells)
        tv, tj = sol.theta_h.evaluate(rule.points, cells)
        gv = system.shear_values(sol, rule.points, cells)
        ew, egw = exact.w(x, y), exact.grad_w(x, y)
        et, ejt = exact.theta(x, y), exact.grad_theta(x, y)
        eg = exact.gamma(x, y)
        d_w = (ew - wv[..., 0]) ** 2 + np.sum((egw - wj[..., 0, :]) ** 2, -1)
        d_t = np.sum((et - tv) ** 2, -1) + np.sum((ejt - tj) ** 2, (-1, -2))
        d_g = np.sum((eg - gv) ** 2, -1)
        n_w = ew ** 2 + np.sum(egw ** 2, -1)
        n_t = np.sum(et ** 2, -1) + np.sum(ejt ** 2, (-1, -2))
        n_g = np.sum(eg ** 2, -1)
        acc += [np.sum(a * wq) for a in (d_w, d_t, d_g, n_w, n_t, n_g)]
    ew_, et_, eg_, nw_, nt_, ng_ = np.sqrt(np.maximum(acc, 0.0))
    t = sol.material.t
    total = (ew_ + et_ + t * eg_) / (nw_ + nt_ + t * ng_)
    return ErrorRecord(ew_ / nw_, et_ / nt_, eg_ / ng_, total, nw_, nt_, ng_, ew_, et_, eg_)


# -- studies -------------------------------------------------------------------------------
# Uniform refinements of the named mesh before level 0.  The manufactured
# solution oscillates on a 1/12 length scale, so the low-order families need
# a finer start to reach the asymptotic range within four levels.
DEFAULT_BASE_REFINEMENTS = {"rt": 2, "bdm": 2, "macro": 1, "standard": 0, "plain": 0}


@dataclass
class StudyConfig:
    scheme: Scheme
    t_values: tuple = (1.0, 1e-1, 1e-2, 1e-3)
    levels: int = 4
    material: MaterialParams = field(default_factory=MaterialParams)
    mesh: str = "two_hole"
    seed: int = 0
    diagnostics: bool = False
    base_refinements: int | None = None

    def __post_init__(self):
        if self.base_refinements is None:
            self.base_refinements = DEFAULT_BASE_REFINEMENTS[self.scheme.name]
        if self.levels < 2:
            raise ConfigError("a refinement study needs at least 2 levels")
        if self.base_refinements < 0:
            raise ConfigError("base_refinements must be non-negative")
        for t in self.t_values:
            if not 0.0 < t <= 1.0:
                raise ConfigError(f"thickness {t} outside (0, 1]")

    def load_mesh(self) -> Mesh:
        """Starting mesh of the study: the named mesh after ``base_refinements`` uniform refinements."""
        if isinstance(self.mesh, Mesh):
            m = self.mesh
        elif self.mesh.endswith(".msh"):
            from .mesh import read_mesh

            m = read_mesh(self.mesh)
        else:
            m = builtin_mesh(self.mesh)
        for _ in range(self.base_refinements):
            m = refine_uniform(m)
        return m

    def digest(self) -> str:
        d = dict(
            scheme=str(self.scheme), t=list(self.t_values), levels=self.levels,
            material=asdict(self.material), mesh=str(self.mesh), seed=self.seed,
            base_refinements=self.base_refinements,
        )
        return hashlib.sha256(repr(sorted(d.items())).encode()).hexdigest()[:12]


@dataclass
class ConvergenceReport:
    config: StudyConfig
    rows: list = field(default_factory=list)

    def rate(self, key: str, t: float, level: int) -> float:
        """log2 ratio of ``key`` between ``level - 1`` and ``level`` at thickness ``t``."""
        a = self.get(t, level - 1)[key]
        b = self.get(t, level)[key]
        return math.log2(a / b)

    def get(self, t: float, level: int) -> dict:
        for r in self.rows:
            if r["t"] == t and r["level"] == level:
                return r
        raise KeyError((t, level))

    def header_comment(self) -> str:
        return f"# rmplate {__version__} config={self.config.digest()} seed={self.config.seed}"

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.header_comment() + "\n")
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            vals = []
            for c in CSV_COLUMNS:
                v = r[c]
                if isinstance(v, float):
                    vals.append("" if math.isnan(v) else f"{v:.12e}")
                else:
                    vals.append(str(v))
            buf.write(",".join(vals) + "\n")
        return buf.getvalue()


def _row(cfg, level, mesh, system, t, err):
    return dict(
        family=cfg.scheme.name, p=cfg.scheme.p, level=level, h=float(mesh.h),
        ndof_w=int(system.W.nfree), ndof_theta=int(system.V.nfree), t=float(t),
        err_w_h1=err.err_w_h1, err_theta_h1=err.err_theta_h1, err_gamma_l2=err.err_gamma_l2,
        err_total=err.err_total, rate_total=float("nan"),
    )


def run_convergence(cfg: StudyConfig, on_row=None) -> ConvergenceReport:
    """Solve on successive uniform refinements and record errors and rates.

    ``on_row`` is called with the report after every completed row, so a
    caller can flush partial results if a later level fails.
    """
    report = ConvergenceReport(cfg)
    mesh = cfg.load_mesh()
    for level in range(cfg.levels):
        if level:
            mesh = refine_uniform(mesh)
        system = PlateSystem(mesh, cfg.scheme, cfg.material)
        for t in cfg.t_values:
            mat = cfg.material.with_t(t)
            exact = manufactured_36(mat)
            sol = system.solve_primal(exact, mat)
            err = error_norms(system, sol, exact)
            row = _row(cfg, level, system.mesh, system, t, err)
            if level:
                prev = report.get(float(t), level - 1)
                row["rate_total"] = math.log2(prev["err_total"] / row["err_total"])
            row["w_ratio"] = err.norm_w_h1 and sol_norm_ratio(system, sol, exact, err)
            report.rows.append(row)
            if on_row is not None:
                on_row(report)
    return report


def sol_norm_ratio(system, sol, exact, err) -> float:
    """|w_h|_1 / |w|_1, the deflection fraction captured by the discrete solution."""
    rule = triangle_rule(2 * system.W.ref.poly_degree)
    wv, wj = sol.w_h.evaluate(rule.points)
    wq = rule.weights[None, :] * np.abs(system.W.geom.detJ)[:, None]
    n = np.sum((wv[..., 0] ** 2 + np.sum(wj[..., 0, :] ** 2, -1)) * wq)
    return float(np.sqrt(n) / err.norm_w_h1)


def run_locking_demo(cfg: StudyConfig) -> ConvergenceReport:
    """Convergence study for the unreduced low-order scheme, recording |w_h|_1 / |w|_1."""
    if cfg.scheme.name != "plain":
        raise ConfigError("the locking demonstration uses the plain scheme")
    if any(t > 1e-2 for t in cfg.t_values):
        raise ConfigError("the locking demonstration needs t <= 1e-2")
    return run_convergence(cfg)
