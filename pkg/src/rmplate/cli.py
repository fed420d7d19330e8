"""Command-line front end.

Subcommands: ``convergence``, ``verify``, ``mesh`` and ``locking-demo``.
Exit codes: 0 success, 1 configuration or input error, 2 numerical failure,
3 a verified condition failed.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import os
import sys

import numpy as np

from . import __version__
from .mesh import MeshError, alfeld_split, boundary_topology, builtin_mesh, dump_mesh, read_mesh, refine
from .system import SCHEMES, ConfigError, MaterialParams, Scheme

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CONDITION = 0, 1, 2, 3

DEFAULTS = dict(
    mesh="two_hole", family="rt", p=2, p_theta=None, t="1,0.1,0.01,0.001", levels=4, base_refinements=None,
    E=1.0, nu=0.3, kappa=5.0 / 6.0, seed=0, out=".", svg=False, trials=20, inject_defect=None, inf_sup=True,
)
# per-subcommand defaults, applied before the config file
COMMAND_DEFAULTS = {
    "verify": dict(levels=1, base_refinements=0),
    "locking-demo": dict(t="0.001", base_refinements=0),
}
# keys a config file may set, with their converters
_CONVERT = dict(
    mesh=str, family=str, p=int, p_theta=int, t=str, levels=int, base_refinements=int,
    E=float, nu=float, kappa=float, seed=int, out=str, trials=int, inject_defect=str,
    svg=lambda s: _parse_bool(s), inf_sup=lambda s: _parse_bool(s),
)


class UsageError(Exception):
    """Invalid command line or configuration file."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERT:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        try:
            out[key] = _CONVERT[key](val)
        except ValueError as exc:
            raise UsageError(f"{path}:{n}: bad value for {key}: {exc}") from None
    return out


def _global_flags(p: argparse.ArgumentParser):
    s = argparse.SUPPRESS
    p.add_argument("--out", default=s, help="output directory")
    p.add_argument("--seed", type=int, default=s, help="seed for randomized checks")
    p.add_argument("--svg", action="store_true", default=s, help="also write an SVG plot")
    p.add_argument("--E", type=float, default=s, help="Young's modulus")
    p.add_argument("--nu", type=float, default=s, help="Poisson ratio")
    p.add_argument("--kappa", type=float, default=s, help="shear correction factor")
    p.add_argument("--config", default=s, help="flat key = value configuration file")


def build_parser() -> argparse.ArgumentParser:
    s = argparse.SUPPRESS
    parser = _Parser(prog="rmplate", description="Locking-free Reissner-Mindlin plate toolkit")
    parser.add_argument("--version", action="version", version=f"rmplate {__version__}")
    _global_flags(parser)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def scheme_flags(q, with_t=True):
        q.add_argument("--mesh", default=s, help="builtin mesh name or path to a .msh file")
        q.add_argument("--family", choices=SCHEMES, default=s)
        q.add_argument("--p", type=int, default=s, help="polynomial degree")
        q.add_argument("--p-theta", dest="p_theta", type=int, default=s, help="rotation degree (plain scheme)")
        if with_t:
            q.add_argument("--t", default=s, help="comma separated thickness values")
        q.add_argument("--levels", type=int, default=s, help="number of refinement levels")
        q.add_argument("--base-refinements", dest="base_refinements", type=int, default=s,
                       help="uniform refinements applied before level 0")

    q = sub.add_parser("convergence", help="refinement study with the manufactured solution")
    _global_flags(q)
    scheme_flags(q)

    q = sub.add_parser("verify", help="check the structural conditions of the rt or bdm triple")
    _global_flags(q)
    scheme_flags(q, with_t=False)
    q.add_argument("--trials", type=int, default=s, help="random trial fields per check")
    q.add_argument("--inject-defect", dest="inject_defect", choices=["drop-interior-dof"], default=s,
                   help="corrupt the shear space (negative control)")
    q.add_argument("--no-inf-sup", dest="inf_sup", action="store_false", default=s, help="skip the inf-sup estimates")

    q = sub.add_parser("mesh", help="inspect, refine or split a mesh file")
    _global_flags(q)
    q.add_argument("action", choices=["info", "refine", "alfeld"])
    q.add_argument("path", help="mesh file or builtin mesh name")
    q.add_argument("--times", type=int, default=1, help="refinement count for 'refine'")
    q.add_argument("-o", "--output", default=None, help="output file for 'refine' and 'alfeld'")

    q = sub.add_parser("locking-demo", help="unreduced P1 x P1 scheme against rt2 at small t")
    _global_flags(q)
    q.add_argument("--mesh", default=s)
    q.add_argument("--t", default=s, help="thickness (at most 1e-2)")
    q.add_argument("--levels", type=int, default=s)
    q.add_argument("--base-refinements", dest="base_refinements", type=int, default=s)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (flags win)."""
    cfg = dict(DEFAULTS)
    cfg.update(COMMAND_DEFAULTS.get(args.command, {}))
    given = vars(args)
    if "config" in given:
        cfg.update(read_config(given["config"]))
    for k, v in given.items():
        if k not in ("config", "command"):
            cfg[k] = v
    return cfg


def _t_values(spec) -> tuple:
    try:
        vals = tuple(float(x) for x in str(spec).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--t: cannot parse {spec!r}") from None
    if not vals:
        raise UsageError("--t: no thickness values given")
    return vals


def _material(cfg) -> MaterialParams:
    return MaterialParams(E=cfg["E"], nu=cfg["nu"], k=cfg["kappa"])


def _load_mesh(spec: str):
    if os.path.exists(spec):
        return read_mesh(spec)
    try:
        return builtin_mesh(spec)
    except (FileNotFoundError, ModuleNotFoundError):
        raise UsageError(f"mesh {spec!r} is neither a file nor a builtin mesh") from None


def config_digest(cfg: dict) -> str:
    items = sorted((k, repr(v)) for k, v in cfg.items() if k not in ("out", "svg"))
    return hashlib.sha256(repr(items).encode()).hexdigest()[:12]


def header_line(cfg: dict) -> str:
    return f"# rmplate {__version__} config={config_digest(cfg)} seed={cfg['seed']}"


def _write(path: str, text: str):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


# -- convergence ---------------------------------------------------------------------------
def _study_config(cfg, scheme):
    from .study import StudyConfig

    mesh = _load_mesh(cfg["mesh"])
    return StudyConfig(
        scheme, _t_values(cfg["t"]), int(cfg["levels"]), _material(cfg), mesh, int(cfg["seed"]),
        base_refinements=None if cfg["base_refinements"] is None else int(cfg["base_refinements"]),
    )


def _report_csv(report, cfg) -> str:
    body = report.to_csv().split("\n", 1)[1]
    return header_line(cfg) + "\n" + body


def cmd_convergence(cfg: dict, locking: bool = False) -> int:
    from .study import run_convergence

    scheme = Scheme(cfg["family"], int(cfg["p"]), cfg.get("p_theta"))
    study = _study_config(cfg, scheme)
    out = cfg["out"]
    csv_path = os.path.join(out, "locking.csv" if locking else "convergence.csv")

    def flush(report):
        _write(csv_path, _report_csv(report, cfg))

    report = run_convergence(study, on_row=flush)
    for line in summary_lines(report):
        print(line)
    if cfg["svg"]:
        _write(os.path.join(out, "total_error.svg"), error_plot_svg(report, cfg))
    return EXIT_OK


def summary_lines(report):
    cfg = report.config
    lines = [f"{cfg.scheme}: levels={cfg.levels} t={','.join(f'{t:g}' for t in cfg.t_values)}"]
    for t in cfg.t_values:
        rows = [r for r in report.rows if r["t"] == float(t)]
        errs = " ".join(f"{r['err_total']:.3e}" for r in rows)
        rate = rows[-1]["rate_total"] if len(rows) > 1 else float("nan")
        lines.append(f"  t={t:g}: total errors {errs}; last rate {rate:.3f}")
    return lines


def error_plot_svg(report, cfg) -> str:
    """Log-log plot of total error against h, one line per thickness, as SVG text."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    markers = "os^vD<>p"
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    ts = report.config.t_values
    hs = []
    for i, t in enumerate(ts):
        rows = [r for r in report.rows if r["t"] == float(t)]
        h = [r["h"] for r in rows]
        e = [r["err_total"] for r in rows]
        hs += h
        ax.loglog(h, e, marker=markers[i % len(markers)], label=f"t = {t:g}")
    # rate guide triangle for the expected order
    order = _expected_order(report.config.scheme)
    rows = [r for r in report.rows if r["t"] == float(ts[0])]
    if len(rows) >= 2:
        h1, h0 = rows[-1]["h"], rows[-2]["h"]
        e0 = rows[-1]["err_total"] * 0.5
        ax.loglog([h1, h0, h0, h1], [e0, e0, e0 * (h0 / h1) ** order, e0], color="0.4", linewidth=0.8)
        ax.annotate(f"{order}", (h0, e0 * (h0 / h1) ** (order / 2)), fontsize=8, color="0.3")
    ax.set_xlabel("h")
    ax.set_ylabel("total relative error")
    ax.set_title(str(report.config.scheme))
    ax.grid(True, which="both", linewidth=0.3)
    ax.legend(fontsize=8)
    buf = io.StringIO()
    matplotlib.rcParams["svg.hashsalt"] = "rmplate"
    fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": f"rmplate {__version__}"})
    plt.close(fig)
    svg = buf.getvalue()
    if svg.startswith("<?xml"):
        svg = svg.split("\n", 1)[1]
    comment = header_line(cfg)[2:]
    return f"<!-- {comment} -->\n{svg}"


def _expected_order(scheme) -> int:
    return 1 if scheme.name == "plain" else scheme.p


# -- verify --------------------------------------------------------------------------------
DIAG_COLUMNS = ("level", "h", "quantity", "value", "flag")


def cmd_verify(cfg: dict) -> int:
    from .diagnostics import verify

    if cfg["family"] not in ("rt", "bdm"):
        raise UsageError("verify covers the rt and bdm families")
    Scheme(cfg["family"], int(cfg["p"]))
    mesh = _load_mesh(cfg["mesh"])
    levels = int(cfg["levels"])
    if levels < 1:
        raise UsageError("--levels must be at least 1")
    m = refine(mesh, int(cfg["base_refinements"]))
    rows = []
    failed = False
    for level in range(levels):
        if level:
            m = refine(m, 1)
        rep = verify(m, cfg["family"], int(cfg["p"]), seed=int(cfg["seed"]), trials=int(cfg["trials"]),
                     defect=cfg["inject_defect"] == "drop-interior-dof", inf_sup=bool(cfg["inf_sup"]))
        print(f"level {level} ({m.n_triangles} triangles)")
        for line in rep.lines():
            print("  " + line)
        failed |= not rep.passed
        flag_of = {}
        for flag in rep.flags:
            for key in rep._keys_for(flag):
                flag_of[key] = rep.flags[flag]
        for key in sorted(rep.values):
            v = rep.values[key]
            val = f"{v:.12e}" if isinstance(v, float) else str(v)
            rows.append(f"{level},{m.h:.12e},{key},{val},{flag_of.get(key, '')}")
    text = header_line(cfg) + "\n" + ",".join(DIAG_COLUMNS) + "\n" + "\n".join(rows) + "\n"
    _write(os.path.join(cfg["out"], "diagnostics.csv"), text)
    print("RESULT: " + ("FAIL" if failed else "PASS"))
    return EXIT_CONDITION if failed else EXIT_OK


# -- mesh ----------------------------------------------------------------------------------
def mesh_info_lines(m) -> list:
    topo = boundary_topology(m)
    fmt = lambda s: "{" + ",".join(str(i) for i in s) + "}"
    return [
        f"V={m.n_vertices} T={m.n_triangles} E={m.n_edges}",
        f"H={topo.n_holes} Ncs={topo.n_cs} I={fmt(topo.index_set)} I*={fmt(topo.reduced_index_set)}",
        f"harmonic dimension {topo.harmonic_dimension}",
    ]


def cmd_mesh(cfg: dict, action: str, path: str, times: int, output: str | None) -> int:
    m = _load_mesh(path)
    if action == "info":
        for line in mesh_info_lines(m):
            print(line)
        return EXIT_OK
    if action == "refine":
        if times < 0:
            raise UsageError("--times must be non-negative")
        new = refine(m, times)
    else:
        new = alfeld_split(m)
    if output is None:
        stem = os.path.splitext(os.path.basename(path))[0]
        output = os.path.join(cfg["out"], f"{stem}_{action}.msh")
    _write(output, header_line(cfg) + "\n" + dump_mesh(new))
    print(f"wrote {output}: T={new.n_triangles}")
    return EXIT_OK


# -- locking demo ----------------------------------------------------------------------------
def cmd_locking(cfg: dict) -> int:
    from .study import run_convergence, run_locking_demo

    ts = _t_values(cfg["t"])
    plain = _study_config(cfg, Scheme("plain", 1, 1))
    plain.t_values = ts
    rep_plain = run_locking_demo(plain)
    ref = _study_config(cfg, Scheme("rt", 2))
    ref.t_values = ts
    rep_rt = run_convergence(ref)
    body = rep_plain.to_csv().split("\n", 1)[1] + "".join(rep_rt.to_csv().split("\n", 2)[2:])
    _write(os.path.join(cfg["out"], "locking.csv"), header_line(cfg) + "\n" + body)
    for t in ts:
        for r in (x for x in rep_plain.rows if x["t"] == t):
            print(f"plain t={t:g} level {r['level']}: |w_h|_1/|w|_1 = {r['w_ratio']:.3e}, total error {r['err_total']:.3e}")
        last = max(r["level"] for r in rep_rt.rows)
        e_rt = rep_rt.get(t, last)["err_total"]
        e_pl = rep_plain.get(t, last)["err_total"]
        print(f"rt2 t={t:g} finest total error {e_rt:.3e} = {e_rt / e_pl:.3f} x plain")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------------
def main(argv=None) -> int:
    from .diagnostics import RankAmbiguityError
    from .linalg import SolverError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        if args.command == "convergence":
            return cmd_convergence(cfg)
        if args.command == "verify":
            return cmd_verify(cfg)
        if args.command == "mesh":
            return cmd_mesh(cfg, args.action, args.path, args.times, args.output)
        return cmd_locking(cfg)
    except (UsageError, ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, RankAmbiguityError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:  # console script
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
