"""Command-line front end: ``solve``, ``sweep`` and ``partition-info``.

Settings come from an optional flat ``key=value`` config file; command
line flags override file values. Exit codes: 0 converged, 2 not
converged (or diverged), 1 configuration or I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import itertools
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .band import build_band
from .errors import CPSchwarzError, ConfigError, Diverged
from .geometry import load_mesh, make_surface
from .linalg import gmres
from .operators import EXACT_SOLUTIONS, RHS_PRESETS, assemble_operators, sample_rhs
from .partition import build_graph, edge_cut, export_partition, import_partition, partition_band
from .schwarz import BlockJacobi, SchwarzPreconditioner, schwarz_solve
from .subdomain import TransmissionCondition, build_subdomains, grow_subdomain

log = logging.getLogger("cpschwarz")

MODES = ("stationary", "gmres-preconditioned", "block-jacobi-gmres")
SURFACES = ("circle", "sphere", "torus", "mesh")


@dataclass
class RunConfig:
    surface: str = "circle"
    mesh: str | None = None
    scale_height: float | None = None
    radius: float = 1.0
    major: float = 1.0
    minor: float = 0.5
    dx: float = 0.1
    degree: int = 2
    c: float = 1.0
    rhs: str | None = None
    nsub: int = 4
    noverlap: int = 4
    tc: str = "dirichlet"
    alpha: float | None = None
    mode: str = "stationary"
    rtol: float = 1e-6
    max_iter: int = 1000
    restart: int = 30
    seed: int = 0
    threads: int = 1
    out: str = "out"
    partition_file: str | None = None
    seed_points: str | None = None
    subdomain: int = 0

    def validate(self):
        """Check every constraint before any allocation happens."""
        if self.surface not in SURFACES:
            raise ConfigError(f"surface must be one of {', '.join(SURFACES)}")
        if self.surface == "mesh" and not self.mesh:
            raise ConfigError("surface=mesh needs a mesh path (--mesh)")
        if not self.dx > 0:
            raise ConfigError("dx must be > 0")
        if not self.c > 0:
            raise ConfigError("c must be > 0")
        if self.degree < 1:
            raise ConfigError("degree must be >= 1")
        if self.nsub < 1:
            raise ConfigError("nsub must be >= 1")
        if self.noverlap < 1:
            raise ConfigError("noverlap must be >= 1")
        if self.tc not in ("dirichlet", "robin"):
            raise ConfigError("tc must be 'dirichlet' or 'robin'")
        if self.tc == "robin":
            if self.alpha is None or not self.alpha > 0:
                raise ConfigError("alpha must be > 0 for Robin transmission conditions")
            if self.noverlap < 2:
                raise ConfigError("noverlap must be >= 2 for Robin transmission conditions")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        if not 0 < self.rtol < 1:
            raise ConfigError("rtol must lie in (0, 1)")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.rhs is not None and self.rhs not in RHS_PRESETS:
            raise ConfigError(f"rhs must be one of {', '.join(RHS_PRESETS)}")
        return self

    @property
    def transmission(self):
        if self.tc == "robin":
            return TransmissionCondition.robin(self.alpha)
        return TransmissionCondition.dirichlet()

    def rhs_name(self):
        if self.rhs:
            return self.rhs
        return {"circle": "eigen-circle", "sphere": "eigen-sphere"}.get(self.surface, "bunny-spherical")

    def to_dict(self):
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_SWEEP_KEYS = ("nsub", "noverlap", "alpha")


def _convert(key, value):
    f = _FIELDS[key]
    kind = str(f.type)
    if value is None or (isinstance(value, str) and value.lower() in ("", "none")):
        return None
    if "int" in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return str(value)


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment. Keys may use dashes."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def _parse_list(key, text):
    try:
        return [_convert(key, v.strip()) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None


def build_config(values, sweep=False):
    """RunConfig from raw string values; with ``sweep`` the list keys stay lists."""
    scalars, lists = {}, {}
    for key, value in values.items():
        if sweep and key in _SWEEP_KEYS and value is not None:
            lists[key] = _parse_list(key, value)
            if not lists[key]:
                raise ConfigError(f"sweep list for {key} is empty")
            continue
        try:
            scalars[key] = _convert(key, value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return RunConfig(**scalars), lists


def parse_seed_points(text):
    if not text:
        return None
    try:
        pts = [[float(v) for v in p.split(",")] for p in text.split(";") if p.strip()]
        return np.array(pts, dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse seed points {text!r}; use 'x,y[,z];x,y[,z]'") from None


def make_run_surface(cfg):
    if cfg.surface == "mesh":
        try:
            return load_mesh(cfg.mesh, scale_height=cfg.scale_height, center=True)
        except OSError as exc:
            raise ConfigError(f"cannot read mesh {cfg.mesh}: {exc}") from None
    if cfg.surface == "torus":
        return make_surface("torus", major=cfg.major, minor=cfg.minor)
    return make_surface(cfg.surface, radius=cfg.radius)


@dataclass
class Problem:
    config: RunConfig
    surface: object
    band: object
    operators: object
    rhs: np.ndarray
    timings: dict = field(default_factory=dict)

    @property
    def n_active(self):
        return self.band.n_active


def setup_problem(cfg):
    """Surface, band, global operators and right-hand side."""
    t = {}
    t0 = time.perf_counter()
    surface = make_run_surface(cfg)
    seeds = parse_seed_points(cfg.seed_points)
    band = build_band(surface, cfg.dx, cfg.degree, seeds=seeds)
    t["band"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    ops = assemble_operators(band, cfg.c)
    f = sample_rhs(band, RHS_PRESETS[cfg.rhs_name()](cfg.c))
    t["assembly"] = time.perf_counter() - t0
    return Problem(cfg, surface, band, ops, f, t)


def make_partition(problem, nsub):
    cfg = problem.config
    if cfg.partition_file:
        try:
            return import_partition(cfg.partition_file, n_nodes=problem.n_active, n_parts=nsub)
        except OSError as exc:
            raise ConfigError(f"cannot read partition file {cfg.partition_file}: {exc}") from None
    return partition_band(problem.band, nsub, seed=cfg.seed)


def run_solver(problem, cfg):
    """One solve for ``cfg`` on an already assembled problem: (u, report, timings)."""
    t = {}
    A, f = problem.operators.helmholtz, problem.rhs
    t0 = time.perf_counter()
    part = make_partition(problem, cfg.nsub)
    t["partition"] = time.perf_counter() - t0
    echo = cfg.to_dict()
    t0 = time.perf_counter()
    if cfg.mode == "block-jacobi-gmres":
        M = BlockJacobi(A, part)
        t["subdomains"] = time.perf_counter() - t0
        u, report = gmres(A, f, M=M, rtol=cfg.rtol, restart=cfg.restart, max_iter=cfg.max_iter)
        report.config.update(echo)
        return u, report, t
    subs = build_subdomains(problem.band, problem.operators.extension, part, cfg.noverlap,
                            cfg.transmission, cfg.c, threads=cfg.threads)
    t["subdomains"] = time.perf_counter() - t0
    if cfg.mode == "stationary":
        u, report = schwarz_solve(A, f, subs, rtol=cfg.rtol, max_iter=cfg.max_iter,
                                  threads=cfg.threads, config=echo)
        return u, report, t
    M = SchwarzPreconditioner(subs, problem.n_active, threads=cfg.threads)
    try:
        u, report = gmres(A, f, M=M, rtol=cfg.rtol, restart=cfg.restart, max_iter=cfg.max_iter)
    finally:
        M.close()
    report.config.update(echo)
    return u, report, t


def _config_comment(cfg):
    return "# " + " ".join(f"{k}={v}" for k, v in cfg.to_dict().items())


def write_solution(path, problem, u):
    band = problem.band
    axes = "xyz"[: band.dim]
    with open(path, "w", newline="") as fh:
        fh.write(_config_comment(problem.config) + "\n")
        w = csv.writer(fh)
        w.writerow(list(axes) + ["u"])
        for p, val in zip(band.cp[: band.n_active], u):
            w.writerow([repr(float(x)) for x in p] + [repr(float(val))])


def write_residuals(path, cfg, report):
    with open(path, "w") as fh:
        fh.write(_config_comment(cfg) + "\n")
    r0 = report.initial_residual
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "residual_2norm", "relative_residual"])
        for k, r in enumerate(report.residual_history):
            w.writerow([k, repr(float(r)), repr(float(r / r0 if r0 > 0 else 0.0))])


def _exact_error(problem, u):
    """Max nodal error for the eigenfunction presets on their own unit surface."""
    cfg = problem.config
    name = cfg.rhs_name()
    if EXACT_SOLUTIONS.get(name) is None or name != f"eigen-{cfg.surface}" or cfg.radius != 1.0:
        return None
    ref = EXACT_SOLUTIONS[name](problem.band.cp[: problem.n_active])
    return float(np.max(np.abs(u - ref)))


def cmd_solve(cfg):
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = setup_problem(cfg)
    status = 0
    try:
        u, report, t = run_solver(problem, cfg)
    except Diverged as exc:
        log.error("%s", exc)
        report, u, t = exc.report, None, {}
        status = 2
    timings = dict(problem.timings, **t, solve=report.wall_time)
    summary = {
        "version": __version__,
        "n_active": problem.n_active,
        "n_ghost": problem.band.n_ghost,
        "iterations": report.iterations,
        "converged": bool(report.converged),
        "status": report.status,
        "initial_residual": report.initial_residual,
        "final_residual": report.final_residual,
        "relative_residual": report.relative_residual,
        "timings": timings,
        "config": cfg.to_dict(),
    }
    if u is not None:
        write_solution(out / "solution.csv", problem, u)
        err = _exact_error(problem, u)
        if err is not None:
            summary["max_error"] = err
    write_residuals(out / "residuals.csv", cfg, report)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"N_A={problem.n_active} N_G={problem.band.n_ghost} mode={cfg.mode} tc={cfg.transmission} "
          f"iterations={report.iterations} converged={report.converged} "
          f"relative_residual={report.relative_residual:.3e}")
    if status == 0 and not report.converged:
        status = 2
    return status


SWEEP_COLUMNS = ["nsub", "noverlap", "alpha", "tc", "mode", "iterations", "converged", "status",
                 "relative_residual", "wall_time"]


def cmd_sweep(cfg, lists):
    """Cartesian product over nsub, noverlap and alpha; one CSV row per run."""
    grid = {
        "nsub": lists.get("nsub", [cfg.nsub]),
        "noverlap": lists.get("noverlap", [cfg.noverlap]),
        "alpha": lists.get("alpha", [cfg.alpha]),
    }
    runs = []
    for ns, no, a in itertools.product(grid["nsub"], grid["noverlap"], grid["alpha"]):
        runs.append(dataclasses.replace(cfg, nsub=ns, noverlap=no, alpha=a))
    for run in runs:
        run.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = setup_problem(cfg)
    rows = []
    for run in runs:
        row = {"nsub": run.nsub, "noverlap": run.noverlap, "alpha": run.alpha, "tc": run.tc, "mode": run.mode}
        try:
            _, report, _ = run_solver(problem, run)
            row.update(iterations=report.iterations, converged=bool(report.converged), status=report.status,
                       relative_residual=report.relative_residual, wall_time=report.wall_time)
        except Diverged as exc:
            r = exc.report
            row.update(iterations=r.iterations, converged=False, status="diverged",
                       relative_residual=r.relative_residual, wall_time=r.wall_time)
        except CPSchwarzError as exc:
            log.error("run %s failed: %s", row, exc)
            row.update(iterations="", converged=False, status=f"error: {type(exc).__name__}",
                       relative_residual="", wall_time="")
        rows.append(row)
        print(", ".join(f"{k}={row[k]}" for k in ("nsub", "noverlap", "alpha", "tc", "iterations", "converged")))
    with open(out / "sweep.csv", "w", newline="") as fh:
        fh.write(_config_comment(cfg) + "\n")
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        w.writeheader()
        w.writerows(rows)
    summary = {"version": __version__, "n_active": problem.n_active, "n_ghost": problem.band.n_ghost,
               "runs": rows, "config": cfg.to_dict(), "sweep": grid}
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0 if all(r["converged"] for r in rows) else 2


def cmd_partition_info(cfg):
    cfg.validate()
    if not 0 <= cfg.subdomain < cfg.nsub:
        raise ConfigError(f"subdomain must lie in 0..{cfg.nsub - 1}")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    problem = setup_problem(cfg)
    band = problem.band
    part = make_partition(problem, cfg.nsub)
    graph = build_graph(band)
    cut = edge_cut(graph, part.labels)
    axes = "xyz"[: band.dim]
    with open(out / "partition.csv", "w", newline="") as fh:
        fh.write(_config_comment(cfg) + "\n")
        w = csv.writer(fh)
        w.writerow(["node"] + list(axes) + [f"cp_{a}" for a in axes] + ["label"])
        for i in range(band.n_active):
            w.writerow([i] + band.points[i].tolist() + band.cp[i].tolist() + [int(part.labels[i])])
    export_partition(out / "labels.txt", part)
    sizes = part.sizes()
    if cfg.nsub > 1:
        sub = grow_subdomain(band, part, cfg.subdomain, cfg.noverlap, cfg.transmission)
        sub.write_diagnostics(out / "roles.csv", band)
    info = {"n_active": band.n_active, "n_ghost": band.n_ghost, "nsub": cfg.nsub,
            "sizes": sizes.tolist(), "balance": part.balance(), "edge_cut": cut,
            "config": cfg.to_dict()}
    (out / "summary.json").write_text(json.dumps(info, indent=2) + "\n")
    print(f"N_A={band.n_active} N_G={band.n_ghost} parts={cfg.nsub} "
          f"sizes min={sizes.min()} max={sizes.max()} balance={part.balance():.3f} edge_cut={cut}")
    return 0


def _add_common(p, sweep=False):
    p.add_argument("--config", help="flat key=value file; flags override its values")
    p.add_argument("--surface", choices=SURFACES)
    p.add_argument("--mesh", help="OFF or OBJ triangle mesh (with --surface mesh)")
    p.add_argument("--scale-height", help="rescale the mesh to this height along y")
    p.add_argument("--radius")
    p.add_argument("--major")
    p.add_argument("--minor")
    p.add_argument("--dx")
    p.add_argument("--degree")
    p.add_argument("--c")
    p.add_argument("--rhs", choices=sorted(RHS_PRESETS))
    lst = " (comma-separated list)" if sweep else ""
    p.add_argument("--nsub", help="number of subdomains" + lst)
    p.add_argument("--noverlap", help="overlap layers" + lst)
    p.add_argument("--tc", choices=("dirichlet", "robin"))
    p.add_argument("--alpha", help="Robin weight" + lst)
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--rtol")
    p.add_argument("--max-iter")
    p.add_argument("--restart")
    p.add_argument("--seed")
    p.add_argument("--threads")
    p.add_argument("--out")
    p.add_argument("--partition-file")
    p.add_argument("--seed-points", help="flood fill seeds, 'x,y[,z];x,y[,z]'")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser():
    parser = argparse.ArgumentParser(prog="cpschwarz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("solve", help="assemble and solve one problem"))
    _add_common(sub.add_parser("sweep", help="iteration counts over nsub/noverlap/alpha lists"), sweep=True)
    p = sub.add_parser("partition-info", help="partition statistics and node-role CSVs")
    _add_common(p)
    p.add_argument("--subdomain", help="subdomain whose node roles go to roles.csv")
    return parser


def gather_values(args):
    values = read_config_file(args.config) if args.config else {}
    for key in _FIELDS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    return values


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = gather_values(args)
        if args.command == "sweep":
            cfg, lists = build_config(values, sweep=True)
            return cmd_sweep(cfg, lists)
        cfg, _ = build_config(values)
        if args.command == "solve":
            return cmd_solve(cfg)
        return cmd_partition_info(cfg)
    except (CPSchwarzError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
