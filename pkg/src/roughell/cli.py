"""Command-line front end: ``roughell {solve,modes,halfspace,vmo,verify} CONFIG``.

Configuration is a YAML mapping::

    coefficients:            # CoefficientFamily keys
      kind: vmo_oscillatory
      delta: 0.2
      epsilon: 0.1
    grid:
      x1: [-4, 4]            # [0, L] for halfspace
      xprime: [[-pi, pi]]    # one periodic interval per x' axis
      sizes: [65, 32]
    lambdas: [4, 16]
    p: [2, 4]
    seeds: [0, 1]
    manufactured: {name: gaussian, width: 1.0}   # or forcing_file: path
    bc: {type: oblique, ell: [1, 0.5], sigma: 0.0}
    solver: {tol: 1.0e-10, maxiter: null, symbols: discrete}
    vmo: {radii: [1, 0.5, 0.25], centers: [5, 5], samples: 1024, replicates: 8}
    verify: {sharp_points: 100, R: 1.0, bump_radius: 2.0}
    output: out

Exit codes: 0 success, 1 solver failure, 2 configuration error.  The
environment variable ``ROUGHELL_OUTPUT_DIR`` overrides ``output``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import scipy
import yaml

from . import __version__
from .coefficients import CoefficientFamily
from .diagnostics import SharpCheckConfig, boundary_grid, sharp_inequality_check
from .grid import BoxGrid, GridFunction, gradient, hessian, load_grid_function, lp_norm, save_grid_function
from .halfspace import Dirichlet, HalfSpaceProblem, Neumann, Oblique, Robin, oblique_estimate_ratio
from .halfspace import solve as solve_halfspace
from .manufactured import MANUFACTURED, forcing
from .modes import SingularSystemError, solve_whole_space_x1
from .vmo import box_centers, vmo_report
from .wholespace import NonConvergenceError, apriori_ratio, solve_problem

log = logging.getLogger(__name__)

SUBCOMMANDS = ("solve", "modes", "halfspace", "vmo", "verify")
OUTPUT_ENV = "ROUGHELL_OUTPUT_DIR"
_BC_TYPES = ("dirichlet", "neumann", "oblique", "robin")
_X1_KINDS = ("constant", "measurable_x1", "checkerboard_x1")
_TOP_KEYS = {"coefficients", "grid", "lambdas", "p", "seeds", "manufactured", "forcing_file", "bc",
             "solver", "vmo", "verify", "output"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


_PI = re.compile(r"^([+-]?[0-9.]*)\s*\*?\s*pi$")


def _number(value, name: str) -> float:
    if isinstance(value, bool):
        raise ConfigError(name, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        m = _PI.match(value.strip())
        if m:
            k = m.group(1)
            k = 1.0 if k in ("", "+") else -1.0 if k == "-" else float(k)
            return k * np.pi
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(name, f"expected a number, got {value!r}")


def _numbers(value, name: str) -> list[float]:
    if not isinstance(value, (list, tuple)):
        value = [value]
    if not value:
        raise ConfigError(name, "must not be empty")
    return [_number(v, f"{name}[{i}]") for i, v in enumerate(value)]


@dataclass
class ExperimentConfig:
    family: CoefficientFamily
    grid: BoxGrid
    lambdas: list
    p: list
    seeds: list
    manufactured: Optional[dict]
    forcing_file: Optional[str]
    bc: dict
    solver: dict
    vmo: dict
    verify: dict
    output: str
    raw: dict = field(repr=False)

    @property
    def digest(self) -> str:
        canon = json.dumps(self.raw, sort_keys=True, default=str).encode()
        return hashlib.sha256(canon).hexdigest()


def parse_config(raw: Any, subcommand: str) -> ExperimentConfig:
    """Validate a parsed YAML mapping; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if "coefficients" not in raw:
        raise ConfigError("coefficients", "missing")
    try:
        family = CoefficientFamily.from_config(dict(raw["coefficients"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError("coefficients", str(exc)) from None
    if subcommand == "modes" and family.kind not in _X1_KINDS:
        raise ConfigError("coefficients.kind", f"modes needs x^1-only coefficients {_X1_KINDS}")

    g = raw.get("grid")
    if not isinstance(g, dict):
        raise ConfigError("grid", "missing or not a mapping")
    x1 = _numbers(g.get("x1"), "grid.x1")
    xprime = g.get("xprime")
    if not isinstance(xprime, list) or len(xprime) != family.dim - 1:
        raise ConfigError("grid.xprime", f"need {family.dim - 1} periodic intervals")
    xp = [tuple(_numbers(e, f"grid.xprime[{i}]")) for i, e in enumerate(xprime)]
    sizes = g.get("sizes")
    if not isinstance(sizes, list) or len(sizes) != family.dim or not all(
            isinstance(n, int) and not isinstance(n, bool) and n >= 4 for n in sizes):
        raise ConfigError("grid.sizes", f"need {family.dim} integers >= 4")
    if len(x1) != 2 or any(len(e) != 2 for e in xp):
        raise ConfigError("grid", "intervals need two end points")
    if subcommand == "halfspace" and x1[0] != 0.0:
        raise ConfigError("grid.x1", "half-space problems need x1 = [0, L]")
    try:
        grid = BoxGrid.whole_space(tuple(x1), xp, tuple(sizes))
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None

    lambdas = _numbers(raw.get("lambdas", [1.0]), "lambdas")
    if any(lam <= 0 for lam in lambdas) and subcommand != "vmo":
        raise ConfigError("lambdas", "must be positive")
    ps = _numbers(raw.get("p", [2.0]), "p")
    for i, p in enumerate(ps):
        if not p >= 1:
            raise ConfigError("p", f"exponent {p} at index {i} must be >= 1")
    seeds = raw.get("seeds", [family.seed])
    if not isinstance(seeds, list) or not seeds or not all(
            isinstance(s, int) and not isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds", "need a nonempty list of integers")

    man = raw.get("manufactured")
    if isinstance(man, str):
        man = {"name": man}
    if man is not None:
        if not isinstance(man, dict) or man.get("name") not in MANUFACTURED:
            raise ConfigError("manufactured.name", f"choose one of {sorted(MANUFACTURED)}")
    ffile = raw.get("forcing_file")
    if man is None and ffile is None and subcommand in ("solve", "modes", "halfspace", "verify"):
        man = {"name": "gaussian"}
    if man is not None and ffile is not None:
        raise ConfigError("forcing_file", "give either manufactured or forcing_file")

    bc = dict(raw.get("bc") or {"type": "dirichlet"})
    if bc.get("type") not in _BC_TYPES:
        raise ConfigError("bc.type", f"choose one of {_BC_TYPES}")
    if bc["type"] in ("oblique", "robin"):
        ell = _numbers(bc.get("ell", [1.0] + [0.0] * (family.dim - 1)), "bc.ell")
        if len(ell) != family.dim or not ell[0] > 0:
            raise ConfigError("bc.ell", "need d entries with a positive first entry")
        bc["ell"] = ell
    bc["sigma"] = _number(bc.get("sigma", 0.0), "bc.sigma")

    solver = {"tol": 1e-10, "maxiter": None, "symbols": "discrete"}
    solver.update(raw.get("solver") or {})
    solver["tol"] = _number(solver["tol"], "solver.tol")
    if not solver["tol"] > 0:
        raise ConfigError("solver.tol", "must be positive")
    if solver["symbols"] not in ("discrete", "exact"):
        raise ConfigError("solver.symbols", "choose discrete or exact")

    vmo = {"radii": [1.0, 0.5, 0.25, 0.125], "centers": [5] * family.dim, "samples": 1024, "replicates": 8}
    vmo.update(raw.get("vmo") or {})
    vmo["radii"] = _numbers(vmo["radii"], "vmo.radii")
    if any(r <= 0 for r in vmo["radii"]):
        raise ConfigError("vmo.radii", "must be positive")
    if not isinstance(vmo["samples"], int) or vmo["samples"] < 64:
        raise ConfigError("vmo.samples", "need an integer >= 64")

    verify = {"sharp_points": 100, "R": 1.0, "bump_radius": None}
    verify.update(raw.get("verify") or {})
    if not isinstance(verify["sharp_points"], int) or verify["sharp_points"] < 1:
        raise ConfigError("verify.sharp_points", "need a positive integer")
    verify["R"] = _number(verify["R"], "verify.R")

    output = raw.get("output", "out")
    if not isinstance(output, str):
        raise ConfigError("output", "expected a path")
    return ExperimentConfig(family, grid, lambdas, ps, seeds, man, ffile, bc, solver, vmo, verify,
                            output, raw)


def load_config(path, subcommand: str) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config", f"file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"YAML parse error: {exc}") from None
    return parse_config(raw, subcommand)


# ---------------------------------------------------------------------------
# tasks (top level so that they can run in worker processes)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _grid_label(grid: BoxGrid) -> str:
    return "x".join(str(n) for n in grid.sizes)


def _manufactured(cfg: ExperimentConfig):
    spec = dict(cfg.manufactured)
    name = spec.pop("name")
    return MANUFACTURED[name](**spec)


def _forcing(cfg: ExperimentConfig, op, lam: float, grid: BoxGrid):
    if cfg.forcing_file is not None:
        f = load_grid_function(cfg.forcing_file)
        if f.grid != grid:
            raise ConfigError("forcing_file", "grid does not match the configured grid")
        return f, None
    u = _manufactured(cfg)
    return grid.sample(forcing(op, u, lam)), u


def _norms(u: GridFunction, p: float) -> tuple[float, float, float]:
    return lp_norm(u, p), lp_norm(gradient(u), p), lp_norm(hessian(u), p)


def _task_solve(cfg: ExperimentConfig, seed: int, lam: float, out: Path):
    op = cfg.family.with_seed(seed).draw()
    f, exact = _forcing(cfg, op, lam, cfg.grid)
    res = solve_problem(op, f, lam, tol=cfg.solver["tol"], maxiter=cfg.solver["maxiter"])
    save_grid_function(out / f"solution_seed{seed}_lam{lam:g}.rgh", res.u)
    err = float(np.abs(res.u.values - exact.sample(cfg.grid).values).max()) if exact else float("nan")
    rows = []
    for p in cfg.p:
        nu, nux, nuxx = _norms(res.u, p)
        rows.append([cfg.family.kind, seed, p, lam, _grid_label(cfg.grid), apriori_ratio(res.u, f, lam, p),
                     res.residual, res.iterations, nu, nux, nuxx, lp_norm(f, p), err])
    return rows


_SOLVE_HEADER = ["family", "seed", "p", "lambda", "grid", "rho", "residual", "iterations",
                 "norm_u", "norm_ux", "norm_uxx", "norm_f", "max_error"]


def _task_modes(cfg: ExperimentConfig, seed: int, lam: float, out: Path):
    op = cfg.family.with_seed(seed).draw()
    f, _ = _forcing(cfg, op, lam, cfg.grid)
    sol = solve_whole_space_x1(op, f, lam, symbols=cfg.solver["symbols"], energy=True)
    save_grid_function(out / f"modes_seed{seed}_lam{lam:g}.rgh", sol.u)
    rows = []
    for m in range(sol.xi.shape[1]):
        rows.append([seed, lam, m] + [float(x) for x in sol.xi[:, m]]
                    + [float(sol.mode_residuals[m]), float(sol.energy[m, 0]), float(sol.energy[m, 1])])
    return rows


def _modes_header(d: int):
    return ["seed", "lambda", "mode"] + [f"xi{j}" for j in range(2, d + 1)] + ["residual", "N1_emp", "N2_emp"]


def _bc_object(cfg: ExperimentConfig, grid: BoxGrid, exact):
    kind = cfg.bc["type"]
    if kind == "dirichlet":
        return Dirichlet()
    if kind == "neumann":
        return Neumann()
    ell = np.asarray(cfg.bc["ell"])
    gb = boundary_grid(grid)
    if exact is None:
        g = gb.zeros()
    else:
        wall = np.concatenate([np.zeros((1,) + gb.shape), gb.coords()])
        vals = np.einsum("j,j...->...", ell, exact.grad(wall))
        if kind == "robin":
            vals = vals + cfg.bc["sigma"] * exact.value(wall)
        g = GridFunction(gb, vals)
    if kind == "oblique":
        return Oblique(tuple(ell), g)
    return Robin(tuple(ell), cfg.bc["sigma"], g)


def _task_halfspace(cfg: ExperimentConfig, seed: int, lam: float, out: Path):
    op = cfg.family.with_seed(seed).draw()
    grid = cfg.grid
    f, exact = _forcing(cfg, op, lam, grid)
    bc = _bc_object(cfg, grid, exact)
    prob = HalfSpaceProblem(op, f, bc, lam)
    rows = []
    for p in cfg.p:
        sol = solve_halfspace(prob, tol=cfg.solver["tol"], maxiter=cfg.solver["maxiter"], p_exp=p)
        d = sol.diagnostics
        if isinstance(bc, Dirichlet):
            bres = d["trace"]
        elif isinstance(bc, Neumann):
            bres = d["wall_derivative"]
        else:
            bres = d["boundary_residual"]
        g = prob.bc.g if isinstance(bc, (Oblique, Robin)) else boundary_grid(grid).zeros()
        rho = oblique_estimate_ratio(sol.u, f, g, lam, p)
        nu, nux, nuxx = _norms(sol.u, p)
        err = float(np.abs(sol.u.values - exact.sample(grid).values).max()) if exact else float("nan")
        rows.append([cfg.bc["type"], cfg.family.kind, seed, p, lam, _grid_label(grid), bres,
                     d.get("symmetry_defect", float("nan")), d.get("mirror_defect", float("nan")), rho,
                     sol.residual, sol.iterations, nu, nux, nuxx, err])
    save_grid_function(out / f"halfspace_{cfg.bc['type']}_seed{seed}_lam{lam:g}.rgh", sol.u)
    return rows


_HALFSPACE_HEADER = ["bc", "family", "seed", "p", "lambda", "grid", "boundary_residual", "symmetry_defect",
                     "mirror_defect", "rho", "residual", "iterations", "norm_u", "norm_ux", "norm_uxx",
                     "max_error"]


def _task_vmo(cfg: ExperimentConfig, seed: int, lam: float, out: Path):
    op = cfg.family.with_seed(seed).draw()
    centers = box_centers(cfg.grid.extents, cfg.vmo["centers"])
    rep = vmo_report(op, cfg.vmo["radii"], centers, samples=cfg.vmo["samples"], seed=seed,
                     replicates=cfg.vmo["replicates"])
    return [list(r) for r in rep.rows()]


def _task_verify(cfg: ExperimentConfig, seed: int, lam: float, out: Path):
    op = cfg.family.with_seed(seed).draw()
    grid = cfg.grid
    f, _ = _forcing(cfg, op, lam, grid)
    res = solve_problem(op, f, lam, tol=cfg.solver["tol"], maxiter=cfg.solver["maxiter"])
    width = min(hi - lo for lo, hi in grid.extents)
    radius = cfg.verify["bump_radius"] or 0.4 * width
    test = MANUFACTURED["bump"](radius=radius).sample(grid)
    rows = []
    for p in cfg.p:
        sc = SharpCheckConfig.sampled(grid, cfg.verify["R"], p, cfg.verify["sharp_points"], seed=seed)
        chk = sharp_inequality_check(test, op.principal(), sc)
        rows.append([cfg.family.kind, seed, p, lam, _grid_label(grid), apriori_ratio(res.u, f, lam, p), chk.N])
    return rows


_VERIFY_HEADER = ["family", "seed", "p", "lambda", "grid", "rho", "N_emp"]

_TASKS = {
    "solve": (_task_solve, lambda cfg: _SOLVE_HEADER, "solve.csv"),
    "modes": (_task_modes, lambda cfg: _modes_header(cfg.family.dim), "modes.csv"),
    "halfspace": (_task_halfspace, lambda cfg: _HALFSPACE_HEADER, "halfspace.csv"),
    "vmo": (_task_vmo, lambda cfg: ["R", "modulus", "stderr", "omega_fit"], "vmo.csv"),
    "verify": (_task_verify, lambda cfg: _VERIFY_HEADER, "estimate_report.csv"),
}


def _run_one(args):
    name, cfg, seed, lam, out = args
    t0 = time.perf_counter()
    rows = _TASKS[name][0](cfg, seed, lam, out)
    return rows, time.perf_counter() - t0


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


# ---------------------------------------------------------------------------
# entry points


def run(subcommand: str, config_path, workers: int | None = None, output: str | None = None,
        bc: str | None = None) -> int:
    """Run one subcommand; returns the process exit code."""
    if subcommand not in SUBCOMMANDS:
        print(f"error: unknown subcommand {subcommand!r}", file=sys.stderr)
        return 2
    try:
        cfg = load_config(config_path, subcommand)
        if bc is not None:
            if bc not in _BC_TYPES:
                raise ConfigError("bc.type", f"choose one of {_BC_TYPES}")
            cfg.bc["type"] = bc
            if bc in ("oblique", "robin") and "ell" not in cfg.bc:
                cfg.bc["ell"] = [1.0] + [0.0] * (cfg.family.dim - 1)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(output or os.environ.get(OUTPUT_ENV) or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    fn, header, fname = _TASKS[subcommand]
    lambdas = [0.0] if subcommand == "vmo" else cfg.lambdas
    jobs = [(subcommand, cfg, seed, lam, out) for seed in cfg.seeds for lam in lambdas]
    workers = workers or os.cpu_count() or 1
    manifest = {
        "subcommand": subcommand,
        "config": str(config_path),
        "config_sha256": cfg.digest,
        "versions": {"roughell": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__, "pyyaml": yaml.__version__},
        "workers": workers,
        "status": "ok",
        "timings": {},
    }
    t0 = time.perf_counter()
    code = 0
    rows: list = []
    try:
        if workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                results = list(pool.map(_run_one, jobs))
        else:
            results = [_run_one(j) for j in jobs]
        for (name, _, seed, lam, _), (r, dt) in zip(jobs, results):
            if subcommand == "vmo" and len(cfg.seeds) > 1:
                r = [[seed] + row for row in r]
            rows.extend(r)
            manifest["timings"][f"seed={seed},lambda={lam:g}"] = dt
        if subcommand == "vmo" and len(cfg.seeds) > 1:
            header_row = ["seed"] + header(cfg)
        else:
            header_row = header(cfg)
        _write_csv(out / fname, header_row, rows)
        manifest["outputs"] = sorted(p.name for p in out.iterdir() if p.name != "manifest.json")
        manifest["rows"] = len(rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        manifest.update(status="config_error", message=str(exc))
        code = 2
    except NonConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        manifest.update(status="nonconvergence", residual=exc.residual, iterations=exc.iterations,
                        message=str(exc))
        code = 1
    except (SingularSystemError, ArithmeticError, ValueError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        manifest.update(status="failure", message=str(exc))
        code = 1
    manifest["timings"]["total"] = time.perf_counter() - t0
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roughell", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("config", help="YAML experiment configuration")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: CPU count)")
        sp.add_argument("--output", default=None, help="output directory")
        if name == "halfspace":
            sp.add_argument("--bc", choices=_BC_TYPES, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(args.subcommand, args.config, workers=args.workers, output=args.output,
               bc=getattr(args, "bc", None))


if __name__ == "__main__":
    sys.exit(main())
