"""Command-line front end.

Exit codes: 0 success, 2 bad input, 3 solver failure, 4 failed verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import examples
from .analysis import DEFAULT_GRID, PARADOX_MODES, autonomy_bound_check, pick_solver, solve_point, sweep_alpha
from .delay import FlowVector
from .errors import (
    DomainError, HeterogeneityError, InfeasibleFlowError, NetworkInputError, RoutingError,
)
from .mixed_eq import equilibrium_set, solve_mixed_homogeneous, verify_equilibrium
from .network import DEFAULT_MAX_PATHS, DemandSpec, Network, PathSet, enumerate_paths, path_label, read_network

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

SOLVER_CHOICES = ("homogeneous", "support-enum", "single-class")
COMMANDS = ("solve", "sweep", "verify", "bound", "paths")


class UsageError(Exception):
    """Bad command-line value; reported with exit code 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    input: str
    output: str | None = None
    solver: str | None = None
    tol: float | None = None
    grid: int = DEFAULT_GRID
    points: tuple[float, ...] | None = None
    od: int | None = None
    paradox: str = "strong"
    alpha_override: float | None = None
    flows: str | None = None
    max_paths: int = DEFAULT_MAX_PATHS

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise UsageError(f"--tol must be positive, got {self.tol}")
        if self.grid < 1:
            raise UsageError(f"--grid must be at least 1, got {self.grid}")
        if self.points is not None and any(not 0.0 <= p <= 1.0 for p in self.points):
            raise UsageError("--points values must lie in [0, 1]")
        if self.alpha_override is not None and not 0.0 <= self.alpha_override <= 1.0:
            raise UsageError(f"--alpha-override must be in [0, 1], got {self.alpha_override}")
        if self.paradox not in PARADOX_MODES:
            raise UsageError(f"--paradox must be one of {PARADOX_MODES}")
        if self.max_paths < 1:
            raise UsageError("--max-paths must be positive")

    @property
    def grid_values(self) -> list[float]:
        if self.points is not None:
            return list(self.points)
        if self.grid == 1:
            return [0.0]
        return [float(v) for v in np.linspace(0.0, 1.0, self.grid)]


def _load(cfg: RunConfig) -> tuple[Network, DemandSpec, PathSet]:
    source = Path(cfg.input)
    if not source.exists() and source.stem in examples.NAMES and source.parent == Path("."):
        net, demand = examples.load_example(source.stem)
    else:
        net, demand = read_network(source)
    if cfg.alpha_override is not None:
        demand = demand.with_alphas([cfg.alpha_override] * len(demand))
    if cfg.od is not None and not 0 <= cfg.od < len(demand):
        raise UsageError(f"--od {cfg.od}: network has {len(demand)} O/D pairs")
    return net, demand, enumerate_paths(net, cfg.max_paths)


def _num(x) -> float:
    return float(x)


def _witness_table(net: Network, paths: PathSet, f: FlowVector) -> list[dict]:
    rows = []
    for p, path in enumerate(paths.paths):
        rows.append({
            "od": int(paths.od_of_path[p]),
            "path": [net.links[l].id for l in path],
            "nodes": path_label(net, path),
            "regular": _num(f.regular[p]),
            "autonomous": _num(f.autonomous[p]),
        })
    return rows


def cmd_solve(cfg: RunConfig) -> tuple[int, str]:
    net, demand, paths = _load(cfg)
    solver = pick_solver(net, demand, cfg.solver)
    out = {"solver": solver.replace("_", "-"), "alphas": list(demand.alphas)}
    code = EXIT_OK
    if solver == "support_enum":
        kw = {} if cfg.tol is None else {"tol": cfg.tol}
        es = equilibrium_set(net, demand, paths, link_ranges=True, od_ranges=True, **kw)
        out.update({
            "converged": True,
            "J_min": _num(es.J_min),
            "J_max": _num(es.J_max),
            "e_w": [[_num(lo), _num(hi)] for lo, hi in zip(es.od_min, es.od_max)],
            "link_flow_ranges": [
                {"id": link.id, "min": _num(lo), "max": _num(hi)}
                for link, lo, hi in zip(net.links, es.link_min, es.link_max)
            ],
            "witness": _witness_table(net, paths, es.witness_min),
            "witness_J_max": _witness_table(net, paths, es.witness_max),
        })
    elif solver == "homogeneous":
        kw = {} if cfg.tol is None else {"tol": cfg.tol}
        sol = solve_mixed_homogeneous(net, demand, paths, **kw)
        out.update({
            "converged": sol.converged,
            "J_min": _num(sol.J),
            "J_max": _num(sol.J),
            "e_w": [[_num(e), _num(e)] for e in sol.od_delays],
            "witness": _witness_table(net, paths, sol.witness),
        })
        if not sol.converged:
            code = EXIT_SOLVER
    else:
        point = solve_point(net, demand, paths, solver, cfg.tol)
        out.update({
            "converged": point.converged,
            "J_min": _num(point.J_min),
            "J_max": _num(point.J_max),
            "e_w": [[_num(lo), _num(hi)] for lo, hi in zip(point.e_min, point.e_max)],
        })
        if not point.converged:
            code = EXIT_SOLVER
    return code, json.dumps(out, indent=2) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def cmd_sweep(cfg: RunConfig) -> tuple[int, str]:
    net, demand, paths = _load(cfg)
    result = sweep_alpha(net, demand, cfg.grid_values, od=cfg.od, solver=cfg.solver,
                         mode=cfg.paradox, paths=paths, solver_tol=cfg.tol)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["alpha", "J_min", "J_max", "paradox_flag"])
    for s in result.samples:
        writer.writerow([_fmt(s.alpha), _fmt(s.J_min), _fmt(s.J_max), "true" if s.paradox else "false"])
    code = EXIT_OK if all(s.point.converged for s in result.samples) else EXIT_SOLVER
    return code, buf.getvalue()


def read_flows(path: str | Path, paths: PathSet) -> FlowVector:
    """Path flows from a JSON file.

    Accepts ``{"witness": [{"regular": .., "autonomous": ..}, ...]}`` (the
    table written by ``solve``), ``{"flows": [[reg, aut], ...]}`` or a bare
    list of either form, one entry per enumerated path in canonical order.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise NetworkInputError(f"cannot read flow file {path}: {exc}") from None
    if isinstance(doc, dict):
        rows = doc.get("witness", doc.get("flows"))
    else:
        rows = doc
    if not isinstance(rows, list):
        raise NetworkInputError("flow file: expected a 'witness' or 'flows' list")
    if len(rows) != paths.n_paths:
        raise NetworkInputError(f"flow file: {len(rows)} entries, network has {paths.n_paths} paths")
    reg, aut = [], []
    for k, row in enumerate(rows):
        try:
            if isinstance(row, dict):
                r, a = row["regular"], row["autonomous"]
            else:
                r, a = row
            reg.append(float(r))
            aut.append(float(a))
        except (KeyError, TypeError, ValueError):
            raise NetworkInputError(f"flow file: entry {k} must give regular and autonomous flow") from None
    return FlowVector(np.array(reg), np.array(aut))


def cmd_verify(cfg: RunConfig) -> tuple[int, str]:
    net, demand, paths = _load(cfg)
    if cfg.flows is None:
        raise UsageError("verify needs --flows FILE")
    f = read_flows(cfg.flows, paths)
    eps = 1e-6 if cfg.tol is None else cfg.tol
    try:
        report = verify_equilibrium(net, demand, paths, f, eps)
    except InfeasibleFlowError as exc:
        out = {"passed": False, "feasible": False, "message": str(exc),
               "residuals": {k: _num(v) for k, v in exc.residuals.items()}}
        return EXIT_VERIFY, json.dumps(out, indent=2) + "\n"

    def describe(p):
        return {"index": p, "path": [net.links[l].id for l in paths.paths[p]],
                "nodes": path_label(net, paths.paths[p])}

    worst = report.worst
    out = {
        "passed": report.passed,
        "feasible": True,
        "eps": eps,
        "max_violation": report.max_violation,
        "od_delays": [_num(e) for e in report.od_delays],
        "path_delays": [_num(e) for e in report.path_delays],
        "worst": None if worst is None else {
            "od": worst.od, "path": describe(worst.path), "better_path": describe(worst.better_path),
            "slack": worst.slack,
        },
        "violations": [[v.od, v.path, v.better_path, v.slack] for v in report.violations],
        "residuals": report.residuals,
    }
    return (EXIT_OK if report.passed else EXIT_VERIFY), json.dumps(out, indent=2) + "\n"


def _bound_grid(cfg: RunConfig, demand: DemandSpec) -> list[tuple[float, ...]]:
    values = cfg.grid_values
    n = len(demand)
    if cfg.od is not None:
        vecs = []
        for t in values:
            a = list(demand.alphas)
            a[cfg.od] = t
            vecs.append(tuple(a))
        return vecs
    vecs = [tuple([t] * n) for t in values]
    if n > 1:
        for w in range(n):
            vecs += [tuple(t if k == w else 0.0 for k in range(n)) for t in values]
    return vecs


def cmd_bound(cfg: RunConfig) -> tuple[int, str]:
    net, demand, paths = _load(cfg)
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    try:
        rep = autonomy_bound_check(net, demand, _bound_grid(cfg, demand), paths, **kw)
    except HeterogeneityError as exc:
        raise HeterogeneityError(
            f"{exc}. The bound holds under the homogeneity hypothesis (one m/M for every link)."
        ) from None
    lines = [
        f"J0: {_fmt(rep.J0)}",
        f"lambda: {_fmt(rep.lam)}",
        f"factor: {_fmt(rep.factor)}",
        f"bound: {_fmt(rep.bound)}",
        f"max_ratio: {_fmt(rep.max_ratio)}",
        f"argmax_alpha: {','.join(_fmt(a) for a in rep.argmax)}",
        f"eta_estimate: {_fmt(rep.eta)}",
        f"violations: {len(rep.violations)}",
    ]
    return (EXIT_OK if rep.ok else EXIT_VERIFY), "\n".join(lines) + "\n"


def cmd_paths(cfg: RunConfig) -> tuple[int, str]:
    net, _, paths = _load(cfg)
    lines = []
    for p, path in enumerate(paths.paths):
        w = int(paths.od_of_path[p])
        o, d = net.od_pairs[w]
        ids = ",".join(str(net.links[l].id) for l in path)
        lines.append(f"{w}\t{o}->{d}\t{p}\t{ids}\t{path_label(net, path)}")
    return EXIT_OK, "\n".join(lines) + "\n"


COMMAND_FUNCS = {
    "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify, "bound": cmd_bound, "paths": cmd_paths,
}


def _points(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="autonomy-routing",
                                     description="Mixed-autonomy traffic equilibria and autonomy sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", required=True,
                        help="network JSON file, or the name of a bundled example (e.g. fig1.json)")
    common.add_argument("--output", help="write the result here instead of standard output")
    common.add_argument("--tol", type=float, help="solver tolerance (verify: Wardrop slack)")
    common.add_argument("--alpha-override", type=float, dest="alpha_override",
                        help="replace every O/D autonomy ratio with this value")
    common.add_argument("--max-paths", type=int, default=DEFAULT_MAX_PATHS, dest="max_paths")
    solver = argparse.ArgumentParser(add_help=False)
    solver.add_argument("--solver", choices=SOLVER_CHOICES,
                        help="default: homogeneous when m/M is shared by all links, else support-enum")
    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", type=int, default=DEFAULT_GRID, help="number of evenly spaced alphas in [0, 1]")
    grid.add_argument("--points", type=_points, help="explicit comma-separated alpha values (overrides --grid)")
    grid.add_argument("--od", type=int, help="vary only this O/D pair's alpha (0-based)")

    sub.add_parser("solve", parents=[common, solver], help="equilibrium social-delay range at the file's alphas")
    p = sub.add_parser("sweep", parents=[common, solver, grid], help="CSV of J over an alpha grid")
    p.add_argument("--paradox", choices=PARADOX_MODES, default="strong")
    p = sub.add_parser("verify", parents=[common], help="check user-supplied path flows")
    p.add_argument("--flows", required=True, help="JSON path-flow file")
    sub.add_parser("bound", parents=[common, grid], help="compare J(alpha) with the autonomy bound")
    sub.add_parser("paths", parents=[common], help="list the enumerated paths")
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    solver = getattr(ns, "solver", None)
    return RunConfig(
        command=ns.command, input=ns.input, output=ns.output,
        solver=None if solver is None else solver.replace("-", "_"),
        tol=ns.tol, grid=getattr(ns, "grid", DEFAULT_GRID), points=getattr(ns, "points", None),
        od=getattr(ns, "od", None), paradox=getattr(ns, "paradox", "strong"),
        alpha_override=ns.alpha_override, flows=getattr(ns, "flows", None), max_paths=ns.max_paths,
    )


def run(cfg: RunConfig) -> int:
    try:
        code, text = COMMAND_FUNCS[cfg.command](cfg)
    except (UsageError, NetworkInputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RoutingError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if cfg.output:
        try:
            Path(cfg.output).write_text(text)
        except OSError as exc:
            print(f"error: cannot write {cfg.output}: {exc}", file=sys.stderr)
            return EXIT_INPUT
    else:
        sys.stdout.write(text)
    if code == EXIT_VERIFY:
        print("verification failed", file=sys.stderr)
    elif code == EXIT_SOLVER:
        print("solver did not reach the requested tolerance", file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
