"""Autonomy sweeps, paradox detection and the price-of-autonomy bound."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .assign import baseline_game, solve_single_class
from .errors import DomainError, HeterogeneityError
from .mixed_eq import equilibrium_set, solve_mixed_homogeneous
from .network import DemandSpec, LinkParams, Network, PathSet, enumerate_paths

SOLVERS = ("homogeneous", "support_enum", "single_class")
PARADOX_MODES = ("strong", "weak")
SWEEP_TOL = 1e-6
DEFAULT_GRID = 101


@dataclass(frozen=True)
class PointResult:
    """Social-delay range (and per-O/D delay range) at one autonomy vector."""

    alphas: tuple[float, ...]
    J_min: float
    J_max: float
    e_min: tuple[float, ...]
    e_max: tuple[float, ...]
    solver: str
    converged: bool = True


@dataclass(frozen=True)
class SweepSample:
    alpha: float
    point: PointResult
    paradox: bool

    @property
    def J_min(self) -> float:
        return self.point.J_min

    @property
    def J_max(self) -> float:
        return self.point.J_max


@dataclass(frozen=True)
class SweepResult:
    samples: tuple[SweepSample, ...]
    od: int | None
    solver: str
    mode: str
    nonincreasing: bool
    paradox: bool
    paradox_pair: tuple[float, float] | None
    J0: float
    lam: float | None
    bound: float | None
    eta: float


def pick_solver(net: Network, demand: DemandSpec, solver: str | None = None) -> str:
    if solver is not None:
        solver = solver.replace("-", "_")
        if solver not in SOLVERS:
            raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
        return solver
    if net.common_mu() is not None:
        return "homogeneous"
    return "support_enum"


def solve_point(net: Network, demand: DemandSpec, paths: PathSet, solver: str,
                tol: float | None = None) -> PointResult:
    """J range at the demand's autonomy vector with the named solver."""
    alphas = demand.alphas
    if solver == "support_enum":
        kw = {} if tol is None else {"tol": tol}
        es = equilibrium_set(net, demand, paths, link_ranges=False, od_ranges=True, **kw)
        return PointResult(alphas, es.J_min, es.J_max, tuple(es.od_min), tuple(es.od_max), solver)
    if solver == "homogeneous":
        kw = {} if tol is None else {"tol": tol}
        sol = solve_mixed_homogeneous(net, demand, paths, **kw)
        e = tuple(float(v) for v in sol.od_delays)
        return PointResult(alphas, sol.J, sol.J, e, e, solver, sol.converged)
    if solver == "single_class":
        if any(a != 0 for a in alphas):
            raise DomainError("the single-class solver needs every alpha = 0")
        kw = {} if tol is None else {"rel_gap_tol": tol}
        res = solve_single_class(baseline_game(net, demand, paths), **kw)
        J = res.social_delay(demand.demands)
        e = tuple(float(v) for v in res.od_delays)
        return PointResult(alphas, J, J, e, e, solver, res.converged)
    raise ValueError(f"unknown solver {solver!r}")


def baseline_delay(net: Network, demand: DemandSpec, paths: PathSet) -> float:
    """Social delay with no autonomous vehicles (unique)."""
    res = solve_single_class(baseline_game(net, demand, paths))
    return res.social_delay(demand.demands)


def _alphas_at(demand: DemandSpec, od: int | None, value: float) -> tuple[float, ...]:
    if od is None:
        return tuple(value for _ in demand.alphas)
    alphas = list(demand.alphas)
    alphas[od] = value
    return tuple(alphas)


def paradox_flags(J_min: Sequence[float], J_max: Sequence[float], mode: str = "strong",
                  tol: float = SWEEP_TOL) -> tuple[list[bool], tuple[int, int] | None]:
    """Flag samples whose delay rose above an earlier (lower-alpha) sample.

    strong: J_min[j] exceeds some earlier J_max[i], so every equilibrium at j
    is worse than some equilibrium at i. weak: either endpoint rose.
    """
    if mode not in PARADOX_MODES:
        raise ValueError(f"paradox mode must be one of {PARADOX_MODES}")
    flags = []
    pair = None
    for j in range(len(J_max)):
        hit = None
        for i in range(j):
            slack = tol * (1 + abs(J_max[i]))
            if mode == "strong":
                up = J_min[j] > J_max[i] + slack
            else:
                up = J_max[j] > J_max[i] + slack or J_min[j] > J_min[i] + tol * (1 + abs(J_min[i]))
            if up:
                hit = (i, j)
                break
        flags.append(hit is not None)
        if hit is not None and pair is None:
            pair = hit
    return flags, pair


def sweep_alpha(net: Network, demand: DemandSpec, grid: Sequence[float] | None = None,
                od: int | None = None, solver: str | None = None, mode: str = "strong",
                paths: PathSet | None = None, tol: float = SWEEP_TOL,
                solver_tol: float | None = None) -> SweepResult:
    """Sweep one O/D pair's alpha (``od``) or a uniform alpha over ``grid``.

    ``tol`` is the relative slack of the paradox and monotonicity tests;
    ``solver_tol`` is handed to the point solver. Errors from the solver
    are re-raised with the offending grid value.
    """
    if grid is None:
        grid = np.linspace(0.0, 1.0, DEFAULT_GRID)
    grid = sorted(float(g) for g in grid)
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise DomainError("grid values must lie in [0, 1]")
    if od is not None and not 0 <= od < len(demand):
        raise DomainError(f"O/D index {od} out of range")
    if paths is None:
        paths = enumerate_paths(net)
    solver = pick_solver(net, demand, solver)

    points = []
    for g in grid:
        try:
            points.append(solve_point(net, demand.with_alphas(_alphas_at(demand, od, g)), paths, solver,
                                      solver_tol))
        except Exception as exc:
            exc.grid_point = g
            if hasattr(exc, "add_note"):
                exc.add_note(f"while solving at alpha = {g!r}")
            raise

    J_min = [p.J_min for p in points]
    J_max = [p.J_max for p in points]
    flags, pair = paradox_flags(J_min, J_max, mode, tol)
    nonincreasing = all(J_max[k + 1] <= J_max[k] + tol * (1 + abs(J_max[k])) for k in range(len(points) - 1))

    J0 = baseline_delay(net, demand, paths)
    lam = bound = None
    if net.common_mu() is not None and net.max_beta <= 4:
        lam = lambda_class_bound(math.ceil(net.max_beta))
        bound = J0 / (1 - lam)
    eta = max(J_max) / J0 if J0 > 0 else math.nan

    samples = tuple(SweepSample(g, p, f) for g, p, f in zip(grid, points, flags))
    return SweepResult(
        samples=samples, od=od, solver=solver, mode=mode, nonincreasing=nonincreasing,
        paradox=any(flags), paradox_pair=None if pair is None else (grid[pair[0]], grid[pair[1]]),
        J0=J0, lam=lam, bound=bound, eta=eta,
    )


def lambda_of_class(delay_family: Sequence[LinkParams], v, xatol: float = 1e-10) -> float:
    """Per-instance geometric constant of reduced delays at link flows ``v``.

    ratio of  sum_l max_{x>=0} (e_l(v_l) - e_l(x)) x  to  sum_l e_l(v_l) v_l,
    with 0/0 taken as 0. Each per-link maximiser lies in [0, v_l] because
    e_l is nondecreasing.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise DomainError("flows must be nonnegative")
    if len(v) != len(delay_family):
        raise ValueError("one flow per delay function expected")
    num = 0.0
    den = 0.0
    for params, vl in zip(delay_family, v):
        a, c, b, m = params.a, params.scale, params.beta, params.m

        def e(x):
            return a + c * (x / m) ** b

        ev = e(vl)
        den += ev * vl
        if vl == 0 or c == 0:
            continue
        res = minimize_scalar(lambda x: -(ev - e(x)) * x, bounds=(0.0, vl), method="bounded",
                              options={"xatol": xatol})
        num += max(0.0, -res.fun)
    if den == 0:
        return 0.0
    return num / den


def lambda_class_bound(beta_max: int) -> float:
    """Class constant for polynomial delays of degree up to ``beta_max`` (1-4)."""
    if beta_max not in (1, 2, 3, 4):
        raise DomainError(f"no class constant for degree {beta_max!r}; supported: 1, 2, 3, 4")
    d = float(beta_max)
    return d * (d + 1) ** (-(d + 1) / d)


def price_of_autonomy_bound(beta_max: int) -> float:
    return 1.0 / (1.0 - lambda_class_bound(beta_max))


@dataclass(frozen=True)
class BoundReport:
    J0: float
    lam: float
    factor: float
    bound: float
    alphas: tuple[tuple[float, ...], ...]
    J: tuple[float, ...]
    ratios: tuple[float, ...]
    max_ratio: float
    argmax: tuple[float, ...]
    violations: tuple[int, ...]

    @property
    def eta(self) -> float:
        """Largest J(alpha)/J0 seen on the grid; a lower estimate of the price of autonomy."""
        return self.max_ratio

    @property
    def ok(self) -> bool:
        return not self.violations


def autonomy_bound_check(net: Network, demand: DemandSpec, alpha_grid: Sequence[Sequence[float]],
                         paths: PathSet | None = None, tol: float = 1e-9) -> BoundReport:
    """Compare J(alpha) with J0 / (1 - lambda) at every autonomy vector of the grid."""
    if net.common_mu() is None:
        raise HeterogeneityError(
            "the autonomy bound assumes one capacity asymmetry m/M shared by all links"
        )
    if paths is None:
        paths = enumerate_paths(net)
    lam = lambda_class_bound(math.ceil(net.max_beta))
    factor = 1.0 / (1.0 - lam)
    J0 = baseline_delay(net, demand, paths)
    alphas, Js, ratios, bad = [], [], [], []
    for k, vec in enumerate(alpha_grid):
        vec = tuple(float(a) for a in vec)
        J = solve_mixed_homogeneous(net, demand.with_alphas(vec), paths).J
        ratio = J / J0 if J0 > 0 else (1.0 if J == 0 else math.inf)
        alphas.append(vec)
        Js.append(J)
        ratios.append(ratio)
        if J > factor * J0 + tol * (1 + J0):
            bad.append(k)
    best = int(np.argmax(ratios)) if ratios else 0
    return BoundReport(
        J0=J0, lam=lam, factor=factor, bound=factor * J0, alphas=tuple(alphas), J=tuple(Js),
        ratios=tuple(ratios), max_ratio=max(ratios) if ratios else math.nan,
        argmax=alphas[best] if alphas else (), violations=tuple(bad),
    )


__all__ = [
    "BoundReport", "PointResult", "SweepResult", "SweepSample", "autonomy_bound_check",
    "baseline_delay", "lambda_class_bound", "lambda_of_class", "paradox_flags",
    "pick_solver", "price_of_autonomy_bound", "solve_point", "sweep_alpha",
]
