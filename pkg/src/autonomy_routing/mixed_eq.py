"""Equilibrium verification and the equilibrium set of mixed-autonomy games.

For linear delays the set of mixed equilibria is a finite union of
polytopes, one per support pattern (the paths each O/D pair may use).
Optimising a linear objective over each polytope gives exact ranges of the
social delay, of per-link flows and of per-O/D travel delays.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .assign import REL_GAP_TOL, AssignmentResult, SingleClassGame, reduce_homogeneous, solve_single_class
from .delay import FlowVector, LinkArrays, link_flows, path_delays
from .errors import LPFailure, SupportLimitError, UnsupportedExponentError
from .network import DemandSpec, Network, PathSet, enumerate_paths

VERIFY_EPS = 1e-6
LP_TOL = 1e-9
MAX_SUPPORTS = 4096


@dataclass(frozen=True)
class Violation:
    od: int
    path: int
    better_path: int
    slack: float  # e_path - e_better_path > 0


@dataclass(frozen=True, eq=False)
class VerificationReport:
    passed: bool
    residuals: dict[str, float]
    path_delays: np.ndarray
    od_delays: np.ndarray
    violations: tuple[Violation, ...]
    max_violation: float  # max over used paths of (e_p - e_w) / (1 + |e_w|)
    eps: float

    @property
    def worst(self) -> Violation | None:
        return max(self.violations, key=lambda v: v.slack, default=None)


def verify_equilibrium(net: Network, demand: DemandSpec, paths: PathSet, f: FlowVector,
                       eps: float = VERIFY_EPS) -> VerificationReport:
    """Check class conservation, then the Wardrop conditions for both classes.

    A path counts as used when its total flow exceeds ``eps``. Raises
    InfeasibleFlowError when conservation fails by more than ``eps``.
    """
    f.check_feasible(paths, demand, tol=eps)
    residuals = f.conservation_residuals(paths, demand)
    pd = path_delays(net, paths, f)
    used = f.total > eps
    violations = []
    worst = 0.0
    od_delay = np.empty(len(paths.od_slices))
    for w, sl in enumerate(paths.od_slices):
        e_w = pd[sl].min()
        od_delay[w] = e_w
        for p in range(sl.start, sl.stop):
            if not used[p]:
                continue
            worst = max(worst, (pd[p] - e_w) / (1 + abs(e_w)))
            for q in range(sl.start, sl.stop):
                if pd[p] - pd[q] > eps * (1 + abs(e_w)):
                    violations.append(Violation(w, p, q, float(pd[p] - pd[q])))
    return VerificationReport(
        passed=not violations and worst <= eps,
        residuals=residuals,
        path_delays=pd,
        od_delays=od_delay,
        violations=tuple(violations),
        max_violation=float(worst),
        eps=eps,
    )


@dataclass(frozen=True, eq=False)
class SupportResult:
    support: tuple[tuple[int, ...], ...]  # flat path indices per O/D
    feasible: bool
    J_min: float = math.nan
    J_max: float = math.nan
    witness_min: FlowVector | None = None
    witness_max: FlowVector | None = None
    link_min: np.ndarray | None = None
    link_max: np.ndarray | None = None
    od_min: np.ndarray | None = None
    od_max: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class EquilibriumSet:
    paths: PathSet
    supports: tuple[SupportResult, ...]
    J_min: float
    J_max: float
    witness_min: FlowVector
    witness_max: FlowVector
    link_min: np.ndarray | None = None
    link_max: np.ndarray | None = None
    od_min: np.ndarray | None = None
    od_max: np.ndarray | None = None
    n_lp: int = field(default=0, compare=False)

    @property
    def feasible_supports(self) -> tuple[SupportResult, ...]:
        return tuple(s for s in self.supports if s.feasible)


def _support_patterns(paths: PathSet):
    per_od = []
    for sl in paths.od_slices:
        idx = list(range(sl.start, sl.stop))
        subsets = [tuple(c) for k in range(1, len(idx) + 1) for c in itertools.combinations(idx, k)]
        per_od.append(subsets)
    return itertools.product(*per_od)


def count_supports(paths: PathSet) -> int:
    return math.prod(2 ** (sl.stop - sl.start) - 1 for sl in paths.od_slices)


class _LinearModel:
    """Affine path delays e = const + Kr f_r + Ka f_a (all beta = 1)."""

    def __init__(self, net: Network, paths: PathSet):
        arrays = LinkArrays(net)
        inc = paths.incidence
        self.const = inc.T @ arrays.a
        self.Kr = inc.T @ ((arrays.scale / arrays.m)[:, None] * inc)
        self.Ka = inc.T @ ((arrays.scale / arrays.M)[:, None] * inc)
        self.inc = inc


def _solve_lp(c, A_ub, b_ub, A_eq, b_eq, bounds, support):
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs",
        options={"primal_feasibility_tolerance": LP_TOL, "dual_feasibility_tolerance": LP_TOL},
    )
    if res.status == 2:
        return None
    if res.status != 0:
        raise LPFailure(f"LP failed on support {support}: {res.message}", support=support)
    return res


def equilibrium_set(net: Network, demand: DemandSpec, paths: PathSet | None = None, *,
                    link_ranges: bool = True, od_ranges: bool = False,
                    max_supports: int = MAX_SUPPORTS, tol: float = LP_TOL) -> EquilibriumSet:
    """Extremes of J (and optionally link flows, O/D delays) over all equilibria.

    Requires beta = 1 on every link.
    """
    bad = [link.id for link in net.links if link.params.beta != 1]
    if bad:
        raise UnsupportedExponentError(f"equilibrium-set enumeration needs beta = 1; links {bad} differ")
    if paths is None:
        paths = enumerate_paths(net)
    n_sup = count_supports(paths)
    if n_sup > max_supports:
        raise SupportLimitError(f"{n_sup} support patterns exceed the limit of {max_supports}")

    model = _LinearModel(net, paths)
    n_od = len(paths.od_slices)
    r = np.array(demand.demands)
    reg, aut = demand.regular(), demand.autonomous()
    results = []
    n_lp = 0
    for support in _support_patterns(paths):
        cols = [p for group in support for p in group]
        k = len(cols)
        nv = 2 * k + n_od
        owner = paths.od_of_path[cols]
        A_eq = np.zeros((2 * n_od, nv))
        for j, w in enumerate(owner):
            A_eq[w, j] = 1.0
            A_eq[n_od + w, k + j] = 1.0
        b_eq = np.concatenate([reg, aut])

        rows, rhs = [], []
        allowed = set(cols)
        for p in range(paths.n_paths):
            w = paths.od_of_path[p]
            row = np.zeros(nv)
            row[:k] = model.Kr[p, cols]
            row[k:2 * k] = model.Ka[p, cols]
            row[2 * k + w] = -1.0
            if p in allowed:
                # e_p - tau_w within +-tol
                rows.append(row)
                rhs.append(tol - model.const[p])
            rows.append(-row)
            rhs.append(tol + model.const[p])
        A_ub = np.array(rows)
        b_ub = np.array(rhs)
        bounds = [(0, None)] * (2 * k) + [(None, None)] * n_od

        def witness(x):
            fr = np.zeros(paths.n_paths)
            fa = np.zeros(paths.n_paths)
            fr[cols] = np.clip(x[:k], 0, None)
            fa[cols] = np.clip(x[k:2 * k], 0, None)
            return FlowVector(fr, fa)

        def optimise(obj):
            nonlocal n_lp
            out = []
            for sign in (1.0, -1.0):
                n_lp += 1
                res = _solve_lp(sign * obj, A_ub, b_ub, A_eq, b_eq, bounds, support)
                if res is None:
                    return None
                out.append((sign * res.fun, res.x))
            return out

        obj = np.zeros(nv)
        obj[2 * k:] = r
        jr = optimise(obj)
        if jr is None:
            results.append(SupportResult(support, False))
            continue
        (jmin, xmin), (jmax, xmax) = jr
        lmin = lmax = omin = omax = None
        if link_ranges:
            lmin, lmax = np.empty(paths.n_links), np.empty(paths.n_links)
            for l in range(paths.n_links):
                obj = np.zeros(nv)
                obj[:k] = model.inc[l, cols]
                obj[k:2 * k] = model.inc[l, cols]
                if not obj.any():
                    lmin[l] = lmax[l] = 0.0
                    continue
                ext = optimise(obj)
                if ext is None:
                    raise LPFailure(f"support {support} turned infeasible on link objective", support)
                lmin[l], lmax[l] = ext[0][0], ext[1][0]
        if od_ranges:
            if n_od == 1:
                omin, omax = np.array([jmin / r[0]]), np.array([jmax / r[0]])
            else:
                omin, omax = np.empty(n_od), np.empty(n_od)
                for w in range(n_od):
                    obj = np.zeros(nv)
                    obj[2 * k + w] = 1.0
                    ext = optimise(obj)
                    if ext is None:
                        raise LPFailure(f"support {support} turned infeasible on delay objective", support)
                    omin[w], omax[w] = ext[0][0], ext[1][0]
        results.append(SupportResult(support, True, jmin, jmax, witness(xmin), witness(xmax),
                                     lmin, lmax, omin, omax))

    feasible = [s for s in results if s.feasible]
    if not feasible:
        raise LPFailure("no support pattern admits an equilibrium (numerical trouble?)")
    lo = min(feasible, key=lambda s: s.J_min)
    hi = max(feasible, key=lambda s: s.J_max)

    def agg(attr, fn):
        vals = [getattr(s, attr) for s in feasible]
        if vals[0] is None:
            return None
        return fn(np.array(vals), axis=0)

    return EquilibriumSet(
        paths=paths, supports=tuple(results),
        J_min=lo.J_min, J_max=hi.J_max,
        witness_min=lo.witness_min, witness_max=hi.witness_max,
        link_min=agg("link_min", np.min), link_max=agg("link_max", np.max),
        od_min=agg("od_min", np.min), od_max=agg("od_max", np.max),
        n_lp=n_lp,
    )


@dataclass(frozen=True, eq=False)
class HomogeneousSolution:
    J: float
    od_delays: np.ndarray
    witness: FlowVector
    game: SingleClassGame
    assignment: AssignmentResult

    @property
    def converged(self) -> bool:
        return self.assignment.converged


def lift_flows(game: SingleClassGame, demand: DemandSpec, reduced_path_flows) -> FlowVector:
    """Split reduced path flows into classes, proportionally per O/D pair.

    Each path keeps ``f_r + mu f_a`` equal to its reduced flow and the class
    totals of every O/D pair match the demand.
    """
    fr = np.zeros(game.paths.n_paths)
    fa = np.zeros(game.paths.n_paths)
    for w, sl in enumerate(game.paths.od_slices):
        r, alpha, rt = demand.demands[w], demand.alphas[w], game.demands[w]
        share = np.clip(reduced_path_flows[sl], 0, None) / rt
        fr[sl] = share * (1 - alpha) * r
        fa[sl] = share * alpha * r
    return FlowVector(fr, fa)


def solve_mixed_homogeneous(net: Network, demand: DemandSpec, paths: PathSet | None = None,
                            tol: float = REL_GAP_TOL, max_iter: int | None = None) -> HomogeneousSolution:
    """Social delay via the single-class reduction; any beta."""
    game = reduce_homogeneous(net, demand, paths)
    kwargs = {} if max_iter is None else {"max_iter": max_iter}
    result = solve_single_class(game, rel_gap_tol=tol, **kwargs)
    r = np.array(demand.demands)
    J = float(r @ result.od_delays)
    witness = lift_flows(game, demand, result.path_flows)
    return HomogeneousSolution(J, np.array(result.od_delays), witness, game, result)


def link_total_flows(paths: PathSet, f: FlowVector) -> np.ndarray:
    return link_flows(f, paths)[2]
