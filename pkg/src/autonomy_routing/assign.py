"""Single-class Wardrop assignment (Frank-Wolfe on the Beckmann potential).

Used for the all-regular baseline and for the reduced game obtained from a
homogeneous-asymmetry network, where the mixed flow collapses to
``f_r + mu * f_a`` on the regular-capacity delays.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .delay import LinkArrays
from .errors import HeterogeneityError, RoutingError
from .network import DemandSpec, Network, PathSet, enumerate_paths

log = logging.getLogger(__name__)

REL_GAP_TOL = 1e-8
MAX_ITER = 100_000
FLOW_EPS = 1e-7
POLISH_START = 16
POLISH_GAP = 1e-2
MU_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class SingleClassGame:
    net: Network
    paths: PathSet
    demands: np.ndarray
    mu: float = 1.0

    def __post_init__(self):
        d = np.array(self.demands, dtype=float)
        if d.shape != (len(self.net.od_pairs),):
            raise ValueError("one reduced demand per O/D pair expected")
        if np.any(d < 0):
            raise ValueError("reduced demands must be nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "demands", d)


@dataclass(frozen=True, eq=False)
class AssignmentResult:
    link_flows: np.ndarray
    commodity_flows: np.ndarray  # (n_od, n_links)
    path_flows: np.ndarray
    od_delays: np.ndarray
    beckmann: float
    rel_gap: float
    iterations: int
    converged: bool
    polished: bool
    potential_history: tuple[float, ...] = ()

    def social_delay(self, weights) -> float:
        """Sum of ``weights[w] * od_delays[w]``."""
        return float(np.dot(weights, self.od_delays))


def baseline_game(net: Network, demand: DemandSpec, paths: PathSet | None = None) -> SingleClassGame:
    """All-regular game: demands r_w, regardless of the alphas in ``demand``."""
    if paths is None:
        paths = enumerate_paths(net)
    return SingleClassGame(net, paths, np.array(demand.demands), 1.0)


def reduce_homogeneous(net: Network, demand: DemandSpec, paths: PathSet | None = None,
                       rtol: float = MU_RTOL) -> SingleClassGame:
    """Collapse a homogeneous-asymmetry mixed game to one regular class.

    Reduced demand is ``(1 - alpha_w) r_w + mu alpha_w r_w``.
    """
    mu = net.common_mu(rtol)
    if mu is None:
        mus = net.mu_values()
        raise HeterogeneityError(
            f"links have different m/M (min {mus.min():.6g}, max {mus.max():.6g}); "
            "the single-class reduction needs a common capacity asymmetry"
        )
    if paths is None:
        paths = enumerate_paths(net)
    r = np.array(demand.demands)
    alpha = np.array(demand.alphas)
    return SingleClassGame(net, paths, (1 - alpha) * r + mu * alpha * r, mu)


def shortest_path(net: Network, link_costs, origin: str, destination: str) -> tuple[tuple[int, ...], float]:
    """Dijkstra over link costs; ties go to the lexicographically smaller link sequence."""
    costs = np.asarray(link_costs, dtype=float)
    if np.any(costs < 0):
        raise ValueError("link costs must be nonnegative")
    out_links: dict[str, list[int]] = {n: [] for n in net.nodes}
    for i, link in enumerate(net.links):
        out_links[link.tail].append(i)
    best: dict[str, tuple[float, tuple[int, ...]]] = {origin: (0.0, ())}
    heap = [(0.0, (), origin)]
    done = set()
    while heap:
        cost, seq, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == destination:
            return seq, cost
        for i in out_links[node]:
            head = net.links[i].head
            if head in done:
                continue
            cand = (cost + costs[i], seq + (i,))
            if head not in best or cand < best[head]:
                best[head] = cand
                heapq.heappush(heap, (cand[0], cand[1], head))
    raise RoutingError(f"{destination!r} is unreachable from {origin!r}")


def _aon(costs, game, slices):
    """All-or-nothing loading on the cheapest enumerated path of each O/D."""
    pc = game.paths.incidence.T @ costs
    choice = np.empty(len(slices), dtype=int)
    sp = np.empty(len(slices))
    for w, sl in enumerate(slices):
        k = int(np.argmin(pc[sl]))
        choice[w] = sl.start + k
        sp[w] = pc[sl][k]
    return choice, sp, pc


def _rel_gap(x, costs, demands, sp):
    tt = float(x @ costs)
    if tt <= 0:
        return 0.0
    return max(0.0, (tt - float(demands @ sp)) / tt)


def _line_search(arrays, x, d):
    def slope(theta):
        return float(arrays.reduced_delays(x + theta * d) @ d)

    if slope(1.0) <= 0:
        return 1.0
    if slope(0.0) >= 0:
        return 0.0
    return brentq(slope, 0.0, 1.0, xtol=1e-12, rtol=4 * np.finfo(float).eps)


def solve_single_class(game: SingleClassGame, rel_gap_tol: float = REL_GAP_TOL,
                       max_iter: int = MAX_ITER, polish: bool = True) -> AssignmentResult:
    """Wardrop equilibrium of a single-class game.

    Frank-Wolfe with exact line search until the relative gap drops to
    ``rel_gap_tol``. With ``polish`` set, the tracked path flows are
    periodically refined by Newton's method on the near-shortest paths;
    this ends the run as soon as it certifies the tolerance, which plain
    Frank-Wolfe reaches only sublinearly when some shortest path is unused.
    An unconverged run returns the last iterate with ``converged=False``.
    """
    if rel_gap_tol <= 0:
        raise ValueError("rel_gap_tol must be positive")
    arrays = LinkArrays(game.net)
    paths = game.paths
    inc = paths.incidence
    slices = paths.od_slices
    demands = game.demands
    n_od = len(slices)

    choice, sp, _ = _aon(arrays.reduced_delays(np.zeros(paths.n_links)), game, slices)
    pf = np.zeros(paths.n_paths)
    pf[choice] = demands
    comm = np.array([inc[:, choice[w]] * demands[w] for w in range(n_od)])
    x = comm.sum(axis=0)
    history = [arrays.beckmann(x)]
    gap = np.inf
    it = 0
    converged = polished = False
    next_polish = POLISH_START
    for it in range(1, max_iter + 1):
        costs = arrays.reduced_delays(x)
        choice, sp, pc = _aon(costs, game, slices)
        gap = _rel_gap(x, costs, demands, sp)
        if gap <= rel_gap_tol:
            converged = True
            break
        if polish and it >= next_polish:
            next_polish *= 2
            refined = _polish(game, arrays, pf, pc, gap) if gap <= POLISH_GAP else None
            if refined is not None:
                new_x = inc @ refined
                new_costs = arrays.reduced_delays(new_x)
                _, new_sp, _ = _aon(new_costs, game, slices)
                new_gap = _rel_gap(new_x, new_costs, demands, new_sp)
                if new_gap <= rel_gap_tol:
                    pf, x, gap = refined, new_x, new_gap
                    comm = np.array([inc[:, sl] @ pf[sl] for sl in slices])
                    history.append(arrays.beckmann(x))
                    converged = polished = True
                    break
        target = np.array([inc[:, choice[w]] * demands[w] for w in range(n_od)])
        theta = _line_search(arrays, x, target.sum(axis=0) - x)
        if theta == 0.0:
            # no descent along the FW direction: optimal to machine precision
            converged = True
            break
        comm = comm + theta * (target - comm)
        pf *= 1.0 - theta
        pf[choice] += theta * demands
        x = comm.sum(axis=0)
        history.append(arrays.beckmann(x))
    else:
        log.warning("Frank-Wolfe stopped after %d iterations at relative gap %.3g", max_iter, gap)

    costs = arrays.reduced_delays(x)
    od_delay = np.array([(inc.T @ costs)[sl].min() for sl in slices])

    result = AssignmentResult(
        link_flows=x, commodity_flows=comm, path_flows=pf, od_delays=np.asarray(od_delay),
        beckmann=arrays.beckmann(x), rel_gap=float(gap), iterations=it,
        converged=converged, polished=polished, potential_history=tuple(history),
    )
    return result


def _polish(game, arrays, pf, path_costs, gap, max_rounds=8, max_newton=60):
    """Newton refinement of path flows on the near-shortest paths.

    Solves  e_p(f) = tau_w  (p in support),  sum_p f_p = r_w  with least
    squares steps, dropping paths whose flow turns negative and adding
    paths that undercut tau_w. Returns None when it cannot certify.
    """
    paths = game.paths
    inc = paths.incidence
    slices = paths.od_slices
    demands = game.demands
    n_od = len(slices)
    slack = max(1e-4, 10.0 * gap)
    support = []
    for sl in slices:
        e_min = path_costs[sl].min()
        support.append([j for j in range(sl.start, sl.stop)
                        if path_costs[j] - e_min <= slack * (1 + abs(e_min))])

    for _ in range(max_rounds):
        cols = [j for group in support for j in group]
        owner = np.array([w for w, group in enumerate(support) for _ in group])
        A = inc[:, cols]
        B = np.zeros((len(cols), n_od))
        B[np.arange(len(cols)), owner] = 1.0
        f = pf[cols].copy()
        # rescale the starting point onto the demand simplex of each O/D
        for w in range(n_od):
            mask = owner == w
            s = f[mask].sum()
            f[mask] = f[mask] * demands[w] / s if s > 0 else demands[w] / mask.sum()
        tau = np.array([path_costs[support[w]].min() for w in range(n_od)])

        def residual(f, tau):
            e = A.T @ arrays.reduced_delays(A @ f)
            return np.concatenate([e - B @ tau, B.T @ f - demands])

        res = residual(f, tau)
        scale = 1.0 + np.abs(tau).max()
        for _ in range(max_newton):
            if np.linalg.norm(res, np.inf) <= 1e-13 * scale:
                break
            deriv = arrays.reduced_derivative(A @ f)
            if not np.all(np.isfinite(deriv)):
                return None
            jac = np.block([[A.T @ (deriv[:, None] * A), -B], [B.T, np.zeros((n_od, n_od))]])
            step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            t = 1.0
            base = np.linalg.norm(res)
            while t > 1e-6:
                nf, ntau = f + t * step[: len(cols)], tau + t * step[len(cols):]
                nres = residual(nf, ntau)
                if np.linalg.norm(nres) < base or np.linalg.norm(nres, np.inf) <= 1e-13 * scale:
                    break
                t *= 0.5
            else:
                break
            f, tau, res = nf, ntau, nres
        neg = f < -1e-12 * (1 + demands.max())
        if np.linalg.norm(res, np.inf) > 1e-9 * scale or neg.any():
            # drop the most suspicious path: most negative flow, else the
            # costliest one at the starting point
            if neg.any():
                worst = cols[int(np.argmin(f))]
            else:
                worst = max(cols, key=lambda j: path_costs[j])
            for group in support:
                if worst in group and len(group) > 1:
                    group.remove(worst)
                    break
            else:
                return None
            continue
        f = np.clip(f, 0.0, None)
        full = np.zeros(paths.n_paths)
        full[cols] = f
        costs = inc.T @ arrays.reduced_delays(inc @ full)
        added = False
        for w, sl in enumerate(slices):
            for j in range(sl.start, sl.stop):
                if j not in support[w] and costs[j] < tau[w] - 1e-9 * (1 + abs(tau[w])):
                    support[w].append(j)
                    added = True
        if not added:
            return full
        pf = full
        path_costs = costs
    return None
