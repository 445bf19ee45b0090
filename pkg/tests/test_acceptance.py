"""Acceptance suite: one test per criterion, each at its stated tolerance.

A PASS/FAIL line per criterion is printed in the terminal summary.
"""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from autonomy_routing import (
    autonomy_bound_check, equilibrium_set, lambda_class_bound, lambda_of_class, load_example,
    solve_mixed_homogeneous, solve_point, sweep_alpha,
)
from autonomy_routing.examples import NAMES
from autonomy_routing.network import LinkParams, enumerate_paths
import netgen


@pytest.fixture
def report(record_property):
    def emit(number, detail):
        record_property("criterion", number)
        record_property("detail", detail)
        print(f"criterion {number}: {detail}")
    return emit


def test_criterion_01_two_route_link_range(report):
    net, demand = load_example("fig1")
    t0 = time.perf_counter()
    es = equilibrium_set(net, demand)
    elapsed = time.perf_counter() - t0
    report(1, f"links [{es.link_min.min():.9f}, {es.link_max.max():.9f}], "
              f"J [{es.J_min:.9f}, {es.J_max:.9f}], {elapsed:.3f}s")
    assert np.allclose(es.link_min, 0.75, atol=1e-6)
    assert np.allclose(es.link_max, 1.25, atol=1e-6)
    assert es.J_min == pytest.approx(7, abs=1e-6)
    assert es.J_max == pytest.approx(7, abs=1e-6)
    assert elapsed < 1.0


def test_criterion_02_braess_low_autonomy(report):
    net, demand = load_example("ex3")
    paths = enumerate_paths(net)
    t0 = time.perf_counter()
    at0 = solve_point(net, demand.with_alphas([0.0]), paths, "support_enum")
    at01 = solve_point(net, demand.with_alphas([0.1]), paths, "support_enum")
    elapsed = time.perf_counter() - t0
    report(2, f"J(0) = {at0.J_max:.4f} (want 504.3 +- 0.1); "
              f"J(0.1) in [{at01.J_min:.4f}, {at01.J_max:.4f}] (want 518.6 inside); {elapsed:.3f}s")
    assert abs(at0.J_max - 504.3) <= 0.1
    assert at01.J_min - 0.1 <= 518.6 <= at01.J_max + 0.1
    assert elapsed < 5.0


def test_criterion_03_braess_full_sweep(report):
    net, demand = load_example("ex4")
    paths = enumerate_paths(net)
    t0 = time.perf_counter()
    sweep = sweep_alpha(net, demand, np.linspace(0, 1, 101), paths=paths, solver="support_enum")
    elapsed = time.perf_counter() - t0
    at = {k: solve_point(net, demand.with_alphas([k]), paths, "support_enum") for k in (0.0, 1 / 3, 1.0, 88 / 123)}
    checks = [
        at[0.0].J_max - 544.8,
        at[1 / 3].J_max - 552.0,
        at[1.0].J_max - 39060 / 71,
        at[88 / 123].J_min - 22260 / 41,
    ]
    report(3, f"deviations {[f'{c:.2e}' for c in checks]}, paradox={sweep.paradox}, "
              f"101-point sweep {elapsed:.2f}s")
    assert all(abs(c) <= 0.05 for c in checks)
    assert at[1.0].J_min > at[0.0].J_max
    assert sweep.paradox
    assert elapsed < 10.0


def test_criterion_04_three_pair_sweep(report):
    net, demand = load_example("ex5")
    grid = [k / 10 for k in range(11)]
    t0 = time.perf_counter()
    sweep = sweep_alpha(net, demand, grid, od=0)
    elapsed = time.perf_counter() - t0
    dev = max(abs(s.J_max - (10676 + 153 * s.alpha)) for s in sweep.samples)
    dev = max(dev, max(abs(s.J_min - (10676 + 153 * s.alpha)) for s in sweep.samples))
    report(4, f"max |J - line| = {dev:.2e}, paradox={sweep.paradox}, {elapsed:.3f}s")
    assert dev <= 1.0
    assert sweep.paradox
    assert elapsed < 5.0


def test_criterion_05_autonomy_never_hurts_homogeneous(report):
    rng = np.random.default_rng(5)
    grid = np.linspace(0, 1, 11)
    worst_rise = 0.0
    worst_gap = 0.0
    n_linear = 0
    for _ in range(50):
        net, demand, paths = netgen.random_network(rng, betas=(1, 2, 3, 4) if rng.random() < 0.6 else (1,),
                                                   max_supports=255)
        Js = [solve_mixed_homogeneous(net, demand.with_alphas([a]), paths).J for a in grid]
        for k in range(len(Js) - 1):
            worst_rise = max(worst_rise, (Js[k + 1] - Js[k]) / (1 + abs(Js[k])))
        if net.max_beta == 1:
            n_linear += 1
            for a, J in zip(grid, Js):
                es = equilibrium_set(net, demand.with_alphas([a]), paths, link_ranges=False)
                worst_gap = max(worst_gap, abs(es.J_min - J), abs(es.J_max - J))
    report(5, f"max relative rise {worst_rise:.2e} (<= 1e-6); "
              f"support-enum vs homogeneous {worst_gap:.2e} (<= 1e-4) on {n_linear} linear networks")
    assert worst_rise <= 1e-6
    assert n_linear > 0
    assert worst_gap <= 1e-4


def test_criterion_06_single_class_link_flows_unique(report):
    rng = np.random.default_rng(6)
    widest = 0.0
    for _ in range(50):
        net, demand, paths = netgen.random_network(rng, n_od=int(rng.integers(2, 4)), mu="mixed",
                                                   max_paths=4, max_supports=64)
        es = equilibrium_set(net, demand.with_alphas([0.0] * len(demand)), paths)
        widest = max(widest, float(np.max(es.link_max - es.link_min)))
    report(6, f"widest link-flow range {widest:.2e} (<= 1e-5)")
    assert widest <= 1e-5


def test_criterion_07_autonomy_bound(report):
    rng = np.random.default_rng(7)
    worst_lin = 0.0
    worst_poly = 0.0
    for _ in range(50):
        net, demand, paths = netgen.random_network(rng, n_od=int(rng.integers(1, 3)), max_paths=16)
        grid = [tuple(rng.uniform(0, 1, len(demand))) for _ in range(5)] + [(1.0,) * len(demand)]
        rep = autonomy_bound_check(net, demand, grid, paths)
        worst_lin = max(worst_lin, rep.max_ratio)

        net, demand, paths = netgen.random_network(rng, n_od=int(rng.integers(1, 3)), betas=(1, 2, 3, 4),
                                                   max_paths=16)
        grid = [tuple(rng.uniform(0, 1, len(demand))) for _ in range(5)]
        rep = autonomy_bound_check(net, demand, grid, paths)
        worst_poly = max(worst_poly, rep.max_ratio)
    report(7, f"max ratio linear {worst_lin:.4f} (<= 4/3), degree <= 4 {worst_poly:.4f} (<= 2.151)")
    assert worst_lin <= 4 / 3
    assert worst_poly <= 2.151


def test_criterion_08_grid_oracle(report):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(20):
        net, demand = netgen.two_path_instance(rng)
        es = equilibrium_set(net, demand, link_ranges=False)
        lo, hi = netgen.grid_oracle(net, demand)
        # the oracle range must reach over the exact one, up to 1e-2
        worst = max(worst, lo - es.J_min, es.J_max - hi, abs(lo - es.J_min), abs(hi - es.J_max))
    report(8, f"worst endpoint mismatch {worst:.2e} (<= 1e-2)")
    assert worst <= 1e-2


def test_criterion_09_lambda(report):
    rng = np.random.default_rng(9)
    exact = lambda_class_bound(1) == 0.25
    worst = -math.inf
    for _ in range(100):
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 5))
        family = [LinkParams(a=rng.uniform(0, 5), gamma=rng.uniform(0, 3), beta=float(rng.integers(1, d + 1)),
                             m=rng.uniform(0.5, 2), M=rng.uniform(0.5, 4)) for _ in range(n)]
        v = rng.uniform(0, 5, n)
        beta_max = int(max(p.beta for p in family))
        worst = max(worst, lambda_of_class(family, v) - lambda_class_bound(beta_max))
    report(9, f"lambda_class_bound(1) == 0.25: {exact}; max(instance - class) = {worst:.2e} (<= 0)")
    assert exact
    assert worst <= 1e-12


def _cli(*args):
    proc = subprocess.run([sys.executable, "-m", "autonomy_routing.cli", *args], capture_output=True)
    return proc.returncode, proc.stdout


def test_criterion_10_determinism(report):
    mismatched = []
    for name in NAMES:
        for args in (("solve", "--input", f"{name}.json"), ("sweep", "--input", f"{name}.json", "--grid", "11")):
            first, second = _cli(*args), _cli(*args)
            if first != second or first[0] != 0:
                mismatched.append(" ".join(args))
    report(10, f"{2 * len(NAMES)} commands run twice, mismatches: {mismatched or 'none'}")
    assert not mismatched
