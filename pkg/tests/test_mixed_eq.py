import numpy as np
import pytest

from autonomy_routing import (
    FlowVector, InfeasibleFlowError, SupportLimitError, UnsupportedExponentError, enumerate_paths,
    equilibrium_set, load_example, solve_mixed_homogeneous, verify_equilibrium,
)
from autonomy_routing.assign import baseline_game, solve_single_class
from autonomy_routing.mixed_eq import count_supports, lift_flows
import netgen


@pytest.fixture
def two_route():
    net, demand = load_example("fig1")
    return net, demand, enumerate_paths(net)


def test_verify_accepts_equilibrium(two_route):
    net, demand, paths = two_route
    rep = verify_equilibrium(net, demand, paths, FlowVector([0.25, 0.75], [1.0, 0.0]))
    assert rep.passed
    assert rep.path_delays == pytest.approx([3.5, 3.5])


def test_verify_reports_violation(two_route):
    net, demand, paths = two_route
    rep = verify_equilibrium(net, demand, paths, FlowVector([1.0, 0.0], [1.0, 0.0]))
    assert not rep.passed
    # each loaded link: 1 + 1 + 1/2
    assert rep.path_delays == pytest.approx([5.0, 2.0])
    assert (rep.worst.od, rep.worst.path, rep.worst.better_path) == (0, 0, 1)
    assert rep.worst.slack == pytest.approx(3.0)


def test_verify_rejects_unbalanced(two_route):
    net, demand, paths = two_route
    with pytest.raises(InfeasibleFlowError) as err:
        verify_equilibrium(net, demand, paths, FlowVector([1.0, 0.0], [0.0, 0.0]))
    assert "od 0 autonomous" in err.value.residuals


def test_two_route_equilibrium_set(two_route):
    net, demand, paths = two_route
    es = equilibrium_set(net, demand, paths, od_ranges=True)
    assert es.link_min == pytest.approx([0.75] * 4, abs=1e-6)
    assert es.link_max == pytest.approx([1.25] * 4, abs=1e-6)
    assert (es.J_min, es.J_max) == pytest.approx((7, 7), abs=1e-6)
    assert es.od_min == pytest.approx([3.5], abs=1e-6)
    for s in es.feasible_supports:
        assert verify_equilibrium(net, demand, paths, s.witness_min).passed
        assert verify_equilibrium(net, demand, paths, s.witness_max).passed


@pytest.mark.parametrize("alpha, which, expected", [
    (0.0, "J_max", 2724 / 5),
    (1 / 3, "J_max", 552.0),
    (1.0, "J_max", 39060 / 71),
    (88 / 123, "J_min", 22260 / 41),
])
def test_braess_set_coordinates(alpha, which, expected):
    net, demand = load_example("ex4")
    es = equilibrium_set(net, demand.with_alphas([alpha]), link_ranges=False)
    assert getattr(es, which) == pytest.approx(expected, abs=1e-6)


def test_printed_asymmetry_variant_differs():
    net, demand = load_example("ex4_printed")
    es = equilibrium_set(net, demand.with_alphas([1.0]), link_ranges=False)
    assert abs(es.J_max - 39060 / 71) > 0.05


def test_full_autonomy_unique_on_homogeneous():
    rng = np.random.default_rng(21)
    for _ in range(15):
        net, demand, paths = netgen.random_network(rng, max_supports=255)
        es = equilibrium_set(net, demand.with_alphas([1.0]), paths, link_ranges=False)
        assert es.J_max - es.J_min <= 1e-6 * (1 + es.J_max)


def test_cross_solver_agreement_and_witnesses():
    rng = np.random.default_rng(22)
    for _ in range(20):
        net, demand, paths = netgen.random_network(rng, max_supports=255)
        es = equilibrium_set(net, demand, paths, link_ranges=False)
        sol = solve_mixed_homogeneous(net, demand, paths)
        assert es.J_min == pytest.approx(sol.J, abs=1e-4)
        assert es.J_max == pytest.approx(sol.J, abs=1e-4)
        assert verify_equilibrium(net, demand, paths, sol.witness).passed
        assert verify_equilibrium(net, demand, paths, es.witness_min).passed
        assert verify_equilibrium(net, demand, paths, es.witness_max).passed


def test_heterogeneous_witnesses_verify():
    rng = np.random.default_rng(23)
    for _ in range(15):
        net, demand, paths = netgen.random_network(rng, n_od=2, mu="mixed", max_paths=4, max_supports=64)
        es = equilibrium_set(net, demand, paths, link_ranges=False)
        assert es.J_min <= es.J_max + 1e-9
        for s in es.feasible_supports:
            assert verify_equilibrium(net, demand, paths, s.witness_min).passed


def test_single_class_collapse():
    rng = np.random.default_rng(24)
    for _ in range(15):
        net, demand, paths = netgen.random_network(rng, n_od=2, mu="mixed", max_paths=4, max_supports=64)
        es = equilibrium_set(net, demand.with_alphas([0, 0]), paths)
        assert np.max(es.link_max - es.link_min) <= 1e-5


def test_grid_oracle_brackets_set():
    rng = np.random.default_rng(25)
    for _ in range(5):
        net, demand = netgen.two_path_instance(rng)
        es = equilibrium_set(net, demand, link_ranges=False)
        lo, hi = netgen.grid_oracle(net, demand, n=801)
        assert lo <= es.J_min + 1e-2 and hi >= es.J_max - 1e-2


def test_homogeneous_two_route():
    net, demand = load_example("fig1")
    sol = solve_mixed_homogeneous(net, demand)
    assert sol.J == pytest.approx(7.0, abs=1e-9)
    assert sol.od_delays == pytest.approx([3.5])


def test_homogeneous_without_autonomy_is_baseline():
    net, demand = load_example("ex5")
    demand = demand.with_alphas([0, 0, 0])
    sol = solve_mixed_homogeneous(net, demand)
    base = solve_single_class(baseline_game(net, demand))
    assert sol.J == pytest.approx(base.social_delay(demand.demands))


def test_three_pair_half_autonomy():
    net, demand = load_example("ex5")
    sol = solve_mixed_homogeneous(net, demand.with_alphas([0.5, 0, 0]))
    assert sol.J == pytest.approx(10752.5, abs=1)


def test_lift_keeps_reduced_flow(two_route):
    net, demand, paths = two_route
    sol = solve_mixed_homogeneous(net, demand, paths)
    f = sol.witness
    assert f.regular + 0.5 * f.autonomous == pytest.approx(sol.assignment.path_flows)
    again = lift_flows(sol.game, demand, sol.assignment.path_flows)
    assert again.regular == pytest.approx(f.regular)


def test_guards():
    net, demand = load_example("ex2")
    paths = enumerate_paths(net)
    assert count_supports(paths) == 7
    with pytest.raises(SupportLimitError):
        equilibrium_set(net, demand, paths, max_supports=3)
    rng = np.random.default_rng(0)
    net, demand, paths = netgen.random_network(rng, betas=(2,))
    with pytest.raises(UnsupportedExponentError):
        equilibrium_set(net, demand, paths)
