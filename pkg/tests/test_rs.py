from itertools import combinations

import numpy as np
import pytest

from conftest import isolated
from energy import d2d_energy_ext, d2d_feasible, d2d_power
from errors import ContractViolation, DomainError
from fo import solve_fo
from models import Mode
from rs import (
    BranchAndBound,
    InfeasibleReason,
    SinrSystem,
    branching_order,
    build_sinr_system,
    cellular_common_time,
    d2d_set_feasible,
    rs_branch_and_bound,
    rs_exhaustive,
    spectral_radius,
)
from scenario import build_link_budget
from schemas import EnergyObjective
from settings import settings


def synthetic(H, eta, p_max=1.0) -> SinrSystem:
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    return SinrSystem(
        gamma=np.ones(n),
        eta=np.asarray(eta, dtype=float),
        H=H,
        p_max=np.full(n, p_max),
        g_ll=np.ones(n),
        cross=np.eye(n),
        sigma2=1.0,
        frame_t=1.0,
    )


def completion_cost(budget, sys, D, obj):
    feas = d2d_set_feasible(sys, D)
    if not feas:
        return None
    C = [l for l in range(budget.size) if l not in set(D)]
    _, cost = cellular_common_time(budget, C, obj)
    return cost + budget.frame_t * float(feas.power.sum())


def test_spectral_radius_of_two_cycle():
    assert spectral_radius(np.array([[0.0, 0.3], [1.2, 0.0]])) == pytest.approx(0.6, rel=1e-9)


def test_spectral_radius_of_reducible_matrices():
    assert spectral_radius(np.zeros((0, 0))) == 0.0
    assert spectral_radius(np.triu(np.ones((4, 4)), k=1)) == 0.0
    M = np.zeros((4, 4))
    M[0, 1], M[1, 0] = 0.5, 0.5
    M[2, 3], M[3, 2] = 2.0, 2.0
    M[1, 2] = 7.0
    assert spectral_radius(M) == pytest.approx(2.0, rel=1e-9)


def test_spectral_radius_rejects_negative_entries():
    with pytest.raises(DomainError):
        spectral_radius(np.array([[0.0, -1.0], [1.0, 0.0]]))


@pytest.mark.parametrize("seed", range(8))
def test_spectral_radius_matches_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    M = rng.random((6, 6)) * rng.random((6, 6)) ** 3
    np.fill_diagonal(M, 0.0)
    assert spectral_radius(M) == pytest.approx(np.abs(np.linalg.eigvals(M)).max(), rel=1e-6)


def test_empty_set_is_feasible():
    feas = d2d_set_feasible(synthetic(np.zeros((2, 2)), [0.1, 0.1]), [])
    assert feas and feas.pairs == () and feas.power.size == 0


def test_feasible_pair_reaches_fixed_point():
    H = np.array([[0.0, 0.3], [1.2, 0.0]])
    sys = synthetic(H, [1e-3, 2e-3])
    feas = d2d_set_feasible(sys, [1, 0])
    assert feas.feasible
    assert feas.pairs == (0, 1)
    assert np.allclose(feas.power, sys.eta + H @ feas.power, rtol=1e-12)


def test_strong_coupling_is_infeasible():
    feas = d2d_set_feasible(synthetic([[0.0, 1.0], [1.5, 0.0]], [1e-3, 1e-3]), [0, 1])
    assert not feas
    assert feas.reason is InfeasibleReason.SPECTRAL_RADIUS


def test_power_limit_is_reported():
    feas = d2d_set_feasible(synthetic([[0.0, 0.1], [0.1, 0.0]], [0.5, 2.0], p_max=1.0), [0, 1])
    assert feas.reason is InfeasibleReason.POWER_LIMIT
    assert feas.power[1] > 1.0


@pytest.mark.parametrize("seed", range(20))
def test_feasibility_agrees_with_linear_algebra(seed):
    rng = np.random.default_rng(seed)
    H = rng.random((5, 5)) * rng.uniform(0.05, 0.6)
    np.fill_diagonal(H, 0.0)
    eta = rng.uniform(1e-3, 5e-2, 5)
    rho = np.abs(np.linalg.eigvals(H)).max()
    if abs(rho - 1) < 1e-6:
        pytest.skip("raio espectral na fronteira")
    expected = False
    if rho < 1:
        p = np.linalg.solve(np.eye(5) - H, eta)
        if np.any(np.abs(p - 1.0) < 1e-9):
            pytest.skip("potência na fronteira")
        expected = bool(np.all(p <= 1.0))
    assert d2d_set_feasible(synthetic(H, eta), range(5)).feasible is expected


def neumann_oracle(H, eta, p_max, iters=5000):
    """p <- eta + H p a partir de zero; None quando a série não converge"""
    p = np.zeros_like(eta)
    for _ in range(iters):
        nxt = eta + H @ p
        if np.max(np.abs(nxt - p)) <= 1e-15 * np.max(nxt):
            return nxt
        if not np.all(np.isfinite(nxt)) or np.max(nxt) > 1e6 * p_max:
            return None
        p = nxt
    return None


@pytest.mark.slow
def test_feasibility_agrees_with_neumann_series():
    rng = np.random.default_rng(2015)
    compared = 0
    for _ in range(1000):
        n = int(rng.integers(2, 6))
        H = rng.random((n, n)) * rng.uniform(0.05, 0.6)
        np.fill_diagonal(H, 0.0)
        eta = rng.uniform(1e-3, 5e-2, n)
        rho = np.abs(np.linalg.eigvals(H)).max()
        # Longe da fronteira rho = 1 a série decide em poucas iterações
        if abs(rho - 1) < 1e-2:
            continue
        limit = neumann_oracle(H, eta, 1.0)
        if limit is not None and np.any(np.abs(limit - 1.0) < 1e-9):
            continue
        expected = limit is not None and bool(np.all(limit <= 1.0))
        feas = d2d_set_feasible(synthetic(H, eta), range(n))
        assert feas.feasible is expected
        if limit is None:
            assert feas.reason is InfeasibleReason.SPECTRAL_RADIUS
        compared += 1
    assert compared >= 900


@pytest.mark.parametrize("seed", range(10))
def test_two_pair_radius_closed_form(seed):
    rng = np.random.default_rng(seed)
    h12, h21 = rng.uniform(0.05, 3.0, 2)
    H = np.array([[0.0, h12], [h21, 0.0]])
    assert spectral_radius(H) == pytest.approx(np.sqrt(h12 * h21), abs=1e-10)
    if abs(h12 * h21 - 1) > 1e-6:
        feas = d2d_set_feasible(synthetic(H, [1e-6, 1e-6]), [0, 1])
        assert (feas.reason is InfeasibleReason.SPECTRAL_RADIUS) is (h12 * h21 >= 1)


def infeasible_supersets(sys, size):
    """Pares (D, S) com D infactível, S superconjunto de D e S factível"""
    infeasible = [
        set(D)
        for k in range(1, size + 1)
        for D in combinations(range(size), k)
        if not d2d_set_feasible(sys, D)
    ]
    violations = [
        (D, S)
        for D in infeasible
        for k in range(len(D) + 1, size + 1)
        for S in combinations(range(size), k)
        if D <= set(S) and d2d_set_feasible(sys, S)
    ]
    return infeasible, violations


@pytest.mark.parametrize("seed", range(20))
def test_supersets_of_infeasible_sets_are_infeasible(budget_factory, seed):
    _, violations = infeasible_supersets(build_sinr_system(budget_factory(6, seed)), 6)
    assert violations == []


@pytest.mark.parametrize("seed", range(10))
def test_supersets_of_infeasible_sets_are_infeasible_when_coupled(seed):
    rng = np.random.default_rng(300 + seed)
    H = rng.random((6, 6)) * rng.uniform(0.3, 0.6)
    np.fill_diagonal(H, 0.0)
    infeasible, violations = infeasible_supersets(synthetic(H, rng.uniform(1e-2, 0.2, 6)), 6)
    assert infeasible
    assert violations == []


@pytest.mark.parametrize("seed", range(6))
def test_subsets_of_feasible_sets_need_less_power(seed):
    rng = np.random.default_rng(100 + seed)
    H = rng.random((6, 6)) * 0.12
    np.fill_diagonal(H, 0.0)
    sys = synthetic(H, rng.uniform(1e-3, 1e-2, 6))
    full = d2d_set_feasible(sys, range(6))
    assert full
    for k in range(1, 6):
        for D in combinations(range(6), k):
            sub = d2d_set_feasible(sys, D)
            assert sub
            assert np.all(sub.power <= full.power[list(D)] * (1 + 1e-12))


def test_sinr_system_from_budget(three_pair_scenario):
    budget = build_link_budget(three_pair_scenario)
    sys = build_sinr_system(budget)
    assert sys.size == 3
    assert np.all(np.diag(sys.H) == 0)
    assert np.allclose(sys.eta, sys.gamma * budget.params.sigma2 / sys.g_ll)
    assert sys.H[0, 1] == pytest.approx(sys.gamma[0] * budget.cross[1, 0] / budget.cross[0, 0])
    assert np.all(sys.p_max == budget.params.p_max_ue)


def test_single_pair_matches_isolated_d2d(budget_factory):
    budget = budget_factory(10, 3)
    sys = build_sinr_system(budget)
    for l, row in enumerate(budget.rows):
        feas = d2d_set_feasible(sys, [l])
        assert feas.feasible is d2d_feasible(row)
        if feas:
            assert feas.power[0] == pytest.approx(d2d_power(row), rel=1e-12)


def test_coupled_pairs_cannot_share(coupled_scenario):
    budget = build_link_budget(coupled_scenario)
    sys = build_sinr_system(budget)
    assert d2d_set_feasible(sys, [0])
    assert d2d_set_feasible(sys, [1])
    assert d2d_set_feasible(sys, [0, 1]).reason is InfeasibleReason.SPECTRAL_RADIUS

    exhaustive = rs_exhaustive(budget, sys, EnergyObjective.USER)
    bnb = rs_branch_and_bound(budget, sys, EnergyObjective.USER)
    assert len(exhaustive.d2d_set) == 1
    assert bnb.modes == exhaustive.modes
    assert exhaustive.stats.solutions_explored == 4


def test_cellular_common_time_of_empty_set(two_pair_scenario):
    budget = build_link_budget(two_pair_scenario)
    assert cellular_common_time(budget, [], EnergyObjective.SYSTEM) == (budget.frame_t, 0.0)


def test_exhaustive_refuses_large_instances(monkeypatch, three_pair_scenario):
    monkeypatch.setattr(settings, "EXHAUSTIVE_MAX_PAIRS", 2)
    budget = build_link_budget(three_pair_scenario)
    with pytest.raises(ContractViolation):
        rs_exhaustive(budget, build_sinr_system(budget), EnergyObjective.USER)


@pytest.mark.parametrize("obj", list(EnergyObjective))
@pytest.mark.parametrize("pairs", range(4, 9))
@pytest.mark.parametrize("seed", range(3))
def test_branch_and_bound_matches_exhaustive(budget_factory, obj, pairs, seed):
    budget = budget_factory(pairs, seed)
    sys = build_sinr_system(budget)
    reference = rs_exhaustive(budget, sys, obj)
    for strategy in ("proposed", "random"):
        sol = rs_branch_and_bound(budget, sys, obj, strategy=strategy, seed=seed)
        assert sol.total_energy == pytest.approx(reference.total_energy, rel=1e-9)
        assert sol.stats.nodes_explored <= 2 ** (pairs + 1) - 1


@pytest.mark.slow
@pytest.mark.parametrize("pairs", range(4, 11))
def test_branch_and_bound_matches_exhaustive_at_scale(budget_factory, pairs):
    for seed in range(29):
        budget = budget_factory(pairs, 1000 + seed)
        sys = build_sinr_system(budget)
        reference = rs_exhaustive(budget, sys, EnergyObjective.USER)
        sol = rs_branch_and_bound(budget, sys, EnergyObjective.USER)
        assert sol.total_energy == pytest.approx(reference.total_energy, rel=1e-9)


@pytest.mark.parametrize("obj", list(EnergyObjective))
@pytest.mark.parametrize("seed", range(4))
def test_shared_channel_costs_at_least_orthogonal(budget_factory, obj, seed):
    budget = budget_factory(10, seed)
    rs = rs_branch_and_bound(budget, build_sinr_system(budget), obj)
    fo = solve_fo(budget, obj)
    _, all_cellular = cellular_common_time(budget, range(budget.size), obj)
    assert fo.total_energy <= rs.total_energy * (1 + 1e-9)
    assert rs.total_energy <= all_cellular * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(4))
def test_solution_respects_limits(budget_factory, seed):
    budget = budget_factory(10, seed)
    sol = rs_branch_and_bound(budget, build_sinr_system(budget), EnergyObjective.SYSTEM)
    assert sum(sol.pair_energy) == pytest.approx(sol.total_energy)
    for l, row in enumerate(budget.rows):
        if sol.modes[l] == Mode.D2D:
            assert 0 <= sol.p_d2d[l] <= row.p_max_ue * (1 + 1e-9)
        else:
            assert row.ul_lo - 1e-12 <= sol.t_ul_star <= row.ul_hi + 1e-12
            assert sol.p_ul[l] <= row.p_max_ue * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_lower_bounds_never_exceed_completions(budget_factory, seed):
    budget = budget_factory(6, seed)
    sys = build_sinr_system(budget)
    obj = EnergyObjective.USER
    sol = rs_branch_and_bound(budget, sys, obj, record_nodes=True)
    assert len(sol.nodes) == sol.stats.nodes_explored
    for node in sol.nodes:
        if node.lower_bound is None:
            continue
        fixed_d2d = [l for l, m in node.fixed.items() if m == Mode.D2D]
        free = [l for l in range(budget.size) if l not in node.fixed]
        costs = [
            completion_cost(budget, sys, fixed_d2d + list(extra), obj)
            for k in range(len(free) + 1)
            for extra in combinations(free, k)
        ]
        costs = [c for c in costs if c is not None]
        if costs:
            assert node.lower_bound <= min(costs) * (1 + 1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_tight_bound_explores_few_nodes(budget_factory, seed):
    budget = isolated(budget_factory(8, seed))
    sys = build_sinr_system(budget)
    sol = rs_branch_and_bound(budget, sys, EnergyObjective.USER)
    assert sol.stats.nodes_explored <= 4 * budget.size + 1
    assert sol.modes == solve_fo(budget, EnergyObjective.USER).modes


def test_branching_order(budget_factory):
    budget = budget_factory(10, 5)
    order = branching_order(budget, EnergyObjective.USER)
    fo = solve_fo(budget, EnergyObjective.USER)
    assert sorted(order) == list(range(10))
    assert set(order[: len(fo.d2d_set)]) == set(fo.d2d_set)
    assert branching_order(budget, EnergyObjective.USER, "random", 3) == branching_order(
        budget, EnergyObjective.USER, "random", 3
    )
    with pytest.raises(DomainError):
        branching_order(budget, EnergyObjective.USER, "greedy")


def test_invalid_order_is_rejected(two_pair_scenario):
    budget = build_link_budget(two_pair_scenario)
    with pytest.raises(DomainError):
        BranchAndBound(budget, build_sinr_system(budget), EnergyObjective.USER, [0, 0])


def test_branching_prefers_d2d_savings(budget_factory):
    budget = budget_factory(10, 6)
    order = branching_order(budget, EnergyObjective.USER)
    fo = solve_fo(budget, EnergyObjective.USER)
    rest = order[len(fo.d2d_set) :]
    infinite = [l for l in rest if d2d_energy_ext(budget.rows[l]).infinite]
    assert rest[len(rest) - len(infinite) :] == infinite
