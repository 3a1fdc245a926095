import dataclasses

import numpy as np
import pytest

from scenario import build_link_budget, edge_demand, random_scenario
from schemas import CellScenario, PhysParams, UserPair


@pytest.fixture
def params() -> PhysParams:
    return PhysParams()


@pytest.fixture
def demand(params) -> float:
    return edge_demand(params)


def make_scenario(layout, params=None, b=None) -> CellScenario:
    """layout: lista de (tx, rx); demanda de borda quando b é None"""
    params = params or PhysParams()
    b = edge_demand(params) if b is None else b
    pairs = [UserPair(id=i + 1, tx=tx, rx=rx, b=b) for i, (tx, rx) in enumerate(layout)]
    return CellScenario(params=params, pairs=pairs)


def isolated(budget, factor: float = 1e-9):
    """Mesmo orçamento com ganhos cruzados reduzidos por factor"""
    cross = np.array(budget.cross, copy=True)
    diagonal = np.diag(cross).copy()
    cross *= factor
    np.fill_diagonal(cross, diagonal)
    cross.setflags(write=False)
    return dataclasses.replace(budget, cross=cross)


@pytest.fixture
def two_pair_scenario() -> CellScenario:
    return make_scenario([((100.0, 0.0), (110.0, 0.0)), ((-200.0, 50.0), (-210.0, 60.0))])


@pytest.fixture
def three_pair_scenario() -> CellScenario:
    return make_scenario(
        [
            ((120.0, 40.0), (135.0, 45.0)),
            ((-80.0, 300.0), (-60.0, 310.0)),
            ((150.0, -200.0), (-250.0, 100.0)),
        ]
    )


@pytest.fixture
def coupled_scenario() -> CellScenario:
    """Tx do par 2 a 1 m do Rx do par 1; o inverso fica a 60 m"""
    return make_scenario([((100.0, 0.0), (130.0, 0.0)), ((131.0, 0.0), (160.0, 0.0))])


@pytest.fixture
def scenario_factory():
    def factory(pairs: int, seed: int, params=None):
        return random_scenario(pairs, seed, params)

    return factory


@pytest.fixture
def budget_factory(scenario_factory):
    def factory(pairs: int, seed: int):
        return build_link_budget(scenario_factory(pairs, seed))

    return factory
