"""Solver ótimo com compartilhamento de recursos (RS-UE e RS-SE)

Todos os pares D2D dividem um único canal. Um conjunto D de pares em D2D é
factível sse o raio espectral de H_D é menor que 1 e a solução mínima
p* = (I - H_D)^-1 eta_D respeita p_max.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from enum import StrEnum
from itertools import combinations
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from energy import (
    INFINITE,
    cellular_cost,
    cellular_powers,
    d2d_energy_ext,
    minimize_cellular_sum,
)
from errors import ContractViolation, DomainError, InfeasibleError
from fo import fo_value, solve_fo
from models import BnBNode, Mode, RsSolution, SolverStats
from scenario import WINDOW_RTOL
from schemas import EnergyObjective
from settings import settings

if TYPE_CHECKING:
    from scenario import LinkBudget

logger = logging.getLogger(__name__)

# Folga relativa na poda por limitante: lb e custo completo vêm de contas distintas
BOUND_RTOL = 1e-12


@dataclass(frozen=True)
class SinrSystem:
    """Forma matricial das restrições de SINR: p_D >= eta_D + H_D p_D"""

    gamma: np.ndarray
    eta: np.ndarray
    H: np.ndarray
    p_max: np.ndarray
    g_ll: np.ndarray
    cross: np.ndarray
    sigma2: float
    frame_t: float

    @property
    def size(self) -> int:
        return len(self.eta)


def build_sinr_system(budget: "LinkBudget") -> SinrSystem:
    rows = budget.rows
    frame_t = budget.frame_t
    b = np.array([row.b for row in rows])
    g_ll = np.array([row.g_ll for row in rows])
    sigma2 = budget.params.sigma2

    gamma = np.expm1(b / (budget.params.bandwidth_hz * frame_t))
    eta = gamma * sigma2 / g_ll
    # H[l, j] = gamma_l * G_jl / G_ll, com cross[j, l] = G_jl
    H = gamma[:, None] * budget.cross.T / g_ll[:, None]
    np.fill_diagonal(H, 0.0)

    for arr in (gamma, eta, H, g_ll):
        arr.setflags(write=False)
    return SinrSystem(
        gamma=gamma,
        eta=eta,
        H=H,
        p_max=np.full(len(rows), budget.params.p_max_ue),
        g_ll=g_ll,
        cross=budget.cross,
        sigma2=sigma2,
        frame_t=frame_t,
    )


def _strong_blocks(M: np.ndarray) -> List[np.ndarray]:
    """Índices de cada componente fortemente conexa com ao menos uma aresta"""
    n_comp, labels = connected_components(csr_matrix(M > 0), directed=True, connection="strong")
    blocks = []
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        if len(idx) > 1 or M[idx[0], idx[0]] > 0:
            blocks.append(idx)
    return blocks


def _perron_bounds(block: np.ndarray, threshold: Optional[float] = None) -> Tuple[float, float]:
    """Limites de Collatz-Wielandt para o raio espectral de um bloco irredutível

    Iteração de potência em I + block, que é primitiva. Com threshold, para
    assim que os limites decidem rho < threshold ou rho >= threshold.
    """
    n = block.shape[0]
    A = block + np.eye(n)
    x = np.ones(n)
    lo, hi = 0.0, math.inf
    for _ in range(settings.PF_MAX_ITERS):
        y = A @ x
        ratios = y / x
        lo = max(lo, float(ratios.min()) - 1.0)
        hi = min(hi, float(ratios.max()) - 1.0)
        if hi - lo <= settings.PF_TOL:
            break
        if threshold is not None and (hi < threshold or lo >= threshold):
            break
        x = y / y.max()
    return lo, hi


def spectral_radius(M: np.ndarray) -> float:
    """Raio espectral de uma matriz não negativa, bloco a bloco"""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0.0
    if np.any(M < 0):
        raise DomainError("matriz com entradas negativas")
    rho = 0.0
    for idx in _strong_blocks(M):
        lo, hi = _perron_bounds(M[np.ix_(idx, idx)])
        rho = max(rho, (lo + hi) / 2)
    return rho


class InfeasibleReason(StrEnum):
    SPECTRAL_RADIUS = "spectral_radius"
    POWER_LIMIT = "power_limit"


@dataclass(frozen=True)
class Feasibility:
    """Resultado do teste de factibilidade; power alinhado com pairs"""

    pairs: Tuple[int, ...]
    power: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reason: Optional[InfeasibleReason] = None

    @property
    def feasible(self) -> bool:
        return self.reason is None

    def __bool__(self) -> bool:
        return self.feasible


def _radius_below_one(Hd: np.ndarray) -> Optional[bool]:
    """True/False quando os limites decidem; None perto da fronteira"""
    decided = True
    for idx in _strong_blocks(Hd):
        lo, hi = _perron_bounds(Hd[np.ix_(idx, idx)], threshold=1.0)
        if lo >= 1.0:
            return False
        if hi >= 1.0:
            decided = None
    return decided


def d2d_set_feasible(sys: SinrSystem, D: Sequence[int]) -> Feasibility:
    pairs = tuple(sorted(D))
    if not pairs:
        return Feasibility(pairs=pairs)

    idx = np.array(pairs)
    Hd = sys.H[np.ix_(idx, idx)]
    eta = sys.eta[idx]
    identity = np.eye(len(idx))

    below = _radius_below_one(Hd)
    if below is False:
        return Feasibility(pairs=pairs, reason=InfeasibleReason.SPECTRAL_RADIUS)
    try:
        p = np.linalg.solve(identity - Hd, eta)
    except np.linalg.LinAlgError:
        return Feasibility(pairs=pairs, reason=InfeasibleReason.SPECTRAL_RADIUS)
    if below is None and not np.all(p >= 0):
        # Perto de rho = 1 decide a existência de solução não negativa
        return Feasibility(pairs=pairs, reason=InfeasibleReason.SPECTRAL_RADIUS)

    p = np.maximum(p, 0.0)
    if np.any(p > sys.p_max[idx]):
        return Feasibility(pairs=pairs, power=p, reason=InfeasibleReason.POWER_LIMIT)
    return Feasibility(pairs=pairs, power=p)


def cellular_common_time(budget: "LinkBudget", C: Sequence[int], obj: EnergyObjective) -> Tuple[float, float]:
    """(t_ul, sum E_CELL) do conjunto C compartilhando o mesmo t_ul"""
    if not C:
        return budget.frame_t, 0.0
    rows = [budget.rows[l] for l in C]
    lo = max(row.ul_lo for row in rows)
    hi = min(row.ul_hi for row in rows)
    if lo > hi + WINDOW_RTOL * budget.frame_t:
        raise InfeasibleError(f"sem t_ul comum ao conjunto celular {sorted(C)}")
    hi = max(hi, lo)
    t = minimize_cellular_sum(rows, lo, hi, obj)
    return t, float(sum(cellular_cost(row, t, obj) for row in rows))


def assemble_solution(
    budget: "LinkBudget",
    obj: EnergyObjective,
    feas: Feasibility,
    t_ul: float,
    stats: SolverStats,
    **extra,
) -> RsSolution:
    size = budget.size
    d2d = dict(zip(feas.pairs, feas.power.tolist()))
    modes, p_ul, p_dl, p_d2d, energies = [], [0.0] * size, [0.0] * size, [0.0] * size, []
    for l, row in enumerate(budget.rows):
        if l in d2d:
            modes.append(int(Mode.D2D))
            p_d2d[l] = d2d[l]
            energies.append(budget.frame_t * d2d[l])
        else:
            modes.append(int(Mode.CELLULAR))
            p_ul[l], p_dl[l] = cellular_powers(row, t_ul)
            energies.append(float(cellular_cost(row, t_ul, obj)))
    return RsSolution(
        objective=obj,
        t_ul_star=t_ul,
        modes=modes,
        p_ul=p_ul,
        p_dl=p_dl,
        p_d2d=p_d2d,
        pair_energy=energies,
        total_energy=sum(energies),
        stats=stats,
        **extra,
    )


def _complement(size: int, D: Sequence[int]) -> List[int]:
    members = set(D)
    return [l for l in range(size) if l not in members]


def _complete_cost(budget: "LinkBudget", feas: Feasibility, obj: EnergyObjective) -> Tuple[float, float]:
    """(custo total, t_ul) com os pares fora de feas.pairs em modo celular"""
    t_ul, cost = cellular_common_time(budget, _complement(budget.size, feas.pairs), obj)
    return cost + budget.frame_t * float(feas.power.sum()), t_ul


def rs_exhaustive(budget: "LinkBudget", sys: SinrSystem, obj: EnergyObjective) -> RsSolution:
    """Enumera os 2^L vetores por cardinalidade crescente de D

    Superconjuntos de um conjunto infactível são descartados sem teste.
    """
    size = budget.size
    if size > settings.EXHAUSTIVE_MAX_PAIRS:
        raise ContractViolation(f"busca exaustiva limitada a {settings.EXHAUSTIVE_MAX_PAIRS} pares, recebido {size}")

    started = time.perf_counter()
    stats = SolverStats()
    infeasible_masks: List[int] = []
    best: Optional[Tuple[float, float, Feasibility]] = None

    for k in range(size + 1):
        for D in combinations(range(size), k):
            mask = sum(1 << l for l in D)
            if any((mask & m) == m for m in infeasible_masks):
                stats.pruned_infeasible += 1
                continue
            stats.solutions_explored += 1
            feas = d2d_set_feasible(sys, D)
            if not feas:
                infeasible_masks.append(mask)
                continue
            total, t_ul = _complete_cost(budget, feas, obj)
            if best is None or total < best[0]:
                best = (total, t_ul, feas)

    if best is None:
        raise InfeasibleError("nenhum vetor de modos factível")
    stats.nodes_explored = stats.leaves_explored = stats.solutions_explored
    stats.wall_time = time.perf_counter() - started
    logger.info(
        "exaustiva: %d vetores avaliados, %d descartados, E=%.6g",
        stats.solutions_explored,
        stats.pruned_infeasible,
        best[0],
    )
    return assemble_solution(budget, obj, best[2], best[1], stats)


def branching_order(
    budget: "LinkBudget", obj: EnergyObjective, strategy: str = "proposed", seed: int = 0
) -> List[int]:
    """Ordem das variáveis de ramificação

    proposed: pares de D^FO por s_l decrescente (interferência gerada sobre os
    demais pares de D^FO, normalizada pelo próprio ganho), depois os restantes
    por economia E_CELL - E_D2D decrescente no ótimo FO. random: permutação.
    """
    if strategy == "random":
        return [int(l) for l in np.random.default_rng(seed).permutation(budget.size)]
    if strategy != "proposed":
        raise DomainError(f"estratégia de ramificação desconhecida: {strategy}")

    fo = solve_fo(budget, obj)
    d2d_fo = fo.d2d_set
    cross = budget.cross

    def strength(l: int) -> float:
        return sum(cross[l, i] for i in d2d_fo if i != l) / cross[l, l]

    def saving(l: int) -> float:
        e_d2d = d2d_energy_ext(budget.rows[l])
        if e_d2d.infinite:
            return -math.inf
        return cellular_cost(budget.rows[l], fo.t_ul_star, obj) - e_d2d.joules

    rest = [l for l in range(budget.size) if l not in set(d2d_fo)]
    return sorted(d2d_fo, key=strength, reverse=True) + sorted(rest, key=saving, reverse=True)


class BranchAndBound:
    """Busca em profundidade sobre m_l, filho D2D (m_l = 1) primeiro

    O incumbente começa com todos os pares em modo celular. Em cada filho D2D o
    conjunto fixado em D2D passa pelo teste de factibilidade (infactível poda a
    subárvore inteira) e a completação "restante em celular" atualiza o
    incumbente. O limitante inferior é o relaxamento FO sobre os pares livres,
    com ruído acrescido da interferência dos pares já fixados em D2D.
    """

    def __init__(
        self,
        budget: "LinkBudget",
        sys: SinrSystem,
        obj: EnergyObjective,
        order: Sequence[int],
        record_nodes: bool = False,
    ):
        if sorted(order) != list(range(budget.size)):
            raise DomainError(f"ordem de ramificação inválida: {list(order)}")
        self.budget = budget
        self.sys = sys
        self.obj = obj
        self.order = list(order)
        self.record_nodes = record_nodes
        self.stats = SolverStats()
        self.nodes: List[BnBNode] = []
        self.best_cost = math.inf
        self.best: Optional[Tuple[float, Feasibility]] = None

    def _offer(self, feas: Feasibility) -> None:
        total, t_ul = _complete_cost(self.budget, feas, self.obj)
        self.stats.solutions_explored += 1
        if total < self.best_cost:
            logger.debug("novo incumbente: D=%s, E=%.17g", list(feas.pairs), total)
            self.best_cost = total
            self.best = (t_ul, feas)

    def lower_bound(self, feas: Feasibility, cellular: Sequence[int]) -> float:
        budget = self.budget
        fixed_d2d = set(feas.pairs)
        fixed_cell = set(cellular)
        interference = feas.power @ self.sys.cross[np.array(feas.pairs, dtype=int)] if feas.pairs else None

        rows, d2d = [], []
        for l, row in enumerate(budget.rows):
            if l in fixed_d2d:
                continue
            rows.append(row)
            if l in fixed_cell:
                d2d.append(INFINITE)
            else:
                d2d.append(d2d_energy_ext(row, 0.0 if interference is None else float(interference[l])))

        _, value = fo_value(rows, d2d, self.obj, budget.frame_t)
        if value.infinite:
            return math.inf
        return budget.frame_t * float(feas.power.sum()) + value.joules

    def _record(self, parent: Optional[int], depth: int, feas: Feasibility, cellular: Sequence[int], lb) -> int:
        index = self.stats.nodes_explored
        self.stats.nodes_explored += 1
        if self.record_nodes:
            fixed: Dict[int, int] = {l: int(Mode.D2D) for l in feas.pairs}
            fixed.update({l: int(Mode.CELLULAR) for l in cellular})
            self.nodes.append(
                BnBNode(
                    index=index,
                    parent=parent,
                    depth=depth,
                    fixed=fixed,
                    lower_bound=None if lb is None or math.isinf(lb) else lb,
                )
            )
        return index

    def _pruned(self, lb: float) -> bool:
        if lb >= self.best_cost * (1 - BOUND_RTOL):
            self.stats.pruned_bound += 1
            return True
        return False

    def branch(self, node: int, depth: int, feas: Feasibility, cellular: List[int]) -> None:
        if depth == len(self.order):
            self.stats.leaves_explored += 1
            return
        l = self.order[depth]

        child = d2d_set_feasible(self.sys, (*feas.pairs, l))
        if not child:
            self._record(node, depth + 1, child, cellular, None)
            self.stats.pruned_infeasible += 1
            logger.debug("nó podado: D=%s infactível (%s)", list(child.pairs), child.reason)
        else:
            self._offer(child)
            lb = self.lower_bound(child, cellular)
            index = self._record(node, depth + 1, child, cellular, lb)
            if not self._pruned(lb):
                self.branch(index, depth + 1, child, cellular)

        # A completação do filho celular coincide com a do pai, já avaliada
        cellular_child = [*cellular, l]
        lb = self.lower_bound(feas, cellular_child)
        index = self._record(node, depth + 1, feas, cellular_child, lb)
        if not self._pruned(lb):
            self.branch(index, depth + 1, feas, cellular_child)

    def run(self) -> RsSolution:
        started = time.perf_counter()
        root = Feasibility(pairs=())
        self._offer(root)
        lb = self.lower_bound(root, [])
        index = self._record(None, 0, root, [], lb)
        if not self._pruned(lb):
            self.branch(index, 0, root, [])
        self.stats.wall_time = time.perf_counter() - started

        t_ul, feas = self.best
        logger.info(
            "B&B: %d nós, %d soluções, %d podados por infactibilidade, %d por limitante, E=%.6g",
            self.stats.nodes_explored,
            self.stats.solutions_explored,
            self.stats.pruned_infeasible,
            self.stats.pruned_bound,
            self.best_cost,
        )
        return assemble_solution(self.budget, self.obj, feas, t_ul, self.stats, nodes=self.nodes)


def rs_branch_and_bound(
    budget: "LinkBudget",
    sys: SinrSystem,
    obj: EnergyObjective,
    strategy: str = "proposed",
    seed: int = 0,
    record_nodes: bool = False,
) -> RsSolution:
    order = branching_order(budget, obj, strategy, seed)
    return BranchAndBound(budget, sys, obj, order, record_nodes=record_nodes).run()
