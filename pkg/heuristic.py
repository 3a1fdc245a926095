"""Controle de potência distribuído com troca de modo para RS-UE

Parte da solução FO-UE. A cada iteração os pares em D2D atualizam a potência
pela regra de Foschini-Miljanic usando só a própria SINR medida; um par cuja
potência passa de min{(theta/T) E_CELL(t_ul^FO), p_max} migra para o modo
celular e não volta. Ao final a BS recalcula o t_ul comum dos pares celulares.
"""

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from energy import cellular_cost
from errors import ContractViolation
from fo import solve_fo
from models import HeuristicStep, HeuristicTrace, Mode, RsSolution, SolverStats
from rs import SinrSystem, assemble_solution, cellular_common_time, d2d_set_feasible
from schemas import EnergyObjective, HeuristicConfig

if TYPE_CHECKING:
    from scenario import LinkBudget

logger = logging.getLogger(__name__)

# Potência inicial mínima: mantém a atualização multiplicativa definida quando b = 0
POWER_FLOOR = 1e-30


def perceived_sinr(sys: SinrSystem, D: Sequence[int], p: np.ndarray) -> np.ndarray:
    """gamma_l = p_l G_ll / (sigma2 + sum_{j em D, j != l} p_j G_jl); zero fora de D"""
    p = np.asarray(p, dtype=float)
    sinr = np.zeros(sys.size)
    if len(D) == 0:
        return sinr
    idx = np.array(sorted(D))
    received = p[idx][:, None] * sys.cross[np.ix_(idx, idx)]
    interference = received.sum(axis=0) - np.diag(received)
    sinr[idx] = p[idx] * sys.g_ll[idx] / (sys.sigma2 + interference)
    return sinr


def fm_update(sys: SinrSystem, D: Sequence[int], p: np.ndarray) -> np.ndarray:
    """p' = (gamma_tgt / gamma) p nos pares de D; os demais ficam em zero"""
    sinr = perceived_sinr(sys, D, p)
    updated = np.zeros(sys.size)
    for l in D:
        if sinr[l] <= 0:
            raise ContractViolation(f"par {l + 1} com SINR nula na atualização de potência")
        updated[l] = sys.gamma[l] / sinr[l] * p[l]
    return updated


def _meets_target(sys: SinrSystem, D: Sequence[int], sinr: np.ndarray, tol: float) -> bool:
    return all(sinr[l] >= sys.gamma[l] * (1 - tol) for l in D)


def run_heuristic(
    budget: "LinkBudget", sys: SinrSystem, cfg: Optional[HeuristicConfig] = None
) -> Tuple[RsSolution, HeuristicTrace]:
    cfg = cfg or HeuristicConfig()
    started = time.perf_counter()
    obj = EnergyObjective.USER
    frame_t = budget.frame_t

    fo = solve_fo(budget, obj)
    active: List[int] = list(fo.d2d_set)
    p = np.zeros(budget.size)
    for l in active:
        p[l] = max(fo.p_d2d[l], POWER_FLOOR)

    # Custo celular congelado em t_ul(m^FO), informado pela BS a cada par de D^FO
    cap = np.full(budget.size, np.inf)
    for l in active:
        e_cell = float(cellular_cost(budget.rows[l], fo.t_ul_star, obj))
        cap[l] = min(cfg.theta / frame_t * e_cell, sys.p_max[l])

    trace = HeuristicTrace()
    modes = list(fo.modes)
    switched: List[int] = []
    converged = False
    iteration = 0
    while True:
        sinr = perceived_sinr(sys, active, p)
        trace.steps.append(
            HeuristicStep(
                iteration=iteration,
                power=p.tolist(),
                sinr=sinr.tolist(),
                modes=list(modes),
                switched=[l + 1 for l in switched],
            )
        )
        if _meets_target(sys, active, sinr, cfg.sinr_tol):
            converged = True
            break
        if iteration == cfg.max_iters:
            break

        iteration += 1
        p = fm_update(sys, active, p)
        switched = [l for l in active if p[l] > cap[l]]
        for l in switched:
            logger.debug("iteração %d: par %d passa para o modo celular (p=%.3g > %.3g)", iteration, l + 1, p[l], cap[l])
            modes[l] = int(Mode.CELLULAR)
            p[l] = 0.0
        active = [l for l in active if l not in switched]
        p[active] = np.maximum(p[active], POWER_FLOOR)

    feas = d2d_set_feasible(sys, active)
    while not feas:
        # Só sem convergência: descarta o par mais próximo do próprio limite
        worst = max(active, key=lambda l: p[l] / cap[l])
        logger.warning("conjunto D2D final infactível (%s); par %d vai para o celular", feas.reason, worst + 1)
        active.remove(worst)
        feas = d2d_set_feasible(sys, active)

    C = [l for l in range(budget.size) if l not in set(active)]
    t_ul, _ = cellular_common_time(budget, C, obj)

    stats = SolverStats(iterations=iteration, solutions_explored=1, wall_time=time.perf_counter() - started)
    solution = assemble_solution(budget, obj, feas, t_ul, stats, converged=converged)
    if converged:
        logger.info(
            "heurística (theta=%.3g): %d iterações, %d pares em D2D, E=%.6g",
            cfg.theta,
            iteration,
            len(active),
            solution.total_energy,
        )
    else:
        logger.warning("heurística sem convergência após %d iterações", cfg.max_iters)
    return solution, trace


def write_trace_csv(trace: HeuristicTrace, path: str | Path) -> Path:
    """Uma linha por (iteração, par) para gráficos de convergência"""
    records = []
    for step in trace.steps:
        for l, (power, sinr, mode) in enumerate(zip(step.power, step.sinr, step.modes)):
            records.append(
                {
                    "iteration": step.iteration,
                    "pair": l + 1,
                    "power": power,
                    "sinr": sinr,
                    "mode": mode,
                    "switched": int(l + 1 in step.switched),
                }
            )
    path = Path(path)
    pd.DataFrame.from_records(
        records, columns=["iteration", "pair", "power", "sinr", "mode", "switched"]
    ).to_csv(path, index=False, float_format="%.17g")
    return path
