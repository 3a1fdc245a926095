"""Solver ótimo com canais totalmente ortogonais (FO-SE e FO-UE)

Sem interferência entre pares D2D, o problema misto-inteiro se reduz à
minimização em t_ul de F(t_ul) = sum_l E_l(t_ul), contínua por partes: em cada
intervalo entre pontos de quebra tau_l^min / tau_l^max, F é convexa (SE) ou
decrescente (UE).
"""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

from scipy.optimize import brentq

from energy import (
    INFINITE,
    ExtendedEnergy,
    cellular_cost,
    cellular_energy_opt,
    cellular_powers,
    d2d_energy_ext,
    d2d_power,
    minimize_cellular_sum,
)
from errors import DomainError
from models import FoSolution, Mode, PairInterval
from schemas import EnergyObjective
from settings import settings

if TYPE_CHECKING:
    from scenario import LinkBudget, PairBudget

logger = logging.getLogger(__name__)


def _crossing(row: "PairBudget", obj: EnergyObjective, level: float, lo: float, hi: float) -> float:
    return brentq(
        lambda t: cellular_cost(row, t, obj) - level,
        lo,
        hi,
        xtol=settings.BISECTION_XTOL * row.frame_t,
    )


def _interval(row: "PairBudget", obj: EnergyObjective, e_d2d: ExtendedEnergy) -> PairInterval:
    lo, hi = row.ul_lo, row.ul_hi
    if e_d2d.infinite:
        return PairInterval(pair_id=row.id, lo=lo, hi=hi)

    level = e_d2d.joules
    if obj is EnergyObjective.USER:
        # E_CELL decrescente: no máximo um cruzamento
        if cellular_cost(row, hi, obj) > level:
            return PairInterval(pair_id=row.id)
        if cellular_cost(row, lo, obj) <= level:
            return PairInterval(pair_id=row.id, lo=lo, hi=hi)
        return PairInterval(pair_id=row.id, lo=_crossing(row, obj, level, lo, hi), hi=hi)

    # SE: E_CELL convexa, até dois cruzamentos em volta do mínimo
    t_min, e_min = cellular_energy_opt(row, obj)
    if e_min > level:
        return PairInterval(pair_id=row.id)
    left = lo if cellular_cost(row, lo, obj) <= level else _crossing(row, obj, level, lo, t_min)
    right = hi if cellular_cost(row, hi, obj) <= level else _crossing(row, obj, level, t_min, hi)
    return PairInterval(pair_id=row.id, lo=left, hi=right)


def pair_interval(row: "PairBudget", obj: EnergyObjective, interference: float = 0.0) -> PairInterval:
    return _interval(row, obj, d2d_energy_ext(row, interference))


@dataclass(frozen=True, slots=True)
class Segment:
    lo: float
    hi: float
    active: Tuple[int, ...]
    constant: float
    infinite: bool


@dataclass(frozen=True)
class PiecewiseCost:
    """F(t_ul) como pontos de quebra ordenados e conjunto ativo por intervalo"""

    objective: EnergyObjective
    frame_t: float
    rows: Tuple["PairBudget", ...]
    d2d: Tuple[ExtendedEnergy, ...]
    deltas: Tuple[PairInterval, ...]
    breakpoints: Tuple[float, ...]
    segments: Tuple[Segment, ...]

    def segment_at(self, t: float) -> Optional[Segment]:
        """Intervalo que contém t no interior; None em pontos de quebra"""
        idx = bisect.bisect_right(self.breakpoints, t) - 1
        seg = self.segments[min(max(idx, 0), len(self.segments) - 1)]
        return seg if seg.lo < t < seg.hi else None

    def pair_cost(self, l: int, t: float, active: bool) -> ExtendedEnergy:
        if not active:
            return self.d2d[l]
        e_cell = cellular_cost(self.rows[l], t, self.objective)
        return ExtendedEnergy.finite(e_cell) if self.d2d[l].admits(e_cell) else self.d2d[l]

    def evaluate(self, t: float) -> ExtendedEnergy:
        if not 0 <= t <= self.frame_t:
            raise DomainError(f"t_ul={t} fora de [0, T]")

        seg = self.segment_at(t)
        if seg is not None:
            if seg.infinite:
                return INFINITE
            total = ExtendedEnergy.finite(seg.constant)
            for l in seg.active:
                total = total + self.pair_cost(l, t, True)
            return total

        total = ExtendedEnergy.finite(0.0)
        for l, delta in enumerate(self.deltas):
            total = total + self.pair_cost(l, t, delta.contains(t))
        return total

    def candidates(self) -> List[Segment]:
        """Intervalos com algum par em modo celular e custo finito

        Os demais têm F constante igual a sum E_D2D, que nenhum par ativo supera;
        isso exclui em particular o primeiro e o último intervalo.
        """
        return [seg for seg in self.segments if seg.active and not seg.infinite]


def _build(
    rows: Sequence["PairBudget"], d2d: Sequence[ExtendedEnergy], obj: EnergyObjective, frame_t: float
) -> PiecewiseCost:
    deltas = [_interval(row, obj, e) for row, e in zip(rows, d2d)]
    tol = settings.BREAKPOINT_TOL * frame_t

    points = sorted({0.0, frame_t, *(p for d in deltas if not d.empty for p in (d.lo, d.hi))})
    breakpoints: List[float] = []
    for p in points:
        if not breakpoints or p - breakpoints[-1] > tol:
            breakpoints.append(p)
        elif p == frame_t:
            breakpoints[-1] = frame_t

    segments = []
    for a, b in zip(breakpoints, breakpoints[1:]):
        active = tuple(l for l, d in enumerate(deltas) if not d.empty and d.lo <= a + tol and d.hi >= b - tol)
        rest = [d2d[l] for l in range(len(rows)) if l not in active]
        constant = sum((e.joules for e in rest if not e.infinite), 0.0)
        segments.append(Segment(a, b, active, constant, any(e.infinite for e in rest)))

    logger.debug("F(t_ul): %d pontos de quebra, %d intervalos", len(breakpoints), len(segments))
    return PiecewiseCost(
        objective=obj,
        frame_t=frame_t,
        rows=tuple(rows),
        d2d=tuple(d2d),
        deltas=tuple(deltas),
        breakpoints=tuple(breakpoints),
        segments=tuple(segments),
    )


def build_piecewise(budget: "LinkBudget", obj: EnergyObjective) -> PiecewiseCost:
    return _build(budget.rows, [d2d_energy_ext(row) for row in budget.rows], obj, budget.frame_t)


def _minimize(pw: PiecewiseCost) -> Tuple[float, ExtendedEnergy]:
    if all(d.empty for d in pw.deltas):
        # Nenhum par restringe t_ul: convenção t_ul* = T
        return pw.frame_t, pw.evaluate(pw.frame_t)

    if pw.objective is EnergyObjective.USER:
        points = sorted({d.hi for d in pw.deltas if not d.empty})
    else:
        points = [
            minimize_cellular_sum([pw.rows[l] for l in seg.active], seg.lo, seg.hi, pw.objective)
            for seg in pw.candidates()
        ]
        # Extremos dos Delta cobrem janelas degeneradas (ul_lo == ul_hi), sem interior
        points += sorted({p for d in pw.deltas if not d.empty for p in (d.lo, d.hi)})

    best: Optional[Tuple[float, ExtendedEnergy]] = None
    for t in points:
        value = pw.evaluate(t)
        if best is None or value < best[1] or (value <= best[1] and t < best[0]):
            best = (t, value)
    return best


def fo_value(
    rows: Sequence["PairBudget"], d2d: Sequence[ExtendedEnergy], obj: EnergyObjective, frame_t: float
) -> Tuple[float, ExtendedEnergy]:
    """(t_ul*, F(t_ul*)) para um subconjunto de pares com custos D2D dados"""
    if not rows:
        return frame_t, ExtendedEnergy.finite(0.0)
    return _minimize(_build(rows, d2d, obj, frame_t))


def solve_fo(budget: "LinkBudget", obj: EnergyObjective) -> FoSolution:
    pw = build_piecewise(budget, obj)
    t_star, value = _minimize(pw)
    if value.infinite:
        # Só acontece sem janela comum de UL, o que build_link_budget já rejeita
        raise DomainError("F(t_ul) sem valor finito")

    nonempty = [d for d in pw.deltas if not d.empty]
    overlap = bool(nonempty) and max(d.lo for d in nonempty) <= min(d.hi for d in nonempty)
    if overlap and obj is EnergyObjective.USER and t_star != min(d.hi for d in nonempty):
        logger.info("Delta_l sobrepostos, mas t_ul*=%.17g difere de min tau_max", t_star)

    size = budget.size
    modes, p_ul, p_dl, p_d2d, energies = [], [0.0] * size, [0.0] * size, [0.0] * size, []
    for l, row in enumerate(budget.rows):
        in_window = row.ul_lo <= t_star <= row.ul_hi
        e_cell = cellular_cost(row, t_star, obj) if in_window else None
        if e_cell is not None and pw.d2d[l].admits(e_cell):
            modes.append(Mode.CELLULAR)
            p_ul[l], p_dl[l] = cellular_powers(row, t_star)
            energies.append(e_cell)
        else:
            modes.append(Mode.D2D)
            p_d2d[l] = d2d_power(row)
            energies.append(pw.d2d[l].joules)

    logger.debug("FO-%s: t_ul*=%.6g, %d pares em D2D", obj.value.upper(), t_star, sum(modes))
    return FoSolution(
        objective=obj,
        t_ul_star=t_star,
        modes=[int(m) for m in modes],
        p_ul=p_ul,
        p_dl=p_dl,
        p_d2d=p_d2d,
        pair_energy=energies,
        total_energy=sum(energies),
        intervals=list(pw.deltas),
        overlap=overlap,
    )
