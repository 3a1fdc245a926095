"""Taxas, energias e seleção de modo ótima para um único par

Unidades internas: W, Hz, s e nats (log natural). Todas as funções são puras.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from errors import DomainError, InfeasibleError
from models import Mode, SinglePairSolution
from schemas import EnergyObjective
from settings import settings

if TYPE_CHECKING:
    from scenario import PairBudget

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class ExtendedEnergy:
    """Energia em [0, +inf]; o infinito é um estado explícito, nunca um float"""

    joules: float = 0.0
    infinite: bool = False

    @classmethod
    def finite(cls, joules: float) -> "ExtendedEnergy":
        return cls(joules=float(joules))

    def admits(self, joules: float) -> bool:
        """joules <= self"""
        return self.infinite or joules <= self.joules

    def __add__(self, other: "ExtendedEnergy") -> "ExtendedEnergy":
        if self.infinite or other.infinite:
            return INFINITE
        return ExtendedEnergy(self.joules + other.joules)

    def __lt__(self, other: "ExtendedEnergy") -> bool:
        if self.infinite:
            return False
        return other.infinite or self.joules < other.joules

    def __le__(self, other: "ExtendedEnergy") -> bool:
        return not other < self


INFINITE = ExtendedEnergy(infinite=True)


def rate(p: float, G: float, sigma2: float, I: float, W_hz: float) -> float:
    """Capacidade de Shannon W*ln(1 + pG/(sigma2 + I)) em nats/s"""
    if p < 0 or I < 0 or not G > 0 or not sigma2 > 0:
        raise DomainError(f"rate fora do domínio: p={p}, G={G}, sigma2={sigma2}, I={I}")
    return W_hz * math.log1p(p * G / (sigma2 + I))


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError("tempo de transmissão deve ser positivo")


def link_power(t, b: float, G: float, noise: float, W_hz: float):
    """Potência mínima para entregar b nats em t segundos: (exp(b/(Wt)) - 1) noise/G"""
    _check_time(t)
    if isinstance(t, np.ndarray):
        if b == 0:
            return np.zeros_like(t, dtype=float)
        with np.errstate(over="ignore"):
            return np.expm1(b / (W_hz * t)) * noise / G
    if b == 0:
        return 0.0
    return _scalar_expm1(b / (W_hz * t)) * noise / G


def _scalar_expm1(x: float) -> float:
    try:
        return math.expm1(x)
    except OverflowError:
        return math.inf


def _link_energy(t, b: float, G: float, noise: float, W_hz: float):
    return link_power(t, b, G, noise, W_hz) * t


def energy_ul(t, b: float, G_l0: float, sigma2: float, W_hz: float):
    return _link_energy(t, b, G_l0, sigma2, W_hz)


def energy_dl(t, b: float, G_0l: float, sigma2: float, W_hz: float):
    return _link_energy(t, b, G_0l, sigma2, W_hz)


def energy_d2d(t, b: float, G_ll: float, sigma2: float, I: float, W_hz: float):
    if I < 0:
        raise DomainError(f"interferência negativa: {I}")
    return _link_energy(t, b, G_ll, sigma2 + I, W_hz)


def _energy_slope(t: float, b: float, G: float, noise: float, W_hz: float) -> float:
    """d/dt de (exp(b/(Wt)) - 1) t noise/G; negativa para b > 0"""
    if b == 0:
        return 0.0
    x = b / (W_hz * t)
    return (math.expm1(x) - x * math.exp(x)) * noise / G


def cellular_cost(row: "PairBudget", t, obj: EnergyObjective):
    """E_CELL(t): UL (UE) ou UL + DL com t_dl = T - t (SE)"""
    if row.b == 0:
        return np.zeros_like(t, dtype=float) if isinstance(t, np.ndarray) else 0.0
    cost = energy_ul(t, row.b, row.g_l0, row.sigma2, row.bandwidth_hz)
    if obj is EnergyObjective.SYSTEM:
        cost = cost + energy_dl(row.frame_t - t, row.b, row.g_0l, row.sigma2, row.bandwidth_hz)
    return cost


def cellular_slope(row: "PairBudget", t: float, obj: EnergyObjective) -> float:
    slope = _energy_slope(t, row.b, row.g_l0, row.sigma2, row.bandwidth_hz)
    if obj is EnergyObjective.SYSTEM:
        slope -= _energy_slope(row.frame_t - t, row.b, row.g_0l, row.sigma2, row.bandwidth_hz)
    return slope


def minimize_cellular_sum(
    rows: Sequence["PairBudget"], lo: float, hi: float, obj: EnergyObjective
) -> float:
    """Minimizador de sum E_CELL(t) em [lo, hi]

    UE: soma decrescente, ótimo em hi. SE: soma convexa, bisseção na derivada.
    """
    if obj is EnergyObjective.USER or lo >= hi:
        return hi

    def slope(t: float) -> float:
        return sum(cellular_slope(row, t, obj) for row in rows)

    if slope(lo) >= 0:
        return lo
    if slope(hi) <= 0:
        return hi
    frame_t = rows[0].frame_t
    return brentq(slope, lo, hi, xtol=settings.BISECTION_XTOL * frame_t)


def cellular_feasible(row: "PairBudget") -> bool:
    """Existe (t_ul, t_dl) com b/r_ul <= t_ul, b/r_dl <= t_dl e t_ul + t_dl <= T"""
    return row.ul_lo <= row.ul_hi


def d2d_feasible(row: "PairBudget") -> bool:
    return row.r_d2d_max * row.frame_t >= row.b


def d2d_power(row: "PairBudget", I: float = 0.0) -> float:
    """Potência D2D mínima ocupando o quadro inteiro sob interferência I"""
    return link_power(row.frame_t, row.b, row.g_ll, row.sigma2 + I, row.bandwidth_hz)


def d2d_energy_ext(row: "PairBudget", I: float = 0.0) -> ExtendedEnergy:
    """Energia D2D estendida: finita sse o par é factível em D2D sob interferência I"""
    if I < 0:
        raise DomainError(f"interferência negativa: {I}")
    feasible = d2d_feasible(row) if I == 0 else d2d_power(row, I) <= row.p_max_ue
    if not feasible:
        return INFINITE
    return ExtendedEnergy.finite(energy_d2d(row.frame_t, row.b, row.g_ll, row.sigma2, I, row.bandwidth_hz))


def cellular_energy_opt(row: "PairBudget", obj: EnergyObjective) -> Tuple[float, float]:
    """(t_ul*, E_CELL(t_ul*)) do par isolado"""
    if not cellular_feasible(row):
        raise InfeasibleError(f"par {row.id} não é factível em modo celular")
    if row.b == 0:
        return row.ul_hi, 0.0
    t_star = minimize_cellular_sum([row], row.ul_lo, row.ul_hi, obj)
    return t_star, cellular_cost(row, t_star, obj)


def cellular_powers(row: "PairBudget", t_ul: float) -> Tuple[float, float]:
    """Potências ótimas de UL e DL com t_dl = T - t_ul"""
    if row.b == 0:
        return 0.0, 0.0
    p_ul = link_power(t_ul, row.b, row.g_l0, row.sigma2, row.bandwidth_hz)
    p_dl = link_power(row.frame_t - t_ul, row.b, row.g_0l, row.sigma2, row.bandwidth_hz)
    return p_ul, p_dl


def single_pair_select(row: "PairBudget", obj: EnergyObjective) -> SinglePairSolution:
    """Modo de menor energia; empate fica com o celular"""
    t_star, e_cell = cellular_energy_opt(row, obj)
    e_d2d = d2d_energy_ext(row)

    if e_d2d.admits(e_cell):
        p_ul, p_dl = cellular_powers(row, t_star)
        return SinglePairSolution(
            mode=Mode.CELLULAR,
            t_ul_star=t_star,
            p_ul=p_ul,
            p_dl=p_dl,
            energy=e_cell,
            e_cell=e_cell,
            e_d2d=None if e_d2d.infinite else e_d2d.joules,
        )

    return SinglePairSolution(
        mode=Mode.D2D,
        p_d2d=d2d_power(row),
        energy=e_d2d.joules,
        e_cell=e_cell,
        e_d2d=e_d2d.joules,
    )
