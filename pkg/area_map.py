"""Mapas da região em que o modo D2D é ótimo para um único par

O Tx fica em (d, 0) e o Rx percorre a grade de centros de células sobre
[-R, R]^2. A demanda é a maior suportada com o Rx na borda da célula. No caso
UE a classificação é refeita pela regra de distâncias D_ll < kappa(D_0l) D_l0.
"""

import logging
import math
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Dict, Optional

import numpy as np
import pandas as pd

from energy import d2d_feasible, single_pair_select
from errors import DomainError
from models import Mode
from scenario import PairBudget, edge_demand, floored_gain, pair_budget
from schemas import EnergyObjective, PhysParams, Point
from settings import settings

logger = logging.getLogger(__name__)


class AreaClass(StrEnum):
    D2D_OPTIMAL = "d2d"
    CELLULAR_OPTIMAL = "cellular"
    D2D_INFEASIBLE = "d2d_infeasible"
    EXCLUDED = "excluded"


def _budget(params: PhysParams, tx: Point, rx: Point, b: float) -> Optional[PairBudget]:
    d_l0 = math.hypot(*tx)
    d_0l = math.hypot(*rx)
    if d_l0 == 0 or d_0l == 0:
        return None
    return pair_budget(
        1,
        b,
        floored_gain(math.dist(tx, rx), params),
        floored_gain(d_l0, params),
        floored_gain(d_0l, params),
        params,
    )


def classify_rx(params: PhysParams, tx: Point, rx: Point, b: float, obj: EnergyObjective) -> AreaClass:
    """Classe de uma posição do Rx pela comparação direta de energias"""
    if math.hypot(*rx) > params.cell_radius:
        return AreaClass.EXCLUDED
    row = _budget(params, tx, rx, b)
    if row is None:
        return AreaClass.EXCLUDED
    if not d2d_feasible(row):
        return AreaClass.D2D_INFEASIBLE
    if single_pair_select(row, obj).mode is Mode.D2D:
        return AreaClass.D2D_OPTIMAL
    return AreaClass.CELLULAR_OPTIMAL


def kappa_distance(row: PairBudget, params: PhysParams) -> float:
    """kappa(D_0l) para o objetivo UE

    D2D é estritamente melhor sse G_ll > c G_l0, com
    c = (exp(b/WT) - 1) T / ((exp(b/W t*) - 1) t*) e t* = ul_hi, ou seja,
    D_ll < c^(-1/alpha) D_l0. O D_0l entra por t*.
    """
    w, t = row.bandwidth_hz, row.frame_t
    t_star = row.ul_hi
    c = math.expm1(row.b / (w * t)) * t / (math.expm1(row.b / (w * t_star)) * t_star)
    return c ** (-1.0 / params.pathloss_exponent)


def _kappa_class(row: PairBudget, params: PhysParams, tx: Point, rx: Point, k: float) -> AreaClass:
    if not d2d_feasible(row):
        return AreaClass.D2D_INFEASIBLE
    d_ll = max(math.dist(tx, rx), settings.MIN_DISTANCE)
    d_l0 = max(math.hypot(*tx), settings.MIN_DISTANCE)
    return AreaClass.D2D_OPTIMAL if d_ll < k * d_l0 else AreaClass.CELLULAR_OPTIMAL


@dataclass(frozen=True)
class AreaMap:
    tx: Point
    demand: float
    objective: EnergyObjective
    xs: np.ndarray
    ys: np.ndarray
    classes: np.ndarray
    kappa: np.ndarray
    kappa_agreement: Optional[float]
    max_kappa_deviation: Optional[float]

    @property
    def counts(self) -> Dict[str, int]:
        values, counts = np.unique(self.classes, return_counts=True)
        out = {c.value: 0 for c in AreaClass}
        out.update({str(v): int(n) for v, n in zip(values, counts)})
        return out

    @property
    def d2d_fraction(self) -> float:
        """Fração das posições válidas do Rx em que D2D é ótimo"""
        counts = self.counts
        valid = sum(n for c, n in counts.items() if c != AreaClass.EXCLUDED)
        return counts[AreaClass.D2D_OPTIMAL] / valid if valid else 0.0

    def summary(self) -> Dict[str, object]:
        return {
            "tx": list(self.tx),
            "demand": self.demand,
            "objective": self.objective.value,
            "resolution": len(self.xs),
            "counts": self.counts,
            "d2d_fraction": self.d2d_fraction,
            "kappa_agreement": self.kappa_agreement,
            "max_kappa_deviation": self.max_kappa_deviation,
        }

    def to_frame(self) -> pd.DataFrame:
        gx, gy = np.meshgrid(self.xs, self.ys, indexing="xy")
        return pd.DataFrame(
            {
                "x": gx.ravel(),
                "y": gy.ravel(),
                "class": self.classes.ravel(),
                "kappa": self.kappa.ravel(),
            }
        )

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def d2d_area_map(
    tx_distance: float,
    resolution: Optional[int] = None,
    obj: EnergyObjective = EnergyObjective.USER,
    params: Optional[PhysParams] = None,
) -> AreaMap:
    params = params or PhysParams()
    resolution = resolution or settings.MAP_RESOLUTION
    radius = params.cell_radius
    if not 0 < tx_distance < radius:
        raise DomainError(f"distância do Tx deve estar em (0, R={radius}), recebido {tx_distance}")
    if resolution < 1:
        raise DomainError(f"resolução deve ser >= 1, recebido {resolution}")

    tx = (float(tx_distance), 0.0)
    b = edge_demand(params, ul_distance=tx_distance, dl_distance=radius)
    step = 2 * radius / resolution
    centers = -radius + step * (np.arange(resolution) + 0.5)

    classes = np.full((resolution, resolution), AreaClass.EXCLUDED.value, dtype=object)
    kappas = np.full((resolution, resolution), np.nan)
    check_kappa = obj is EnergyObjective.USER
    agree = total = 0

    for i, y in enumerate(centers):
        for j, x in enumerate(centers):
            rx = (float(x), float(y))
            cls = classify_rx(params, tx, rx, b, obj)
            classes[i, j] = cls.value
            if not check_kappa or cls is AreaClass.EXCLUDED:
                continue
            row = _budget(params, tx, rx, b)
            k = kappa_distance(row, params)
            kappas[i, j] = k
            total += 1
            agree += cls is _kappa_class(row, params, tx, rx, k)

    agreement = agree / total if check_kappa and total else None
    deviation = float(np.nanmax(np.abs(kappas - 1))) if check_kappa and total else None
    if agreement is not None and agreement < 1:
        logger.warning("regra de kappa diverge da comparação direta em %d de %d posições", total - agree, total)
    area = AreaMap(
        tx=tx,
        demand=b,
        objective=obj,
        xs=centers,
        ys=centers,
        classes=classes,
        kappa=kappas,
        kappa_agreement=agreement,
        max_kappa_deviation=deviation,
    )
    logger.info("mapa D2D: tx=%.1f m, %dx%d, fração D2D=%.3f", tx_distance, resolution, resolution, area.d2d_fraction)
    return area
