"""Construção, validação, serialização e geração aleatória de cenários"""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from energy import cellular_feasible, rate
from errors import DomainError, InfeasibleError, ScenarioParseError
from schemas import CellScenario, PhysParams, UserPair
from settings import settings

logger = logging.getLogger(__name__)

# Folga relativa (a T) na comparação ul_lo <= ul_hi: a demanda de borda
# fecha a janela exatamente e o arredondamento não pode invertê-la.
WINDOW_RTOL = 1e-12

MAX_RESAMPLES = 1000


@dataclass(frozen=True, slots=True)
class PairBudget:
    """Grandezas derivadas de um par: ganhos, taxas máximas e janela de UL"""

    id: int
    b: float
    g_ll: float
    g_l0: float
    g_0l: float
    r_ul_max: float
    r_dl_max: float
    r_d2d_max: float
    ul_lo: float
    ul_hi: float
    sigma2: float
    bandwidth_hz: float
    frame_t: float
    p_max_ue: float
    p_max_bs: float


@dataclass(frozen=True)
class LinkBudget:
    """Orçamento de enlace da célula; cross[j, l] é o ganho de Tx-j para Rx-l"""

    params: PhysParams
    rows: Tuple[PairBudget, ...]
    cross: np.ndarray

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def frame_t(self) -> float:
        return self.params.frame_t

    @property
    def common_window(self) -> Tuple[float, float]:
        """Intervalo de t_ul factível para todos os pares em modo celular"""
        return max(r.ul_lo for r in self.rows), min(r.ul_hi for r in self.rows)


def pathloss_gain(d: float, params: PhysParams) -> float:
    """G = G0 * d^(-alpha)"""
    if not d > 0:
        raise DomainError(f"distância deve ser positiva, recebido {d}")
    return params.ref_gain * d ** (-params.pathloss_exponent)


def floored_gain(d: float, params: PhysParams) -> float:
    """Ganho com a distância limitada por baixo em MIN_DISTANCE (G <= G0)"""
    return pathloss_gain(max(d, settings.MIN_DISTANCE), params)


def _airtime(b: float, r: float) -> float:
    if b == 0:
        return 0.0
    if r <= 0:
        return math.inf
    return b / r


def pair_budget(
    pair_id: int, b: float, g_ll: float, g_l0: float, g_0l: float, params: PhysParams
) -> PairBudget:
    sigma2 = params.sigma2
    w = params.bandwidth_hz
    t = params.frame_t

    r_ul = rate(params.p_max_ue, g_l0, sigma2, 0.0, w)
    r_dl = rate(params.p_max_bs, g_0l, sigma2, 0.0, w)
    r_d2d = rate(params.p_max_ue, g_ll, sigma2, 0.0, w)

    ul_lo = _airtime(b, r_ul)
    ul_hi = t - _airtime(b, r_dl)
    if ul_hi < ul_lo <= ul_hi + WINDOW_RTOL * t:
        ul_hi = ul_lo

    return PairBudget(
        id=pair_id,
        b=b,
        g_ll=g_ll,
        g_l0=g_l0,
        g_0l=g_0l,
        r_ul_max=r_ul,
        r_dl_max=r_dl,
        r_d2d_max=r_d2d,
        ul_lo=ul_lo,
        ul_hi=ul_hi,
        sigma2=sigma2,
        bandwidth_hz=w,
        frame_t=t,
        p_max_ue=params.p_max_ue,
        p_max_bs=params.p_max_bs,
    )


def _pair_gains(pair: UserPair, bs: Tuple[float, float], params: PhysParams) -> Tuple[float, float, float]:
    d_l0 = math.dist(pair.tx, bs)
    d_0l = math.dist(bs, pair.rx)
    if d_l0 <= 0 or d_0l <= 0:
        raise DomainError(f"par {pair.id}: terminal na mesma posição da BS")
    return (
        floored_gain(math.dist(pair.tx, pair.rx), params),
        floored_gain(d_l0, params),
        floored_gain(d_0l, params),
    )


def build_link_budget(s: CellScenario) -> LinkBudget:
    params = s.params
    rows = []
    for pair in s.pairs:
        g_ll, g_l0, g_0l = _pair_gains(pair, s.bs, params)
        rows.append(pair_budget(pair.id, pair.b, g_ll, g_l0, g_0l, params))

    infeasible = [row.id for row in rows if not cellular_feasible(row)]
    if infeasible:
        raise InfeasibleError(f"pares sem suporte em modo celular: {infeasible}")

    lo, hi = max(r.ul_lo for r in rows), min(r.ul_hi for r in rows)
    if lo > hi + WINDOW_RTOL * params.frame_t:
        raise InfeasibleError(f"sem t_ul comum aos pares: max ul_lo={lo} > min ul_hi={hi}")

    size = len(s.pairs)
    cross = np.empty((size, size))
    for j, tx_pair in enumerate(s.pairs):
        for l, rx_pair in enumerate(s.pairs):
            cross[j, l] = rows[l].g_ll if j == l else floored_gain(math.dist(tx_pair.tx, rx_pair.rx), params)
    cross.setflags(write=False)

    return LinkBudget(params=params, rows=tuple(rows), cross=cross)


def edge_demand(
    params: PhysParams, ul_distance: Optional[float] = None, dl_distance: Optional[float] = None
) -> float:
    """Maior demanda comum suportada com Tx a ul_distance e Rx a dl_distance da BS (padrão: borda)"""
    ul_distance = params.cell_radius if ul_distance is None else ul_distance
    dl_distance = params.cell_radius if dl_distance is None else dl_distance
    r_ul = rate(params.p_max_ue, pathloss_gain(ul_distance, params), params.sigma2, 0.0, params.bandwidth_hz)
    r_dl = rate(params.p_max_bs, pathloss_gain(dl_distance, params), params.sigma2, 0.0, params.bandwidth_hz)
    if r_ul + r_dl == 0:
        return 0.0
    return r_ul * r_dl / (r_ul + r_dl) * params.frame_t


def _sample_disc(rng: np.random.Generator, radius: float) -> Tuple[float, float]:
    r = radius * math.sqrt(rng.random())
    angle = 2 * math.pi * rng.random()
    return (r * math.cos(angle), r * math.sin(angle))


def random_scenario(L: int, seed: int, params: Optional[PhysParams] = None) -> CellScenario:
    """Pares posicionados uniformemente no disco, demanda comum de borda"""
    if L < 1:
        raise DomainError(f"L deve ser >= 1, recebido {L}")
    params = params or PhysParams()
    rng = np.random.default_rng(seed)
    b = edge_demand(params)
    bs = (0.0, 0.0)

    pairs: List[UserPair] = []
    for pair_id in range(1, L + 1):
        for _ in range(MAX_RESAMPLES):
            pair = UserPair(
                id=pair_id,
                tx=_sample_disc(rng, params.cell_radius),
                rx=_sample_disc(rng, params.cell_radius),
                b=b,
            )
            try:
                row = pair_budget(pair_id, b, *_pair_gains(pair, bs, params), params)
            except DomainError:
                continue
            if cellular_feasible(row):
                break
            logger.debug("seed %d: par %d reamostrado (inviável em modo celular)", seed, pair_id)
        else:
            raise InfeasibleError(f"par {pair_id} inviável após {MAX_RESAMPLES} amostras")
        pairs.append(pair)

    return CellScenario(params=params, bs=bs, pairs=pairs, seed=seed)


def save_scenario(s: CellScenario, path: str | Path) -> None:
    Path(path).write_text(s.model_dump_json(indent=2), encoding="utf-8")


def load_scenario(path: str | Path) -> CellScenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"JSON inválido: {exc.msg}", line=exc.lineno) from exc
    return parse_scenario(data)


def parse_scenario(data: object) -> CellScenario:
    try:
        return CellScenario.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or None
        raise ScenarioParseError(first["msg"], field=field) from exc
