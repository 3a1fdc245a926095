from enum import IntEnum
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from schemas import EnergyObjective


class Mode(IntEnum):
    CELLULAR = 0
    D2D = 1


class SinglePairSolution(BaseModel):
    """Modo ótimo e alocação de um par isolado"""

    mode: Mode
    t_ul_star: Optional[float] = Field(default=None, description="Definido só no modo celular")
    p_ul: Optional[float] = None
    p_dl: Optional[float] = None
    p_d2d: Optional[float] = None
    energy: float = Field(ge=0)
    e_cell: float
    e_d2d: Optional[float] = Field(default=None, description="None quando inviável em D2D")


class PairInterval(BaseModel):
    """Delta_l: valores de t_ul em que o celular custa no máximo o D2D"""

    pair_id: int
    lo: Optional[float] = None
    hi: Optional[float] = None

    @property
    def empty(self) -> bool:
        return self.lo is None

    def contains(self, t: float) -> bool:
        return not self.empty and self.lo <= t <= self.hi


class Allocation(BaseModel):
    """Solução completa: modos, t_ul comum, potências e energias por par"""

    objective: EnergyObjective
    t_ul_star: float
    modes: List[int]
    p_ul: List[float]
    p_dl: List[float]
    p_d2d: List[float]
    pair_energy: List[float]
    total_energy: float

    @property
    def d2d_set(self) -> List[int]:
        return [l for l, m in enumerate(self.modes) if m == Mode.D2D]

    @property
    def cellular_set(self) -> List[int]:
        return [l for l, m in enumerate(self.modes) if m == Mode.CELLULAR]

    def channels(self, shared: bool) -> int:
        """Canais ortogonais usados; com compartilhamento, todos os D2D ocupam um só"""
        d2d = len(self.d2d_set)
        return len(self.cellular_set) + (min(d2d, 1) if shared else d2d)


class FoSolution(Allocation):
    intervals: List[PairInterval]
    overlap: bool = Field(description="max tau_min <= min tau_max entre os Delta não vazios")


class SolverStats(BaseModel):
    nodes_explored: int = 0
    solutions_explored: int = 0
    leaves_explored: int = 0
    pruned_infeasible: int = 0
    pruned_bound: int = 0
    iterations: int = 0
    wall_time: float = 0.0


class BnBNode(BaseModel):
    """Nó explorado da árvore; fixed mapeia índice do par -> modo"""

    index: int
    parent: Optional[int] = None
    depth: int
    fixed: Dict[int, int]
    lower_bound: Optional[float] = Field(default=None, description="None quando o nó é inviável")


class RsSolution(Allocation):
    stats: SolverStats = Field(default_factory=SolverStats)
    converged: bool = True
    nodes: List[BnBNode] = Field(default_factory=list)


class HeuristicStep(BaseModel):
    iteration: int
    power: List[float]
    sinr: List[float]
    modes: List[int]
    switched: List[int] = Field(default_factory=list)


class HeuristicTrace(BaseModel):
    steps: List[HeuristicStep] = Field(default_factory=list)


class ResultRow(BaseModel):
    """Uma linha (seed, solver) da campanha"""

    seed: Optional[int] = None
    solver: str
    theta: Optional[float] = None
    pairs: int
    total_energy: Optional[float] = None
    pair_energy: List[float] = Field(default_factory=list)
    modes: List[int] = Field(default_factory=list)
    channels: Optional[int] = None
    t_ul_star: Optional[float] = None
    nodes_explored: Optional[int] = None
    solutions_explored: Optional[int] = None
    wall_time: float = 0.0
    error: Optional[str] = None
