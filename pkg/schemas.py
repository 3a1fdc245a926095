import math
from enum import StrEnum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from settings import settings

Point = Tuple[float, float]


class EnergyObjective(StrEnum):
    """Custo de energia no modo celular: sistema (UL + DL) ou só usuário (UL)"""

    SYSTEM = "se"
    USER = "ue"


class SolverName(StrEnum):
    FO_UE = "fo-ue"
    FO_SE = "fo-se"
    RS_UE_BNB = "rs-ue-bnb"
    RS_UE_BNB_RANDOM = "rs-ue-bnb-random"
    RS_UE_EXHAUSTIVE = "rs-ue-exhaustive"
    RS_UE_HEURISTIC = "rs-ue-heuristic"
    RS_SE_BNB = "rs-se-bnb"
    RS_SE_EXHAUSTIVE = "rs-se-exhaustive"
    ALL_CELLULAR = "all-cellular"


class PhysParams(BaseModel):
    """Parâmetros físicos da célula (valores padrão: implantação LTE urbana)"""

    model_config = ConfigDict(frozen=True)

    bandwidth_hz: float = Field(default=5e6, gt=0, description="Largura de banda W do canal")
    noise_density_dbm_hz: float = Field(default=-174.0, description="Densidade de ruído em dBm/Hz")
    pathloss_exponent: float = Field(default=4.0, ge=2, description="Expoente de perda de percurso")
    ref_gain: float = Field(default=5.7e-4, gt=0, description="Ganho G0 a 1 m")
    p_max_bs: float = Field(default=40.0, ge=0, description="Potência máxima da BS (W)")
    p_max_ue: float = Field(default=0.25, ge=0, description="Potência máxima dos terminais (W)")
    frame_t: float = Field(default=1.0, gt=0, description="Duração do quadro T")
    cell_radius: float = Field(default=500.0, gt=0, description="Raio da célula (m)")
    carrier: str = Field(default="1 GHz", description="Apenas informativo")

    @property
    def sigma2(self) -> float:
        """Potência de ruído em W"""
        return 10.0 ** ((self.noise_density_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz


class UserPair(BaseModel):
    """Enlace lógico Tx-l -> Rx-l com demanda de b nats por quadro"""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=1)
    tx: Point
    rx: Point
    b: float = Field(gt=0, description="Demanda em nats por quadro")


class CellScenario(BaseModel):
    """Instância imutável: BS, pares e parâmetros físicos"""

    model_config = ConfigDict(frozen=True)

    params: PhysParams = Field(default_factory=PhysParams)
    bs: Point = (0.0, 0.0)
    pairs: List[UserPair]
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return len(self.pairs)

    @model_validator(mode="after")
    def check_layout(self) -> "CellScenario":
        if not self.pairs:
            raise ValueError("cenário sem pares")
        ids = [pair.id for pair in self.pairs]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"ids dos pares devem ser 1..L em ordem, recebido {ids}")

        radius = self.params.cell_radius * (1 + 1e-9)
        for pair in self.pairs:
            for name, pos in (("tx", pair.tx), ("rx", pair.rx)):
                if math.dist(pos, self.bs) > radius:
                    raise ValueError(f"par {pair.id}: {name} fora do raio da célula")

        # Import tardio: scenario depende deste módulo
        from scenario import build_link_budget

        build_link_budget(self)
        return self


class HeuristicConfig(BaseModel):
    """Configuração do controle de potência com troca de modo"""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(default_factory=lambda: settings.HEURISTIC_THETA, ge=1)
    max_iters: int = Field(default_factory=lambda: settings.HEURISTIC_MAX_ITERS, ge=1)
    sinr_tol: float = Field(default_factory=lambda: settings.HEURISTIC_SINR_TOL, gt=0)


class Campaign(BaseModel):
    """Campanha Monte Carlo: gerador de cenários + conjunto de solvers"""

    pairs: int = Field(ge=1, description="Número de pares L por cenário")
    seeds: List[int] = Field(default_factory=lambda: list(range(settings.CAMPAIGN_SEEDS)), min_length=1)
    params: PhysParams = Field(default_factory=PhysParams)
    solvers: List[SolverName] = Field(
        default_factory=lambda: [SolverName.ALL_CELLULAR, SolverName.FO_UE, SolverName.RS_UE_BNB], min_length=1
    )
    thetas: List[float] = Field(default_factory=lambda: [settings.HEURISTIC_THETA])
    output_dir: str = Field(default_factory=lambda: settings.OUTPUT_DIR)

    @field_validator("seeds")
    @classmethod
    def distinct_seeds(cls, seeds: List[int]) -> List[int]:
        if len(set(seeds)) != len(seeds):
            raise ValueError("seeds repetidas")
        return seeds

    @field_validator("thetas")
    @classmethod
    def valid_thetas(cls, thetas: List[float]) -> List[float]:
        if not thetas or any(theta < 1 for theta in thetas):
            raise ValueError("theta deve ser >= 1")
        return thetas


class ScenarioRequest(BaseModel):
    """Pedido de geração de cenário aleatório"""

    pairs: int = Field(default=10, ge=1, le=100, description="Número de pares L")
    seed: int = Field(default=0, description="Semente do gerador")
    params: PhysParams = Field(default_factory=PhysParams)


class SolveRequest(BaseModel):
    """Cenário (JSON do formato de arquivo) + solver"""

    scenario: Dict[str, Any]
    solver: SolverName = SolverName.RS_UE_BNB
    theta: Optional[float] = Field(default=None, ge=1, description="Só para rs-ue-heuristic")
