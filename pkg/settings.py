import logging

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8")

    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    # Campanhas Monte Carlo
    WORKERS: int = 4
    OUTPUT_DIR: str = "results"
    CAMPAIGN_SEEDS: int = 100
    FULL_SCALE_SEEDS: int = 1000
    MAP_RESOLUTION: int = 200
    FULL_SCALE_MAP_RESOLUTION: int = 400

    # Heurística (controle de potência distribuído)
    HEURISTIC_THETA: float = 1.2
    HEURISTIC_MAX_ITERS: int = 500
    HEURISTIC_SINR_TOL: float = 1e-6

    # Tolerâncias numéricas (BISECTION_XTOL e BREAKPOINT_TOL são relativas a T)
    BISECTION_XTOL: float = 1e-12
    BREAKPOINT_TOL: float = 1e-15
    PF_TOL: float = 1e-12
    PF_MAX_ITERS: int = 10_000
    EXHAUSTIVE_MAX_PAIRS: int = 20
    MIN_DISTANCE: float = 1.0


settings = Settings()


def configure_logging(level: str | None = None) -> None:
    """Configuração do logger raiz; também roda em cada processo de campanha"""
    logging.basicConfig(level=(level or settings.LOG_LEVEL).upper(), format=settings.LOG_FORMAT)
