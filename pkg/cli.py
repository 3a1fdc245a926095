"""Linha de comando: gen, solve, campaign e map"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, List, Optional

import typer
from pydantic import ValidationError

from area_map import d2d_area_map
from campaign import FIGURE_KINDS, REQUIRED, emit_figure_data, gain_statistics, load_campaign, run_campaign, solve_one
from errors import D2DError
from heuristic import run_heuristic, write_trace_csv
from rs import build_sinr_system
from scenario import build_link_budget, load_scenario, random_scenario, save_scenario
from schemas import Campaign, EnergyObjective, HeuristicConfig, SolverName
from settings import configure_logging, settings

logger = logging.getLogger(__name__)

app = typer.Typer(help="Seleção de modo D2D com energia mínima em célula TDD dinâmica", no_args_is_help=True)


@contextmanager
def reported_errors():
    """Qualquer D2DError ou ValidationError vira uma linha em stderr e código de saída 1"""
    try:
        yield
    except (D2DError, ValidationError) as exc:
        typer.echo(f"erro: {exc}", err=True)
        raise typer.Exit(code=1)


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        typer.echo(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")


@app.callback()
def main(log_level: Annotated[str, typer.Option("--log-level", help="Nível de log")] = settings.LOG_LEVEL):
    configure_logging(log_level)


@app.command()
def gen(
    pairs: Annotated[int, typer.Option("--pairs", "-L", min=1, help="Número de pares")] = 10,
    seed: Annotated[int, typer.Option("--seed", help="Semente do gerador")] = 0,
    out: Annotated[Optional[Path], typer.Option("--out", help="Arquivo de saída (padrão: stdout)")] = None,
):
    """Gera um cenário aleatório"""
    with reported_errors():
        scenario = random_scenario(pairs, seed)
        if out is None:
            typer.echo(scenario.model_dump_json(indent=2))
        else:
            save_scenario(scenario, out)


@app.command()
def solve(
    scenario_file: Annotated[Path, typer.Argument(exists=True, dir_okay=False, help="Cenário em JSON")],
    solver: Annotated[SolverName, typer.Option("--solver", help="Solver a usar")] = SolverName.RS_UE_BNB,
    theta: Annotated[Optional[float], typer.Option("--theta", min=1.0, help="Limiar da heurística")] = None,
    out: Annotated[Optional[Path], typer.Option("--out", help="Arquivo de saída (padrão: stdout)")] = None,
    trace: Annotated[Optional[Path], typer.Option("--trace", help="CSV com as iterações da heurística")] = None,
):
    """Resolve um cenário e imprime a linha de resultado"""
    with reported_errors():
        scenario = load_scenario(scenario_file)
        row = solve_one(scenario, solver, theta)
        if trace is not None and solver is SolverName.RS_UE_HEURISTIC:
            budget = build_link_budget(scenario)
            cfg = HeuristicConfig(theta=row.theta)
            _, steps = run_heuristic(budget, build_sinr_system(budget), cfg)
            write_trace_csv(steps, trace)
        _emit(row.model_dump_json(indent=2), out)


@app.command()
def campaign(
    campaign_file: Annotated[Optional[Path], typer.Argument(exists=True, dir_okay=False, help="Campanha em JSON (opcional)")] = None,
    pairs: Annotated[int, typer.Option("--pairs", "-L", min=1, help="Número de pares")] = 10,
    solver: Annotated[Optional[List[SolverName]], typer.Option("--solver", help="Repetível")] = None,
    theta: Annotated[Optional[List[float]], typer.Option("--theta", help="Repetível")] = None,
    seed: Annotated[int, typer.Option("--seed", help="Primeira seed")] = 0,
    out: Annotated[Optional[Path], typer.Option("--out", help="Diretório de saída")] = None,
    full_scale: Annotated[bool, typer.Option("--full-scale", help="Usa FULL_SCALE_SEEDS seeds")] = False,
    workers: Annotated[Optional[int], typer.Option("--workers", min=1)] = None,
):
    """Roda uma campanha Monte Carlo e grava os CSVs de resultados e figuras"""
    with reported_errors():
        if campaign_file is not None:
            c = load_campaign(campaign_file)
        else:
            fields = {"pairs": pairs, "seeds": list(range(seed, seed + settings.CAMPAIGN_SEEDS))}
            if solver:
                fields["solvers"] = solver
            if theta:
                fields["thetas"] = theta
            c = Campaign(**fields)
        updates = {}
        if full_scale:
            updates["seeds"] = list(range(c.seeds[0], c.seeds[0] + settings.FULL_SCALE_SEEDS))
        if out is not None:
            updates["output_dir"] = str(out)
        c = c.model_copy(update=updates)

        rows = run_campaign(c, workers=workers)
        available = {s.value for s in c.solvers}
        for kind in FIGURE_KINDS:
            if all(s.value in available for s in REQUIRED[kind]):
                emit_figure_data(kind, rows, Path(c.output_dir) / f"{kind}.csv")
        if {SolverName.ALL_CELLULAR.value, SolverName.FO_UE.value} <= available:
            typer.echo(json.dumps(gain_statistics(rows), indent=2))
        typer.echo(f"resultados em {c.output_dir}")


@app.command(name="map")
def area_map(
    tx_distance: Annotated[float, typer.Option("--tx-distance", help="Distância Tx-BS em m")] = 250.0,
    resolution: Annotated[Optional[int], typer.Option("--resolution", min=1)] = None,
    objective: Annotated[EnergyObjective, typer.Option("--objective")] = EnergyObjective.USER,
    out: Annotated[Optional[Path], typer.Option("--out", help="CSV da grade")] = None,
    full_scale: Annotated[bool, typer.Option("--full-scale")] = False,
):
    """Mapa das posições do Rx em que D2D é ótimo"""
    with reported_errors():
        if resolution is None:
            resolution = settings.FULL_SCALE_MAP_RESOLUTION if full_scale else settings.MAP_RESOLUTION
        result = d2d_area_map(tx_distance, resolution, objective)
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            result.write_csv(out)
        typer.echo(json.dumps(result.summary(), indent=2))


if __name__ == "__main__":
    app()
