"""Campanhas Monte Carlo e dados das figuras

Cada seed gera um cenário aleatório que passa por todos os solvers da
campanha. As linhas são agregadas em ordem de seed, então a mesma campanha
produz os mesmos CSVs (os tempos de execução ficam em timings.csv).
"""

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import pandas as pd
from pydantic import ValidationError

from errors import D2DError, DomainError, MissingRowsError, ScenarioParseError
from fo import solve_fo
from heuristic import run_heuristic
from models import Allocation, ResultRow, SolverStats
from rs import (
    Feasibility,
    assemble_solution,
    build_sinr_system,
    cellular_common_time,
    rs_branch_and_bound,
    rs_exhaustive,
)
from scenario import LinkBudget, build_link_budget, random_scenario
from schemas import Campaign, CellScenario, EnergyObjective, HeuristicConfig, SolverName
from settings import configure_logging, settings

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

SHARED_CHANNEL = {
    SolverName.RS_UE_BNB,
    SolverName.RS_UE_BNB_RANDOM,
    SolverName.RS_UE_EXHAUSTIVE,
    SolverName.RS_UE_HEURISTIC,
    SolverName.RS_SE_BNB,
    SolverName.RS_SE_EXHAUSTIVE,
}

FIGURE_KINDS = ("gain-curve", "heuristic-gap-hist", "energy-vs-channels", "bnb-node-table")


def all_cellular(budget: LinkBudget, obj: EnergyObjective = EnergyObjective.USER) -> Allocation:
    """Linha de base: todos os pares via BS com o t_ul comum ótimo"""
    started = time.perf_counter()
    t_ul, _ = cellular_common_time(budget, range(budget.size), obj)
    stats = SolverStats(solutions_explored=1, wall_time=time.perf_counter() - started)
    return assemble_solution(budget, obj, Feasibility(pairs=()), t_ul, stats)


def run_solver(
    budget: LinkBudget, solver: SolverName, theta: Optional[float] = None, seed: int = 0
) -> Allocation:
    ue, se = EnergyObjective.USER, EnergyObjective.SYSTEM
    match solver:
        case SolverName.FO_UE:
            return solve_fo(budget, ue)
        case SolverName.FO_SE:
            return solve_fo(budget, se)
        case SolverName.ALL_CELLULAR:
            return all_cellular(budget)
        case SolverName.RS_UE_BNB:
            return rs_branch_and_bound(budget, build_sinr_system(budget), ue)
        case SolverName.RS_UE_BNB_RANDOM:
            return rs_branch_and_bound(budget, build_sinr_system(budget), ue, strategy="random", seed=seed)
        case SolverName.RS_UE_EXHAUSTIVE:
            return rs_exhaustive(budget, build_sinr_system(budget), ue)
        case SolverName.RS_SE_BNB:
            return rs_branch_and_bound(budget, build_sinr_system(budget), se)
        case SolverName.RS_SE_EXHAUSTIVE:
            return rs_exhaustive(budget, build_sinr_system(budget), se)
        case SolverName.RS_UE_HEURISTIC:
            cfg = HeuristicConfig() if theta is None else HeuristicConfig(theta=theta)
            solution, _ = run_heuristic(budget, build_sinr_system(budget), cfg)
            return solution
    raise DomainError(f"solver desconhecido: {solver}")


def _result_row(
    seed: Optional[int], solver: SolverName, theta: Optional[float], size: int, solution: Allocation, wall_time: float
) -> ResultRow:
    stats = getattr(solution, "stats", None)
    bnb = solver in (SolverName.RS_UE_BNB, SolverName.RS_UE_BNB_RANDOM, SolverName.RS_SE_BNB)
    enumerated = bnb or solver in (SolverName.RS_UE_EXHAUSTIVE, SolverName.RS_SE_EXHAUSTIVE)
    return ResultRow(
        seed=seed,
        solver=solver.value,
        theta=theta,
        pairs=size,
        total_energy=solution.total_energy,
        pair_energy=solution.pair_energy,
        modes=solution.modes,
        channels=solution.channels(shared=solver in SHARED_CHANNEL),
        t_ul_star=solution.t_ul_star,
        nodes_explored=stats.nodes_explored if enumerated else None,
        solutions_explored=stats.solutions_explored if enumerated else None,
        wall_time=wall_time,
    )


def solve_one(scenario: CellScenario, solver: SolverName, theta: Optional[float] = None) -> ResultRow:
    if solver is not SolverName.RS_UE_HEURISTIC:
        theta = None
    elif theta is None:
        theta = settings.HEURISTIC_THETA
    budget = build_link_budget(scenario)
    started = time.perf_counter()
    solution = run_solver(budget, solver, theta, seed=scenario.seed or 0)
    return _result_row(scenario.seed, solver, theta, budget.size, solution, time.perf_counter() - started)


def _jobs(c: Campaign) -> List[tuple]:
    jobs = []
    for solver in c.solvers:
        thetas = c.thetas if solver is SolverName.RS_UE_HEURISTIC else [None]
        jobs.extend((solver, theta) for theta in thetas)
    return jobs


def run_seed(c: Campaign, seed: int) -> List[ResultRow]:
    """Todas as linhas (solver, theta) de uma seed; falhas viram linhas marcadas"""
    rows = []
    try:
        scenario = random_scenario(c.pairs, seed, c.params)
    except D2DError as exc:
        logger.warning("seed %d: cenário não gerado: %s", seed, exc)
        return [ResultRow(seed=seed, solver=s.value, theta=t, pairs=c.pairs, error=str(exc)) for s, t in _jobs(c)]

    for solver, theta in _jobs(c):
        try:
            rows.append(solve_one(scenario, solver, theta))
        except D2DError as exc:
            logger.warning("seed %d, %s: %s", seed, solver.value, exc)
            rows.append(ResultRow(seed=seed, solver=solver.value, theta=theta, pairs=c.pairs, error=str(exc)))
    return rows


def run_campaign(c: Campaign, workers: Optional[int] = None, write: bool = True) -> List[ResultRow]:
    workers = settings.WORKERS if workers is None else workers
    logger.info("campanha: L=%d, %d seeds, solvers=%s", c.pairs, len(c.seeds), [s.value for s in c.solvers])

    rows: List[ResultRow] = []
    if workers <= 1:
        for seed in c.seeds:
            rows.extend(run_seed(c, seed))
            logger.debug("seed %d concluída", seed)
    else:
        # Processos novos (spawn/forkserver) não herdam a configuração de log
        level = logging.getLevelName(logging.getLogger().getEffectiveLevel())
        with ProcessPoolExecutor(max_workers=workers, initializer=configure_logging, initargs=(level,)) as pool:
            # map preserva a ordem das seeds
            for seed, seed_rows in zip(c.seeds, pool.map(run_seed, [c] * len(c.seeds), c.seeds)):
                rows.extend(seed_rows)
                logger.debug("seed %d concluída", seed)

    failures = sum(row.error is not None for row in rows)
    logger.info("campanha concluída: %d linhas, %d falhas", len(rows), failures)
    if write:
        write_results(rows, c.output_dir)
    return rows


def load_campaign(path: str | Path) -> Campaign:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return Campaign.model_validate(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"JSON inválido: {exc.msg}", line=exc.lineno) from exc
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ScenarioParseError(first["msg"], field=".".join(str(p) for p in first["loc"]) or None) from exc


def results_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    records = [
        {
            "seed": row.seed,
            "solver": row.solver,
            "theta": row.theta,
            "pairs": row.pairs,
            "total_energy": row.total_energy,
            "channels": row.channels,
            "t_ul_star": row.t_ul_star,
            "d2d_pairs": sum(row.modes) if row.error is None else None,
            "modes": "".join(str(m) for m in row.modes),
            "nodes_explored": row.nodes_explored,
            "solutions_explored": row.solutions_explored,
            "error": row.error,
        }
        for row in rows
    ]
    return pd.DataFrame.from_records(records)


def _with_variant(df: pd.DataFrame) -> pd.DataFrame:
    """Rótulo solver[@theta], chave de agrupamento sem NaN"""
    variant = [s if pd.isna(t) else f"{s}@{t:g}" for s, t in zip(df["solver"], df["theta"])]
    return df.assign(variant=variant)


def _quantiles(df: pd.DataFrame, column: str) -> pd.DataFrame:
    grouped = df.groupby("variant")[column]
    out = grouped.mean().rename(f"{column}_mean").to_frame()
    for q in (0.1, 0.5, 0.9):
        out[f"{column}_q{int(q * 100)}"] = grouped.quantile(q)
    return out


def summary_frame(rows: Iterable[ResultRow]) -> pd.DataFrame:
    df = _with_variant(results_frame(rows))
    ok = df[df["error"].isna()]
    summary = pd.concat([_quantiles(ok, "total_energy"), _quantiles(ok, "channels")], axis=1)
    summary = summary.reindex(sorted(df["variant"].unique()))
    summary["instances"] = ok.groupby("variant").size().reindex(summary.index, fill_value=0)
    summary["failures"] = df[df["error"].notna()].groupby("variant").size().reindex(summary.index, fill_value=0)
    return summary.rename_axis("variant").reset_index()


def write_results(rows: List[ResultRow], output_dir: str | Path) -> Dict[str, Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    pairs = pd.DataFrame.from_records(
        [
            {"seed": row.seed, "solver": row.solver, "theta": row.theta, "pair": l + 1, "mode": mode, "energy": energy}
            for row in rows
            if row.error is None
            for l, (mode, energy) in enumerate(zip(row.modes, row.pair_energy))
        ],
        columns=["seed", "solver", "theta", "pair", "mode", "energy"],
    )
    timings = pd.DataFrame.from_records(
        [{"seed": row.seed, "solver": row.solver, "theta": row.theta, "wall_time": row.wall_time} for row in rows],
        columns=["seed", "solver", "theta", "wall_time"],
    )

    paths = {name: out / f"{name}.csv" for name in ("results", "pairs", "timings", "summary")}
    results_frame(rows).to_csv(paths["results"], index=False, float_format=FLOAT_FORMAT)
    pairs.to_csv(paths["pairs"], index=False, float_format=FLOAT_FORMAT)
    timings.to_csv(paths["timings"], index=False, float_format=FLOAT_FORMAT)
    summary_frame(rows).to_csv(paths["summary"], index=False, float_format=FLOAT_FORMAT)
    logger.info("resultados gravados em %s", out)
    return paths


def _rows_by_solver(rows: Iterable[ResultRow], kind: str, required: List[SolverName]) -> Dict[str, List[ResultRow]]:
    by_solver: Dict[str, List[ResultRow]] = {}
    for row in rows:
        if row.error is None:
            by_solver.setdefault(row.solver, []).append(row)
    missing = [s.value for s in required if s.value not in by_solver]
    if missing:
        raise MissingRowsError(kind, missing)
    return by_solver


def _gain_curve(by_solver: Dict[str, List[ResultRow]]) -> pd.DataFrame:
    cellular = {row.seed: row for row in by_solver[SolverName.ALL_CELLULAR.value]}
    records = []
    for fo in by_solver[SolverName.FO_UE.value]:
        base = cellular.get(fo.seed)
        if base is None:
            continue
        for l, (e_cell, e_fo) in enumerate(zip(base.pair_energy, fo.pair_energy)):
            gain = e_cell - e_fo
            records.append(
                {
                    "seed": fo.seed,
                    "pair": l + 1,
                    "cellular_energy": e_cell,
                    "fo_energy": e_fo,
                    "gain": gain,
                    "gain_pct": 100.0 * gain / e_cell if e_cell > 0 else 0.0,
                }
            )
    df = pd.DataFrame.from_records(
        records, columns=["seed", "pair", "cellular_energy", "fo_energy", "gain", "gain_pct"]
    )
    # Enlaces em ordem crescente de ganho
    df = df.sort_values(["gain_pct", "seed", "pair"], kind="mergesort").reset_index(drop=True)
    df.insert(0, "rank", range(1, len(df) + 1))
    return df


def _heuristic_gap(by_solver: Dict[str, List[ResultRow]]) -> pd.DataFrame:
    optimum = {row.seed: row.total_energy for row in by_solver[SolverName.RS_UE_BNB.value]}
    records = []
    for row in by_solver[SolverName.RS_UE_HEURISTIC.value]:
        best = optimum.get(row.seed)
        if best is None:
            continue
        gap = (row.total_energy - best) / best if best > 0 else 0.0
        records.append(
            {
                "seed": row.seed,
                "theta": row.theta,
                "heuristic_energy": row.total_energy,
                "optimal_energy": best,
                "gap": gap,
                "gap_pct": 100.0 * gap,
            }
        )
    return pd.DataFrame.from_records(
        records, columns=["seed", "theta", "heuristic_energy", "optimal_energy", "gap", "gap_pct"]
    )


def _energy_vs_channels(rows: List[ResultRow]) -> pd.DataFrame:
    df = _with_variant(results_frame(rows))
    df = df[df["error"].isna()]
    return (
        df.groupby("variant")
        .agg(
            energy_mean=("total_energy", "mean"),
            channels_mean=("channels", "mean"),
            d2d_pairs_mean=("d2d_pairs", "mean"),
            instances=("seed", "size"),
        )
        .reset_index()
    )


def _bnb_node_table(by_solver: Dict[str, List[ResultRow]]) -> pd.DataFrame:
    records = []
    for solver in (SolverName.RS_UE_EXHAUSTIVE, SolverName.RS_UE_BNB_RANDOM, SolverName.RS_UE_BNB):
        rows = by_solver[solver.value]
        records.append(
            {
                "solver": solver.value,
                "solutions_mean": sum(r.solutions_explored for r in rows) / len(rows),
                "nodes_mean": sum(r.nodes_explored for r in rows) / len(rows),
                "instances": len(rows),
            }
        )
    return pd.DataFrame.from_records(records, columns=["solver", "solutions_mean", "nodes_mean", "instances"])


REQUIRED = {
    "gain-curve": [SolverName.ALL_CELLULAR, SolverName.FO_UE],
    "heuristic-gap-hist": [SolverName.RS_UE_BNB, SolverName.RS_UE_HEURISTIC],
    "energy-vs-channels": [SolverName.ALL_CELLULAR, SolverName.FO_UE, SolverName.RS_UE_BNB],
    "bnb-node-table": [SolverName.RS_UE_EXHAUSTIVE, SolverName.RS_UE_BNB_RANDOM, SolverName.RS_UE_BNB],
}


def figure_frame(kind: str, rows: List[ResultRow]) -> pd.DataFrame:
    if kind not in REQUIRED:
        raise DomainError(f"tipo de figura desconhecido: {kind}; opções: {', '.join(FIGURE_KINDS)}")
    by_solver = _rows_by_solver(rows, kind, REQUIRED[kind])
    match kind:
        case "gain-curve":
            return _gain_curve(by_solver)
        case "heuristic-gap-hist":
            return _heuristic_gap(by_solver)
        case "energy-vs-channels":
            return _energy_vs_channels(rows)
        case _:
            return _bnb_node_table(by_solver)


def emit_figure_data(kind: str, rows: List[ResultRow], path: str | Path) -> pd.DataFrame:
    df = figure_frame(kind, rows)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("%s: %d linhas em %s", kind, len(df), path)
    return df


def gain_statistics(rows: List[ResultRow]) -> Dict[str, float]:
    """Ganho médio por par de FO-UE sobre o todo-celular e frações acima de 20% e 60%"""
    df = figure_frame("gain-curve", rows)
    if df.empty:
        return {"pairs": 0, "mean_gain": 0.0, "fraction_above_20": 0.0, "fraction_above_60": 0.0}
    gain = df["gain_pct"] / 100.0
    return {
        "pairs": int(len(df)),
        "mean_gain": float(gain.mean()),
        "fraction_above_20": float((gain > 0.2).mean()),
        "fraction_above_60": float((gain > 0.6).mean()),
    }

