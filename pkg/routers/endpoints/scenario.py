from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from errors import D2DError
from scenario import random_scenario
from schemas import CellScenario, ScenarioRequest

router = APIRouter()


@router.post("/generate", response_model=CellScenario)
async def generate_scenario(request: ScenarioRequest):
    """Gera um cenário aleatório com demanda de borda"""
    try:
        return await run_in_threadpool(random_scenario, request.pairs, request.seed, request.params)
    except D2DError as exc:
        raise HTTPException(status_code=exc.status_code, detail=str(exc))
