import logging

from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from campaign import solve_one
from errors import D2DError
from models import ResultRow
from scenario import parse_scenario
from schemas import SolveRequest

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/", response_model=ResultRow)
async def solve(request: SolveRequest):
    """Resolve um cenário com o solver pedido"""
    try:
        scenario = parse_scenario(request.scenario)
        # Solvers são CPU-bound; o laço de eventos fica livre
        return await run_in_threadpool(solve_one, scenario, request.solver, request.theta)
    except D2DError as exc:
        logger.info("solve %s rejeitado: %s", request.solver.value, exc)
        raise HTTPException(status_code=exc.status_code, detail=str(exc))
