"""Router para os mapas da região D2D-ótima"""

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool

from area_map import d2d_area_map
from errors import D2DError
from schemas import EnergyObjective
from settings import settings

router = APIRouter()


@router.get("/")
async def area_map(
    tx_distance: float = Query(250.0, gt=0, description="Distância Tx-BS em m"),
    resolution: int = Query(50, ge=1, le=settings.FULL_SCALE_MAP_RESOLUTION),
    objective: EnergyObjective = EnergyObjective.USER,
    grid: bool = Query(False, description="Inclui a grade de classes na resposta"),
):
    """Resumo do mapa (contagens, fração D2D, verificação de kappa) e grade opcional"""
    try:
        result = await run_in_threadpool(d2d_area_map, tx_distance, resolution, objective)
    except D2DError as exc:
        raise HTTPException(status_code=exc.status_code, detail=str(exc))

    response = result.summary()
    if grid:
        response["xs"] = result.xs.tolist()
        response["classes"] = result.classes.tolist()
    return response
