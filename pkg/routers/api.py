from fastapi import APIRouter

from routers.endpoints.map import router as map_router
from routers.endpoints.scenario import router as scenario_router
from routers.endpoints.solve import router as solve_router

router = APIRouter()

router.include_router(scenario_router, prefix="/scenario", tags=["scenario"])
router.include_router(solve_router, prefix="/solve", tags=["solve"])
router.include_router(map_router, prefix="/map", tags=["map"])
