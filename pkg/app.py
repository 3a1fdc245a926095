from fastapi import FastAPI

from routers.api import router
from settings import configure_logging

configure_logging()

app = FastAPI(
    title="D2D Mode Selection API",
    description="Seleção de modo D2D e alocação de tempo/potência com energia mínima",
    version="1.0.0",
)

app.include_router(router)
