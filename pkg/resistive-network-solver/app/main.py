"""
Resistive Network Solver - HTTP service
"""
from fastapi import FastAPI
from contextlib import asynccontextmanager
import logging
import os

from app.config import get_settings
from app.database import init_db
from app.devices import get_device_library
from app.web.routes import router as api_router

VERSION = "1.0.0"

settings = get_settings()

logging.basicConfig(
    level=getattr(logging, settings.log_level.upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    library = get_device_library()
    logger.info(f"Starting Resistive Network Solver with opamps {', '.join(library.names())}")

    if settings.persist_studies:
        init_db()
        logger.info("Study database initialized")

    yield

    logger.info("Resistive Network Solver stopped")


app = FastAPI(
    title="Resistive Network Solver",
    description="Compile SPD linear systems into analog resistive networks and simulate them",
    version=VERSION,
    lifespan=lifespan
)

app.include_router(api_router)


@app.get("/health")
async def health_check():
    """Liveness plus the simulation defaults a solve would use"""
    current = get_settings()
    return {
        "status": "healthy",
        "version": VERSION,
        "opamps": get_device_library().names(),
        "default_opamp": current.default_opamp,
        "readout": current.readout,
        "offset_mode": current.offset_mode,
        "persist_studies": current.persist_studies,
    }


if __name__ == "__main__":
    import uvicorn
    uvicorn.run("app.main:app", host="0.0.0.0", port=int(os.environ.get("PORT", 8000)), reload=True)
