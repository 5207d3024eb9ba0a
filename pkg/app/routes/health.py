from fastapi import APIRouter
from datetime import datetime, timezone

import numpy
import scipy

from app import __version__
from app.config import settings

router = APIRouter()


@router.get("/health")
async def health_check():
    """
    Health check endpoint que reporta:
    - Servicio está corriendo
    - Versiones del backend numérico
    """
    return {
        "service": settings.service_name,
        "version": __version__,
        "status": "healthy",
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
    }
