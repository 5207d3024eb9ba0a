from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool

from app.services.simulation.config import ExperimentConfig
from app.services.simulation.engine import SimulationEngine

router = APIRouter()


async def _run(operation: str, config: ExperimentConfig):
    """Correr una operación del engine fuera del event loop y devolver el manifest"""
    try:
        engine = SimulationEngine(config)
        manifest = await run_in_threadpool(getattr(engine, operation))
        return {"success": True, "data": manifest}
    except HTTPException:
        raise
    except ValueError as e:
        print(f"❌ [API] {operation} rechazado: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        print(f"❌ [API] {operation} falló: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.post("/simulations/pattern")
async def export_pattern(config: ExperimentConfig):
    """Exportar patrones por sub-array, envolvente del cilindro y roster"""
    return await _run("pattern", config)


@router.post("/simulations/sweep")
async def sum_rate_sweep(config: ExperimentConfig):
    """Sum rate vs SNR (DCAA y/o ULA, uplink y/o downlink)"""
    return await _run("sweep", config)


@router.post("/simulations/converge")
async def convergence_trace(config: ExperimentConfig):
    """Traza de convergencia del downlink"""
    return await _run("converge", config)
