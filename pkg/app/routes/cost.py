from fastapi import APIRouter, HTTPException

from app.services.costmodel import get_quotation, list_quotation_bands
from app.services.simulation.config import ExperimentConfig
from app.services.simulation.engine import SimulationEngine

router = APIRouter()


@router.post("/cost/report")
async def cost_report(config: ExperimentConfig):
    """Costo de hardware del cylinder DCAA vs ULA con HBF"""
    try:
        manifest = SimulationEngine(config).cost()
        return {"success": True, "data": manifest["report"]}
    except ValueError as e:
        print(f"❌ [API] cost rechazado: {e}")
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        print(f"❌ [API] cost falló: {e}")
        raise HTTPException(status_code=500, detail=str(e))


@router.get("/cost/quotations")
async def quotations():
    """Cotizaciones de componentes por banda"""
    return {
        "success": True,
        "data": {
            band: {name: str(price) for name, price in get_quotation(band).items()}
            for band in list_quotation_bands()
        },
    }
