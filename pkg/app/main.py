from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app import __version__
from app.routes import health, simulations, cost
from app.config import settings

app = FastAPI(
    title="Cylinder DCAA Simulator",
    version=__version__,
    description="Simulador link-level del cylinder DCAA vs ULA con HBF"
)

# CORS
app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.allowed_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(health.router, tags=["health"])

app.include_router(
    simulations.router,
    tags=["simulations"]
)

app.include_router(
    cost.router,
    tags=["cost"]
)

@app.get("/")
async def root():
    return {
        "service": settings.service_name,
        "version": __version__,
        "status": "healthy"
    }
