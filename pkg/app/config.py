from pydantic_settings import BaseSettings
from functools import lru_cache
from typing import List


class Settings(BaseSettings):
    # Servicio
    service_name: str = "cylinder-dcaa-sim"

    # Resultados
    results_dir: str = "results"

    # Pool de trials (ThreadPoolExecutor)
    max_workers: int = 4

    # Seed usada cuando el config no trae una
    default_seed: int = 2024

    # CORS
    allowed_origins: List[str] = ["http://localhost:3000"]

    class Config:
        env_file = ".env"
        case_sensitive = False


@lru_cache()
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
