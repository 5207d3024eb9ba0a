"""
Configuración de experimentos.

Un ExperimentConfig describe un run completo (patrón, sweep, convergencia o
costo). Se carga desde JSON; las claves desconocidas se rechazan.
"""

import hashlib
import json
from decimal import Decimal
from typing import Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config import settings
from app.services.channel3gpp import ChannelParams
from app.services.pattern import ElementPattern


# Escenarios de la evaluación: conectividad normal y densa
PRESETS: Dict[str, Dict[str, int]] = {
    "normal": {"M": 64, "K": 10, "n_rf": 10},
    "dense": {"M": 128, "K": 30, "n_rf": 30},
}


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ChannelOverrides(_StrictModel):
    c_asa_deg: float = Field(8.53, ge=0)
    c_eas_deg: float = Field(9.0, ge=0)
    n_clusters: int = Field(19, ge=1)
    n_rays: int = Field(20, ge=1)
    r_tau: float = Field(3.0, gt=1)


class AlgorithmOptions(_StrictModel):
    t_max: int = Field(20, ge=1)
    eps_th: float = Field(0.01, gt=0)
    update_selection: bool = False
    active_set: bool = False
    converge_snr_db: float = 9.0  # SNR promedio de la traza de convergencia
    converge_trial: int = Field(0, ge=0)


class PatternOptions(_StrictModel):
    # Patrón de elemento compartido por DCAA y ULA
    half_power_width_deg: float = Field(65.0, gt=0)
    rolloff_db: float = Field(12.0, gt=0)
    floor_attenuation_db: float = Field(30.0, gt=0)

    # Grid de exportación
    phi_step_deg: float = Field(0.5, gt=0)
    theta_deg: List[float] = [90.0]
    subarrays: List[int] = [0]
    M: Optional[int] = Field(None, ge=2)  # M del patrón exportado (default: el del escenario)

    # Cilindro
    include_layer_phase: bool = True
    layer_spacing: Optional[float] = Field(None, gt=0)

    # ULA: el patrón se evalúa en G(xi, pi/2); null usa psi = theta - pi/2 como el cilindro
    ula_fixed_psi_deg: Optional[float] = Field(90.0, ge=-90.0, le=90.0)

    @property
    def ula_fixed_psi(self) -> Optional[float]:
        return None if self.ula_fixed_psi_deg is None else float(np.radians(self.ula_fixed_psi_deg))

    def element_pattern(self) -> ElementPattern:
        return ElementPattern(
            half_power_width_deg=self.half_power_width_deg,
            rolloff_db=self.rolloff_db,
            floor_attenuation_db=self.floor_attenuation_db,
        )


class ComponentPrices(_StrictModel):
    c_an: Decimal = Field(ge=0)
    c_ps: Decimal = Field(ge=0)
    c_sw: Decimal = Field(ge=0)


class ExperimentConfig(_StrictModel):
    scenario: Literal["normal", "dense", "custom"] = "normal"
    M: Optional[int] = Field(None, ge=2)
    K: Optional[int] = Field(None, ge=1)
    n_rf: Optional[int] = Field(None, ge=1)

    f_c: float = Field(47.2e9, gt=0)
    sigma2: float = Field(1.0, gt=0)
    snr_grid_db: List[float] = [0.0, 5.0, 10.0, 15.0, 20.0]
    n_trials: int = Field(100, ge=1)
    seed: int = Field(default_factory=lambda: settings.default_seed)
    direction: Literal["uplink", "downlink", "both"] = "both"
    architecture: Literal["dcaa", "ula", "both"] = "both"
    dump_channels: bool = False

    channel: ChannelOverrides = ChannelOverrides()
    algorithm: AlgorithmOptions = AlgorithmOptions()
    pattern: PatternOptions = PatternOptions()

    # Precios explícitos; si faltan se usa la cotización de price_band
    prices: Optional[ComponentPrices] = None
    price_band: str = "37GHz"

    @model_validator(mode="after")
    def _apply_scenario(self) -> "ExperimentConfig":
        if self.scenario == "custom":
            missing = [name for name in ("M", "K", "n_rf") if getattr(self, name) is None]
            if missing:
                raise ValueError(f"scenario=custom requiere {', '.join(missing)}")
        else:
            for name, value in PRESETS[self.scenario].items():
                current = getattr(self, name)
                if current is not None and current != value:
                    raise ValueError(f"{name}={current} contradice el preset {self.scenario} ({name}={value})")
                setattr(self, name, value)

        if self.K > self.n_rf:
            raise ValueError(f"K={self.K} no puede superar n_rf={self.n_rf}")
        if not self.snr_grid_db:
            raise ValueError("snr_grid_db no puede estar vacío")
        return self

    @property
    def architectures(self) -> List[str]:
        return ["dcaa", "ula"] if self.architecture == "both" else [self.architecture]

    @property
    def directions(self) -> List[str]:
        return ["uplink", "downlink"] if self.direction == "both" else [self.direction]

    def channel_params(self) -> ChannelParams:
        return ChannelParams(
            f_c=self.f_c,
            n_clusters=self.channel.n_clusters,
            n_rays=self.channel.n_rays,
            r_tau=self.channel.r_tau,
            c_asa_deg=self.channel.c_asa_deg,
            c_eas_deg=self.channel.c_eas_deg,
        )

    def config_hash(self) -> str:
        """SHA-256 del config canónico (claves ordenadas)"""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def snr_linear(snr_db: float) -> float:
    return float(10 ** (snr_db / 10))


def phi_grid(step_deg: float) -> np.ndarray:
    """Azimuts en (-pi, pi] con paso step_deg"""
    step = np.radians(step_deg)
    count = int(np.floor(2 * np.pi / step + 1e-9))
    return np.pi - step * np.arange(count)[::-1]
