from dataclasses import dataclass, field
from typing import List


# Columnas del CSV de resultados; el tiempo de cada trial va a timings.csv
RESULT_COLUMNS = [
    "trial",
    "architecture",
    "direction",
    "snr_db",
    "sum_rate_bps_hz",
    "per_user_sinr",
    "iterations",
    "converged",
    "channel_checksum",
]

TIMING_COLUMNS = ["operation", "trial", "duration_ms", "status", "error"]

CONVERGENCE_COLUMNS = ["iter", "sum_rate_bps_hz", "p_change_l1"]

PATTERN_COLUMNS = ["phi_rad", "theta_rad", "af_abs", "af_db"]

ARCHITECTURE_ORDER = {"dcaa": 0, "ula": 1}
DIRECTION_ORDER = {"uplink": 0, "downlink": 1}


@dataclass
class ResultRow:
    """Una fila por (trial, arquitectura, dirección, snr)"""
    trial: int
    architecture: str  # dcaa|ula
    direction: str  # uplink|downlink
    snr_db: float
    sum_rate_bps_hz: float
    per_user_sinr: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    channel_checksum: str = ""

    def sort_key(self):
        return (
            self.trial,
            ARCHITECTURE_ORDER[self.architecture],
            DIRECTION_ORDER[self.direction],
            self.snr_db,
        )
