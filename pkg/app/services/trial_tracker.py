"""
Trial Tracker - Context manager para medir cada trial de Monte Carlo.

Uso:
    with TrialTracker(operation="sweep", trial=3, timings=timings) as tracker:
        rows = run_trial(...)
        tracker.record(rows=len(rows))
"""

import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional


@dataclass(frozen=True)
class TrialTiming:
    """Fila de timings.csv"""
    operation: str
    trial: int
    duration_ms: int
    status: str
    error: Optional[str] = None


class TrialTracker:
    """
    Context manager que mide el wall time de un trial y lo registra.

    No suprime excepciones: el engine decide si el trial se salta.
    """

    def __init__(
        self,
        operation: str,
        trial: int,
        timings: Optional[List[TrialTiming]] = None,
        context: Optional[Dict[str, Any]] = None,
    ):
        """
        Args:
            operation: 'sweep', 'converge', etc.
            trial: Índice del trial
            timings: Lista compartida donde se agrega el TrialTiming al salir
            context: Metadata adicional para el log (scenario, snr, ...)
        """
        self.operation = operation
        self.trial = trial
        self.timings = timings
        self.context = context or {}

        self.start_time = None
        self.duration_ms = 0
        self.details: Dict[str, Any] = {}
        self.error = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.duration_ms = int((time.perf_counter() - self.start_time) * 1000)

        if exc_type:
            self.error = str(exc_val)
            print(f"❌ [{self.operation.upper()}] Trial {self.trial} falló tras {self.duration_ms}ms: {self.error}")
        else:
            extra = " ".join(f"{key}={value}" for key, value in self.details.items())
            print(f"✅ [{self.operation.upper()}] Trial {self.trial} listo ({self.duration_ms}ms) {extra}".rstrip())

        if self.timings is not None:
            self.timings.append(TrialTiming(
                operation=self.operation,
                trial=self.trial,
                duration_ms=self.duration_ms,
                status="error" if exc_type else "ok",
                error=self.error,
            ))

        # No suprimir excepciones
        return False

    def record(self, **details: Any):
        """Agregar datos al log de cierre (filas generadas, iteraciones, ...)"""
        self.details.update(details)
