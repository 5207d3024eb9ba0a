"""
Escritura de CSV/JSON de resultados.

Los floats se formatean siempre igual (12 cifras significativas)
para que dos runs con el mismo config produzcan archivos idénticos byte a byte.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

from app.services.simulation.state import RESULT_COLUMNS, TIMING_COLUMNS, ResultRow
from app.services.trial_tracker import TrialTiming


def format_float(value: float) -> str:
    return format(float(value), ".12g")


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Escribir un CSV UTF-8 con header; los errores de I/O incluyen el path"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(value) for value in row])
    except OSError as e:
        raise OSError(f"No se pudo escribir {path}: {e}") from e
    return path


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise OSError(f"No se pudo escribir {path}: {e}") from e
    return path


def result_row_values(row: ResultRow) -> List[Any]:
    return [
        row.trial,
        row.architecture,
        row.direction,
        float(row.snr_db),
        float(row.sum_rate_bps_hz),
        ";".join(format_float(v) for v in row.per_user_sinr),
        row.iterations,
        row.converged,
        row.channel_checksum,
    ]


def write_results(path: Path, rows: List[ResultRow]) -> Path:
    ordered = sorted(rows, key=ResultRow.sort_key)
    return write_csv(path, RESULT_COLUMNS, (result_row_values(row) for row in ordered))


def write_timings(path: Path, timings: List[TrialTiming]) -> Path:
    ordered = sorted(timings, key=lambda t: (t.operation, t.trial))
    return write_csv(
        path,
        TIMING_COLUMNS,
        ([t.operation, t.trial, t.duration_ms, t.status, t.error] for t in ordered),
    )


def write_manifest(path: Path, manifest: Dict[str, Any]) -> Path:
    return write_json(path, manifest)
