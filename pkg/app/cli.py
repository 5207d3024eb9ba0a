"""
CLI del simulador.

Uso:
    python -m app.cli sweep --config configs/dense.json --out results/dense --seed 7
    python -m app.cli cost --config configs/dense.json
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from app.services.simulation.config import ExperimentConfig
from app.services.simulation.engine import SimulationEngine


COMMANDS = {
    "pattern": SimulationEngine.pattern,
    "sweep": SimulationEngine.sweep,
    "converge": SimulationEngine.converge,
    "cost": SimulationEngine.cost,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcaa-sim", description="Simulador link-level del cylinder DCAA")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", type=Path, required=True, help="Config JSON del experimento")
        sub.add_argument("--out", type=Path, default=None, help="Directorio de salida")
        sub.add_argument("--seed", type=int, default=None, help="Reemplaza la seed del config")
        sub.add_argument("--workers", type=int, default=None, help="Tamaño del pool de trials")
    return parser


def load_config(path: Path, seed: Optional[int] = None) -> ExperimentConfig:
    """Leer el config JSON; --seed pisa el valor del archivo"""
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as e:
        raise OSError(f"No se pudo leer {path}: {e}") from e
    config = ExperimentConfig.model_validate_json(raw)
    if seed is not None:
        config = config.model_copy(update={"seed": seed})
    return config


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    try:
        config = load_config(args.config, args.seed)
        engine = SimulationEngine(config, args.out, args.workers)
        manifest = COMMANDS[args.command](engine)
    except ValidationError as e:
        print(f"❌ [CLI] Config inválido: {e}")
        return 2
    except (ValueError, OSError) as e:
        print(f"❌ [CLI] {args.command} falló: {e}")
        return 1

    print(f"✅ [CLI] {args.command} listo en {manifest['out_dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
