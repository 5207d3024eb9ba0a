"""
Cylinder DCAA: pila de N capas, cada una con dos sUCA opuestos (+ y -).

Orden de los 2N sub-arrays: [plus_0..plus_{N-1}, minus_0..minus_{N-1}].
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from app.services.errors import ConfigurationError
from app.services.geometry import ArrayConfig, SubArray, make_config, make_subarray, phase_shift_vector
from app.services.pattern import (
    DEFAULT_PATTERN,
    VALLEY_CONSTANT,
    ElementPattern,
    array_factor,
    response_vector,
    valley_approx,
)


@dataclass(frozen=True)
class CylinderArray:
    """Cylinder DCAA completo con su roster de 2N sub-arrays"""
    config: ArrayConfig
    N: int
    layer_spacing: float
    subarrays: Tuple[SubArray, ...]
    total_height: float
    include_layer_phase: bool = True
    pattern: ElementPattern = DEFAULT_PATTERN

    @property
    def n_sub(self) -> int:
        return 2 * self.N

    @cached_property
    def orientations(self) -> np.ndarray:
        """eta de cada sub-array, en el orden del roster"""
        return np.array([sub.eta for sub in self.subarrays])

    @cached_property
    def phase_vector(self) -> np.ndarray:
        return phase_shift_vector(self.config)

    def roster(self) -> List[Dict[str, Any]]:
        """
        Roster exportable del cilindro.

        Returns:
            Lista de {index, sign, eta_rad, height_m}, un dict por sub-array
        """
        rows = []
        for position, sub in enumerate(self.subarrays):
            rows.append({
                "index": position % self.N,
                "sign": "+" if position < self.N else "-",
                "eta_rad": float(sub.eta),
                "height_m": float(sub.height_z),
            })
        return rows


def subarray_count(M: int) -> int:
    """N = floor(pi*M/3.83): número de sUCA por mitad del cilindro"""
    return int(np.floor(np.pi * M / VALLEY_CONSTANT))


def design_cylinder(
    M: int,
    f_c: float,
    layer_spacing: Optional[float] = None,
    include_layer_phase: bool = True,
    pattern: ElementPattern = DEFAULT_PATTERN,
) -> CylinderArray:
    """
    Diseñar el cylinder DCAA para M elementos por sub-array.

    El boresight de cada capa cae sobre el primer valle del patrón de la
    capa vecina: eta_n^+ = 2n*arcsin(3.83/(2M)), eta_n^- = eta_n^+ - pi.

    Args:
        M: Elementos por sub-array (M >= 2)
        f_c: Frecuencia portadora en Hz
        layer_spacing: Separación vertical entre capas (default lambda/2)
        include_layer_phase: Incluir el término z*cos(theta) en las respuestas
        pattern: Patrón de elemento compartido por todos los sub-arrays

    Returns:
        CylinderArray con 2N sub-arrays

    Example:
        >>> design_cylinder(16, 47.2e9).N
        13
    """
    config = make_config(M, f_c)
    N = subarray_count(config.M)
    if N < 1:
        raise ConfigurationError(f"M={M} no alcanza para una capa")

    spacing = config.wavelength / 2 if layer_spacing is None else float(layer_spacing)
    if spacing <= 0:
        raise ConfigurationError(f"layer_spacing debe ser positivo, recibido: {layer_spacing}")

    step = valley_approx(config.M)
    plus = [make_subarray(config, n * step, n * spacing) for n in range(N)]
    minus = [make_subarray(config, n * step - np.pi, n * spacing) for n in range(N)]

    return CylinderArray(
        config=config,
        N=N,
        layer_spacing=spacing,
        subarrays=tuple(plus + minus),
        total_height=(N - 1) * spacing,
        include_layer_phase=include_layer_phase,
        pattern=pattern,
    )


def response_matrix(cyl: CylinderArray, phi: float, theta: float) -> np.ndarray:
    """Matriz M x 2N: columna n = response_vector del sub-array n"""
    return np.column_stack([
        response_vector(sub, phi, theta, cyl.pattern, cyl.include_layer_phase)
        for sub in cyl.subarrays
    ])


def subarray_outputs(cyl: CylinderArray, phi: float, theta: float) -> np.ndarray:
    """r[n] = AF(eta_n, phi, theta); equivale a response_matrix^T * delta"""
    return response_matrix(cyl, phi, theta).T @ cyl.phase_vector


def subarray_outputs_many(cyl: CylinderArray, phis, thetas) -> np.ndarray:
    """
    Salidas de los 2N sub-arrays para L direcciones.

    Returns:
        np.ndarray complejo de forma (L, 2N)
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    return np.stack([
        np.atleast_1d(array_factor(sub, phis, thetas, cyl.pattern, cyl.include_layer_phase))
        for sub in cyl.subarrays
    ], axis=-1)
