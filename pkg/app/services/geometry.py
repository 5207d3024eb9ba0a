"""
Geometría de los sub-arrays semicirculares (sUCA) y diseño de las delay lines.

Todos los ángulos se manejan en radianes. Los tipos son inmutables: los
arrays de numpy se marcan como read-only al construirse.
"""

from dataclasses import dataclass

import numpy as np

from app.services.errors import ConfigurationError


SPEED_OF_LIGHT = 299_792_458.0


def wrap_angle(angle):
    """
    Normalizar ángulo(s) al rango principal (-pi, pi].

    Los valores que ya están en rango se devuelven sin tocar, así los
    límites exactos (ej: -pi/3) no se mueven por redondeo.

    Example:
        >>> wrap_angle(-np.pi)
        3.141592653589793
    """
    angle_arr = np.asarray(angle, dtype=float)
    in_range = (angle_arr > -np.pi) & (angle_arr <= np.pi)
    wrapped = np.pi - np.mod(np.pi - angle_arr, 2 * np.pi)
    result = np.where(in_range, angle_arr, wrapped)
    if np.ndim(angle) == 0:
        return float(result)
    return result


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class ArrayConfig:
    """Constantes físicas de un sub-array: M elementos, f_c, lambda y radio a"""
    M: int
    f_c: float
    wavelength: float
    radius: float


@dataclass(frozen=True)
class SubArray:
    """
    Sub-array semicircular orientado.

    gamma[m] = eta - pi/2 + pi*m/(M-1) para m = 0..M-1 (índices base 0).
    """
    config: ArrayConfig
    eta: float
    height_z: float
    gamma: np.ndarray
    positions: np.ndarray
    delay_lengths: np.ndarray
    phase_shifts: np.ndarray

    @property
    def M(self) -> int:
        return self.config.M

    @property
    def phase_vector(self) -> np.ndarray:
        """delta[m] = exp(j * phase_shifts[m])"""
        return np.exp(1j * self.phase_shifts)


def make_config(M: int, f_c: float) -> ArrayConfig:
    """
    Crear la configuración física de un sub-array.

    Args:
        M: Elementos por sub-array (M >= 2)
        f_c: Frecuencia portadora en Hz

    Returns:
        ArrayConfig con lambda = c/f_c y a = (M-1)*lambda/(2*pi)

    Example:
        >>> make_config(64, 47.2e9).radius
        0.0636...
    """
    if int(M) != M or M < 2:
        raise ConfigurationError(f"M debe ser entero >= 2, recibido: {M}")
    if not np.isfinite(f_c) or f_c <= 0:
        raise ConfigurationError(f"f_c debe ser positiva, recibido: {f_c}")

    wavelength = SPEED_OF_LIGHT / float(f_c)
    radius = (int(M) - 1) * wavelength / (2 * np.pi)
    return ArrayConfig(M=int(M), f_c=float(f_c), wavelength=wavelength, radius=radius)


def element_offsets(M: int) -> np.ndarray:
    """
    sin(pi*m/(M-1)) para m = 0..M-1.

    Se evalúa con el índice simétrico min(m, M-1-m) para que el vector sea
    palíndromo bit a bit.
    """
    m = np.arange(M)
    symmetric_index = np.minimum(m, M - 1 - m)
    return np.sin(np.pi * symmetric_index / (M - 1))


def delay_line_lengths(config: ArrayConfig) -> np.ndarray:
    """
    Longitudes de las delay lines (metros), 0 <= l_m < lambda.

    l_m = -a*sin(pi*m/(M-1)) + k_m*lambda con k_m = ceil((a/lambda)*sin(...)).
    Para m = 0 sale k = 0 y l = 0: una línea de longitud cero equivale en
    fase a una de una longitud de onda.
    """
    electrical = (config.radius / config.wavelength) * element_offsets(config.M)
    k = np.ceil(electrical)
    return (k - electrical) * config.wavelength


def phase_shift_vector(config: ArrayConfig) -> np.ndarray:
    """
    Vector delta de desfases que introducen las delay lines.

    Independiente de la orientación eta: las líneas son las mismas para
    todos los sub-arrays de igual M y f_c.

    Returns:
        np.ndarray complejo de M entradas, |delta[m]| = 1
    """
    phase_shifts = -2 * np.pi * delay_line_lengths(config) / config.wavelength
    return np.exp(1j * phase_shifts)


def make_subarray(config: ArrayConfig, eta: float, height_z: float = 0.0) -> SubArray:
    """
    Construir un sub-array orientado a eta y elevado a height_z.

    eta fuera de (-pi, pi] se normaliza, no se rechaza.

    Args:
        config: Configuración física
        eta: Orientación del elemento central (radianes)
        height_z: Altura de la capa (metros)

    Returns:
        SubArray con gamma, posiciones, longitudes y desfases poblados
    """
    eta = wrap_angle(eta)
    M = config.M

    gamma = eta - np.pi / 2 + np.pi * np.arange(M) / (M - 1)
    positions = np.column_stack([
        config.radius * np.cos(gamma),
        config.radius * np.sin(gamma),
        np.full(M, float(height_z)),
    ])
    lengths = delay_line_lengths(config)
    phase_shifts = -2 * np.pi * lengths / config.wavelength

    return SubArray(
        config=config,
        eta=eta,
        height_z=float(height_z),
        gamma=_frozen(gamma),
        positions=_frozen(positions),
        delay_lengths=_frozen(lengths),
        phase_shifts=_frozen(phase_shifts),
    )
