"""
Patrón direccional 3GPP, vectores de respuesta y array factor de un sub-array.

Incluye la forma directa del array factor, su expansión en serie de Bessel
(Jacobi-Anger) y los diagnósticos de valle/beamwidth del lóbulo principal.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import jv

from app.services.errors import ConfigurationError, DegeneratePatternError
from app.services.geometry import SubArray, element_offsets, wrap_angle


# Primer extremo de J_0 usado en la aproximación del valle
VALLEY_CONSTANT = 3.83


@dataclass(frozen=True)
class ElementPattern:
    """Patrón de elemento 3GPP: ancho a -3 dB, coeficiente de caída y piso de atenuación"""
    half_power_width_deg: float = 65.0
    rolloff_db: float = 12.0
    floor_attenuation_db: float = 30.0

    def __post_init__(self):
        for name in ("half_power_width_deg", "rolloff_db", "floor_attenuation_db"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} debe ser positivo")


DEFAULT_PATTERN = ElementPattern()


@dataclass(frozen=True)
class PatternSample:
    """Un punto del grid de patrón: (phi, theta) y el array factor complejo"""
    phi: float
    theta: float
    value: complex

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ConfigurationError(f"theta fuera de [0, pi]: {self.theta}")


def _attenuation_db(pattern: ElementPattern, angle):
    degrees = np.degrees(wrap_angle(angle))
    return -np.minimum(
        pattern.rolloff_db * (degrees / pattern.half_power_width_deg) ** 2,
        pattern.floor_attenuation_db,
    )


def element_gain_db(pattern: ElementPattern, xi, psi):
    """G_dB = -min(-(A(xi) + A(psi)), piso)"""
    combined = _attenuation_db(pattern, xi) + _attenuation_db(pattern, psi)
    return -np.minimum(-combined, pattern.floor_attenuation_db)


def _linear_gain(pattern: ElementPattern, xi, psi) -> np.ndarray:
    return 10 ** (element_gain_db(pattern, xi, psi) / 10)


def element_gain(pattern: ElementPattern, xi, psi):
    """
    Ganancia lineal del elemento 3GPP.

    Args:
        pattern: Parámetros del patrón
        xi: Ángulo azimutal relativo al boresight del elemento (radianes)
        psi: Elevación relativa al plano horizontal, theta - pi/2 (radianes)

    Returns:
        Ganancia lineal >= 0 (float si la entrada es escalar)

    Example:
        >>> element_gain(DEFAULT_PATTERN, np.radians(65), 0.0)
        0.0630957...
    """
    gain = _linear_gain(pattern, xi, psi)
    if np.ndim(gain) == 0:
        return float(gain)
    return gain


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > np.pi):
        raise ConfigurationError("theta debe estar en [0, pi]")
    return theta


def steering_matrix(
    sub: SubArray,
    phi,
    theta,
    pattern: ElementPattern = DEFAULT_PATTERN,
    include_height: bool = True,
) -> np.ndarray:
    """
    Respuestas del sub-array para varios ángulos a la vez.

    phi y theta se combinan por broadcasting; el resultado tiene forma
    broadcast(phi, theta).shape + (M,).
    """
    phi, theta = np.broadcast_arrays(np.asarray(phi, dtype=float), _check_theta(theta))
    config = sub.config
    wavenumber = 2 * np.pi / config.wavelength

    xi = phi[..., None] - sub.gamma
    psi = theta[..., None] - np.pi / 2
    path = config.radius * np.sin(theta)[..., None] * np.cos(xi)
    if include_height:
        path = path + sub.height_z * np.cos(theta)[..., None]

    amplitude = np.sqrt(_linear_gain(pattern, xi, psi))
    return amplitude * np.exp(-1j * wavenumber * path)


def response_vector(
    sub: SubArray,
    phi: float,
    theta: float,
    pattern: ElementPattern = DEFAULT_PATTERN,
    include_height: bool = True,
) -> np.ndarray:
    """
    Vector de respuesta del sub-array (M entradas) hacia (phi, theta).

    |entrada_m| = sqrt(G(xi_m, psi)) con xi_m = phi - gamma_m y psi = theta - pi/2.
    Con include_height la fase incluye el término z*cos(theta) de la capa.
    """
    return steering_matrix(sub, phi, theta, pattern, include_height)


def array_factor(
    sub: SubArray,
    phi,
    theta,
    pattern: ElementPattern = DEFAULT_PATTERN,
    include_height: bool = True,
):
    """
    Array factor AF(eta, phi, theta) = response_vector^T * delta.

    Acepta escalares o arrays (broadcast entre phi y theta).

    Example:
        >>> af = array_factor(sub, sub.eta, np.pi / 2)
        >>> af.imag  # ~0, todas las fases se alinean en el boresight
    """
    values = steering_matrix(sub, phi, theta, pattern, include_height) @ sub.phase_vector
    if np.ndim(values) == 0:
        return complex(values)
    return values


def default_series_order(sub: SubArray) -> int:
    """Truncamiento por defecto: ceil(4*pi*a/lambda) + 40"""
    config = sub.config
    return int(np.ceil(4 * np.pi * config.radius / config.wavelength)) + 40


def array_factor_series(
    sub: SubArray,
    phi: float,
    theta: float,
    n_max: Optional[int] = None,
    pattern: ElementPattern = DEFAULT_PATTERN,
    include_height: bool = True,
) -> complex:
    """
    Array factor por expansión de Jacobi-Anger truncada en |n| <= n_max.

    AF = sum_n j^n e^{jn(phi-eta)/2} J_n(u) S_n, con
    u = (4*pi/lambda) a sin(theta) sin((phi-eta)/2) y
    S_n = sum_m sqrt(G_m) eps_m e^{-jn*pi*m/(M-1)}.

    eps_m = delta_m * exp(-j(2*pi/lambda) a sin(theta) sin(pi*m/(M-1))) vale 1
    en el plano horizontal; fuera de él corrige que las delay lines están
    diseñadas para theta = pi/2, y la serie coincide con la suma directa
    para cualquier (phi, theta).

    Args:
        sub: Sub-array
        phi: Azimut (radianes)
        theta: Cenit en [0, pi]
        n_max: Orden de truncamiento (default: ceil(4*pi*a/lambda) + 40)

    Returns:
        Valor complejo del array factor
    """
    if n_max is None:
        n_max = default_series_order(sub)
    if n_max < 1:
        raise ConfigurationError(f"n_max debe ser >= 1, recibido: {n_max}")
    theta = float(_check_theta(theta))

    config = sub.config
    M = config.M
    wavenumber = 2 * np.pi / config.wavelength
    radial = wavenumber * config.radius * np.sin(theta)

    half_offset = (phi - sub.eta) / 2
    argument = 2 * radial * np.sin(half_offset)

    orders = np.arange(-n_max, n_max + 1)
    element_angles = np.pi * np.arange(M) / (M - 1)

    weights = np.sqrt(_linear_gain(pattern, phi - sub.gamma, theta - np.pi / 2))
    correction = sub.phase_vector * np.exp(-1j * radial * element_offsets(M))
    s_n = (weights * correction) @ np.exp(-1j * np.outer(element_angles, orders))

    terms = np.exp(1j * orders * (np.pi / 2 + half_offset)) * jv(orders, argument) * s_n
    value = complex(np.sum(terms))

    if include_height:
        value *= np.exp(-1j * wavenumber * sub.height_z * np.cos(theta))
    return value


def valley_approx(M: int) -> float:
    """
    Aproximación cerrada del primer valle: 2*arcsin(3.83/(2M)).

    Example:
        >>> valley_approx(64)
        0.05985...
    """
    if M < 2:
        raise ConfigurationError(f"M debe ser >= 2, recibido: {M}")
    return float(2 * np.arcsin(VALLEY_CONSTANT / (2 * M)))


def beamwidth(M: int) -> float:
    """Ancho del lóbulo principal: 4*arcsin(3.83/(2M)) ~ 7.66/M"""
    return 2 * valley_approx(M)


def _horizontal_cut(sub: SubArray, offsets: np.ndarray, direction: int, pattern: ElementPattern) -> np.ndarray:
    return np.abs(array_factor(sub, sub.eta + direction * offsets, np.pi / 2, pattern))


def _scan_offsets(grid_step: float) -> np.ndarray:
    count = int(np.floor((np.pi / 2) / grid_step))
    return np.arange(count + 1) * grid_step


def _check_grid_step(sub: SubArray, grid_step: Optional[float]) -> float:
    limit = valley_approx(sub.M) / 10
    if grid_step is None:
        return limit / 2
    if not 0 < grid_step <= limit:
        raise ConfigurationError(f"grid_step debe estar en (0, {limit:.6g}], recibido: {grid_step}")
    return float(grid_step)


def find_first_valley(
    sub: SubArray,
    grid_step: Optional[float] = None,
    pattern: ElementPattern = DEFAULT_PATTERN,
    direction: int = 1,
) -> float:
    """
    Offset del primer mínimo local de |AF(eta + offset, pi/2)|.

    Barrido en grid y refinamiento acotado (Brent/sección dorada) hasta
    grid_step/100.

    Args:
        sub: Sub-array
        grid_step: Paso del barrido, en (0, valley_approx(M)/10]
        direction: +1 barre hacia phi > eta, -1 hacia phi < eta

    Returns:
        Offset positivo del valle (radianes)
    """
    grid_step = _check_grid_step(sub, grid_step)
    offsets = _scan_offsets(grid_step)
    magnitudes = _horizontal_cut(sub, offsets, direction, pattern)

    centre = magnitudes[1:-1]
    minima = np.flatnonzero((centre <= magnitudes[:-2]) & (centre < magnitudes[2:])) + 1
    if minima.size == 0:
        raise DegeneratePatternError(f"Sin valle dentro de pi/2 para M={sub.M}")

    index = minima[0]
    result = minimize_scalar(
        lambda offset: abs(array_factor(sub, sub.eta + direction * offset, np.pi / 2, pattern)),
        bounds=(offsets[index - 1], offsets[index + 1]),
        method="bounded",
        options={"xatol": grid_step / 100},
    )
    return float(result.x)


def first_sidelobe_ratio(
    sub: SubArray,
    grid_step: Optional[float] = None,
    pattern: ElementPattern = DEFAULT_PATTERN,
) -> float:
    """
    Nivel del primer lóbulo lateral relativo al pico (lineal).

    Es el primer máximo local de |AF| después del primer valle.
    """
    grid_step = _check_grid_step(sub, grid_step)
    valley = find_first_valley(sub, grid_step, pattern)
    offsets = _scan_offsets(grid_step)
    offsets = offsets[offsets >= valley]
    magnitudes = _horizontal_cut(sub, offsets, 1, pattern)

    centre = magnitudes[1:-1]
    maxima = np.flatnonzero((centre >= magnitudes[:-2]) & (centre > magnitudes[2:])) + 1
    if maxima.size == 0:
        raise DegeneratePatternError(f"Sin lóbulo lateral dentro de pi/2 para M={sub.M}")

    peak = abs(array_factor(sub, sub.eta, np.pi / 2, pattern))
    return float(magnitudes[maxima[0]] / peak)


def pattern_grid(
    sub: SubArray,
    phis,
    thetas,
    pattern: ElementPattern = DEFAULT_PATTERN,
    include_height: bool = True,
) -> List[PatternSample]:
    """
    Evaluar el array factor sobre el producto cartesiano phis x thetas.

    Orden de salida: theta externo, phi interno.
    """
    phis = np.asarray(phis, dtype=float).ravel()
    thetas = np.asarray(thetas, dtype=float).ravel()
    if phis.size == 0 or thetas.size == 0:
        raise ConfigurationError("El grid de patrón no puede estar vacío")

    theta_mesh, phi_mesh = np.meshgrid(thetas, phis, indexing="ij")
    values = array_factor(sub, phi_mesh, theta_mesh, pattern, include_height)
    return [
        PatternSample(phi=float(p), theta=float(t), value=complex(v))
        for p, t, v in zip(phi_mesh.ravel(), theta_mesh.ravel(), np.ravel(values))
    ]
