"""
Uplink multiusuario del cylinder DCAA.

Matriz de selección RF -> sub-array, combinador MMSE, SINR/sum rate y la
selección greedy de sub-arrays (más el oráculo exhaustivo para validarla).
Los índices de sub-array y de usuario son base 0.
"""

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from app.services.errors import ConfigurationError, InfeasibleSelectionError, NumericalError


# Máximo de combinaciones que acepta exhaustive_select
ENUMERATION_GUARD = 1_000_000


@dataclass(frozen=True)
class SelectionMatrix:
    """
    Asignación de n_rf cadenas RF a sub-arrays distintos.

    omega[i] es el sub-array conectado a la cadena i (orden de selección).
    """
    n_sub: int
    omega: tuple

    def __post_init__(self):
        omega = tuple(int(n) for n in self.omega)
        object.__setattr__(self, "omega", omega)
        if not omega:
            raise InfeasibleSelectionError("La selección necesita al menos una cadena RF")
        if len(set(omega)) != len(omega):
            raise InfeasibleSelectionError(f"Sub-array repetido en la selección: {omega}")
        if min(omega) < 0 or max(omega) >= self.n_sub:
            raise InfeasibleSelectionError(f"Índices fuera de [0, {self.n_sub}): {omega}")

    @property
    def n_rf(self) -> int:
        return len(self.omega)

    def matrix(self) -> np.ndarray:
        """Matriz binaria n_rf x n_sub con un 1 por fila"""
        selection = np.zeros((self.n_rf, self.n_sub))
        selection[np.arange(self.n_rf), list(self.omega)] = 1.0
        return selection

    def apply(self, channels: np.ndarray) -> np.ndarray:
        """S*h para cada fila de channels (K x n_sub) -> K x n_rf"""
        return np.asarray(channels)[..., list(self.omega)]


@dataclass(frozen=True)
class UplinkScenario:
    """Canales efectivos (K x 2N), SNR de transmisión por usuario, M y sigma^2"""
    channels: np.ndarray
    transmit_snr: np.ndarray
    M: int
    sigma2: float = 1.0

    def __post_init__(self):
        channels = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        snr = np.broadcast_to(np.asarray(self.transmit_snr, dtype=float), (channels.shape[0],)).copy()
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "transmit_snr", snr)
        if channels.shape[0] < 1:
            raise ConfigurationError("El escenario necesita al menos un usuario")
        if np.any(snr < 0):
            raise ConfigurationError("transmit_snr no puede ser negativa")
        if self.sigma2 <= 0:
            raise ConfigurationError(f"sigma2 debe ser positiva, recibido: {self.sigma2}")
        if self.M < 1:
            raise ConfigurationError(f"M debe ser >= 1, recibido: {self.M}")

    @property
    def K(self) -> int:
        return self.channels.shape[0]

    @property
    def n_sub(self) -> int:
        return self.channels.shape[1]


@dataclass
class LinkReport:
    """Resultado de un enlace en un trial: SINR, tasas, selección y trazas"""
    per_user_sinr: np.ndarray
    per_user_rate: np.ndarray
    sum_rate: float
    selection: Optional[SelectionMatrix] = None
    combiners: Optional[np.ndarray] = None
    trace: List[float] = field(default_factory=list)
    power: Optional[np.ndarray] = None
    final_power: Optional[np.ndarray] = None
    p_change_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    beams: Optional[Dict[int, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        """Serialización JSON-compatible (complejos como [re, im])"""
        def _complex_rows(values):
            if values is None:
                return None
            return [[[float(v.real), float(v.imag)] for v in row] for row in np.atleast_2d(values)]

        return {
            "per_user_sinr": [float(v) for v in self.per_user_sinr],
            "per_user_rate": [float(v) for v in self.per_user_rate],
            "sum_rate": float(self.sum_rate),
            "selection": list(self.selection.omega) if self.selection else None,
            "combiners": _complex_rows(self.combiners),
            "trace": [float(v) for v in self.trace],
            "power": None if self.power is None else [float(v) for v in self.power],
            "p_change_trace": [float(v) for v in self.p_change_trace],
            "iterations": self.iterations,
            "converged": self.converged,
            "beams": None if self.beams is None else {
                str(sector): list(book.selected_beams) for sector, book in self.beams.items()
            },
        }


def rates_from_sinr(sinr: np.ndarray) -> np.ndarray:
    return np.log2(1 + np.asarray(sinr, dtype=float))


def hermitian_solve(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """
    Resolver matrix * x = rhs con Cholesky.

    Falla con NumericalError si la matriz no es definida positiva
    (diagonal <= 1e-12 * traza o factorización imposible).
    """
    diagonal = np.real(np.diag(matrix))
    trace = float(np.sum(diagonal))
    if trace <= 0 or np.min(diagonal) <= 1e-12 * trace:
        raise NumericalError("Matriz de covarianza no definida positiva")
    try:
        factor = cho_factor(matrix, lower=True)
    except LinAlgError as e:
        raise NumericalError(f"Cholesky falló: {e}") from e
    return cho_solve(factor, rhs)


def unit_norm(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm == 0:
        return np.zeros_like(vector)
    return vector / norm


def mmse_sinrs(gains: np.ndarray, snr: np.ndarray, noise_level: float) -> np.ndarray:
    """
    SINR post-MMSE de todos los usuarios a la vez.

    gains es n_rf x K (columna k = canal efectivo del usuario k). Con
    R = sum_i snr_i g_i g_i^H + noise_level*I y q_k = g_k^H R^-1 g_k,
    Sherman-Morrison da SINR_k = snr_k q_k / (1 - snr_k q_k).
    """
    snr = np.asarray(snr, dtype=float)
    covariance = (gains * snr) @ gains.conj().T + noise_level * np.eye(gains.shape[0])
    solved = hermitian_solve(covariance, gains)
    quadratic = np.real(np.sum(gains.conj() * solved, axis=0))
    explained = snr * quadratic
    return explained / np.maximum(1.0 - explained, np.finfo(float).tiny)


def _selection_rate(scen: UplinkScenario, omega: Sequence[int]) -> float:
    gains = scen.channels[:, list(omega)].T
    return float(np.sum(rates_from_sinr(mmse_sinrs(gains, scen.transmit_snr, scen.M))))


def mmse_combiner(S: SelectionMatrix, scen: UplinkScenario, k: int) -> np.ndarray:
    """
    Combinador MMSE unitario del usuario k.

    w_k = C^-1 S h_k / ||.|| con C = S(sum_{i!=k} P_i h_i h_i^H + M sigma^2 I)S^T.

    Args:
        S: Matriz de selección
        scen: Escenario uplink
        k: Índice de usuario (base 0)

    Returns:
        Vector complejo de n_rf entradas, norma 1 (cero si el canal es nulo)
    """
    gains = S.apply(scen.channels)
    powers = scen.transmit_snr * scen.sigma2
    others = np.arange(scen.K) != k

    interference = (gains[others].T * powers[others]) @ gains[others].conj()
    covariance = interference + scen.M * scen.sigma2 * np.eye(S.n_rf)
    return unit_norm(hermitian_solve(covariance, gains[k]))


def mmse_combiners(S: SelectionMatrix, scen: UplinkScenario) -> np.ndarray:
    """Combinadores de todos los usuarios, K x n_rf"""
    return np.array([mmse_combiner(S, scen, k) for k in range(scen.K)])


def sinr_uplink(S: SelectionMatrix, combiners: np.ndarray, scen: UplinkScenario, k: int) -> float:
    """
    SINR del usuario k con combinadores explícitos.

    SINR_k = P_k|w^H S h_k|^2 / (sum_{i!=k} P_i|w^H S h_i|^2 + M||w^H S||^2),
    con P normalizada por sigma^2.
    """
    w = np.asarray(combiners)[k]
    projections = np.abs(S.apply(scen.channels) @ w.conj()) ** 2
    weighted = scen.transmit_snr * projections

    signal = weighted[k]
    denominator = np.sum(weighted) - signal + scen.M * np.linalg.norm(w) ** 2
    if signal == 0:
        return 0.0
    if denominator == 0:
        return float("inf")
    return float(signal / denominator)


def sum_rate_uplink(S: SelectionMatrix, scen: UplinkScenario) -> float:
    """Sum rate con combinadores MMSE: sum_k log2(1 + P_k (Sh_k)^H C_k^-1 (Sh_k))"""
    return _selection_rate(scen, S.omega)


def uplink_report(S: SelectionMatrix, scen: UplinkScenario, trace: Optional[List[float]] = None) -> LinkReport:
    """Armar el LinkReport de una selección con combinadores MMSE explícitos"""
    combiners = mmse_combiners(S, scen)
    sinr = np.array([sinr_uplink(S, combiners, scen, k) for k in range(scen.K)])
    rates = rates_from_sinr(sinr)
    return LinkReport(
        per_user_sinr=sinr,
        per_user_rate=rates,
        sum_rate=float(np.sum(rates)),
        selection=S,
        combiners=combiners,
        trace=list(trace or []),
        iterations=S.n_rf,
    )


def _check_selection_budget(scen: UplinkScenario, n_rf: int):
    if n_rf < 1 or n_rf > scen.n_sub:
        raise InfeasibleSelectionError(f"n_rf={n_rf} fuera de [1, {scen.n_sub}]")
    if scen.K > n_rf:
        raise InfeasibleSelectionError(f"K={scen.K} usuarios no caben en n_rf={n_rf} cadenas")


def greedy_select(scen: UplinkScenario, n_rf: int) -> LinkReport:
    """
    Selección greedy de sub-arrays.

    En cada paso agrega el sub-array que más aumenta el sum rate MMSE;
    empates -> menor índice.

    Args:
        scen: Escenario uplink
        n_rf: Número de cadenas RF (<= 2N)

    Returns:
        LinkReport con la selección final y la traza de sum rate por paso
    """
    _check_selection_budget(scen, n_rf)

    omega: List[int] = []
    remaining = list(range(scen.n_sub))
    trace: List[float] = []

    for _ in range(n_rf):
        best_rate, best_index = -np.inf, remaining[0]
        for candidate in remaining:
            rate = _selection_rate(scen, omega + [candidate])
            if rate > best_rate:
                best_rate, best_index = rate, candidate
        omega.append(best_index)
        remaining.remove(best_index)
        trace.append(best_rate)

    return uplink_report(SelectionMatrix(n_sub=scen.n_sub, omega=tuple(omega)), scen, trace)


def exhaustive_select(scen: UplinkScenario, n_rf: int) -> LinkReport:
    """Oráculo: evalúa todas las selecciones de n_rf sub-arrays (guard 1e6)"""
    _check_selection_budget(scen, n_rf)
    candidates = comb(scen.n_sub, n_rf)
    if candidates > ENUMERATION_GUARD:
        raise InfeasibleSelectionError(f"{candidates} combinaciones exceden el guard de {ENUMERATION_GUARD}")

    best_rate, best_omega = -np.inf, None
    for omega in itertools.combinations(range(scen.n_sub), n_rf):
        rate = _selection_rate(scen, omega)
        if rate > best_rate:
            best_rate, best_omega = rate, omega

    return uplink_report(SelectionMatrix(n_sub=scen.n_sub, omega=best_omega), scen, [best_rate])


def simulate_uplink_symbols(
    S: SelectionMatrix,
    combiners: np.ndarray,
    scen: UplinkScenario,
    n_symbols: int = 100_000,
    rng=None,
) -> np.ndarray:
    """
    SINR empírico por usuario simulando símbolos.

    y = W^H S (sum_i h_i s_i + z'), con s_i ~ CN(0, P_i) y z' ~ CN(0, M sigma^2 I).
    """
    generator = np.random.default_rng(rng)
    gains = S.apply(scen.channels)
    combiners = np.asarray(combiners)
    powers = scen.transmit_snr * scen.sigma2

    symbols = complex_gaussian(generator, (n_symbols, scen.K)) * np.sqrt(powers)
    noise = complex_gaussian(generator, (n_symbols, S.n_rf)) * np.sqrt(scen.M * scen.sigma2)

    coupling = combiners.conj() @ gains.T
    received = symbols @ coupling.T
    signal = symbols * np.diag(coupling)
    disturbance = received - signal + noise @ combiners.conj().T
    return empirical_sinr(signal, disturbance)


def complex_gaussian(generator: np.random.Generator, shape) -> np.ndarray:
    return (generator.standard_normal(shape) + 1j * generator.standard_normal(shape)) / np.sqrt(2)


def empirical_sinr(signal: np.ndarray, disturbance: np.ndarray) -> np.ndarray:
    signal_power = np.mean(np.abs(signal) ** 2, axis=0)
    disturbance_power = np.mean(np.abs(disturbance) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(disturbance_power > 0, signal_power / disturbance_power, np.inf)
    return np.where(signal_power == 0, 0.0, sinr)
