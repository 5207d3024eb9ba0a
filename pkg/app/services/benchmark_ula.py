"""
Benchmark: ULA con sectorización de celda (3 sectores de 120°) e HBF con
codebook DFT.

Cada usuario es atendido por el ULA de su sector y la interferencia entre
sectores se anula por construcción. Los combinadores y precoders se devuelven
también "levantados" al array completo (F^H w en ambos sentidos) para que
todos los usuarios compartan dimensión M.

En downlink el usuario recibe h^T F^H w: el haz l transmitido con conj(u_l)
es el mismo haz físico que el haz -l mod M en recepción.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.services.downlink import alternate_precoding_and_power, sinr_from_coupling
from app.services.errors import ConfigurationError, InfeasibleSelectionError
from app.services.geometry import wrap_angle
from app.services.uplink import (
    LinkReport,
    complex_gaussian,
    empirical_sinr,
    hermitian_solve,
    mmse_sinrs,
    rates_from_sinr,
    unit_norm,
)


SECTORS = (1, 2, 3)


def sector_of(phi: float) -> int:
    """
    Sector del usuario según su azimut LoS.

    1 si phi en (-pi, -pi/3], 2 si en (-pi/3, pi/3], 3 si en (pi/3, pi].

    Example:
        >>> sector_of(0.0)
        2
    """
    phi = wrap_angle(phi)
    if phi <= -np.pi / 3:
        return 1
    if phi <= np.pi / 3:
        return 2
    return 3


@dataclass(frozen=True)
class SectorAssignment:
    """Sector (1, 2 o 3) de cada usuario"""
    sectors: Tuple[int, ...]

    def __post_init__(self):
        sectors = tuple(int(s) for s in self.sectors)
        object.__setattr__(self, "sectors", sectors)
        if any(s not in SECTORS for s in sectors):
            raise ConfigurationError(f"Sectores inválidos: {sectors}")

    @classmethod
    def from_los(cls, phis: Sequence[float]) -> "SectorAssignment":
        return cls(tuple(sector_of(phi) for phi in phis))

    @property
    def K(self) -> int:
        return len(self.sectors)

    def users_in(self, sector: int) -> List[int]:
        return [k for k, s in enumerate(self.sectors) if s == sector]

    def same_sector_mask(self) -> np.ndarray:
        """mask[k, i] = True si k e i comparten sector"""
        sectors = np.array(self.sectors)
        return sectors[:, None] == sectors[None, :]


@dataclass(frozen=True)
class DftCodebook:
    """
    Haces DFT elegidos para el ULA de un sector.

    La fila i de la matriz analógica F es u_l = exp(-j 2pi l m / M)/sqrt(M)
    con l = selected_beams[i].
    """
    M: int
    selected_beams: Tuple[int, ...]
    trace: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        beams = tuple(int(b) for b in self.selected_beams)
        object.__setattr__(self, "selected_beams", beams)
        if len(set(beams)) != len(beams):
            raise InfeasibleSelectionError(f"Haz DFT repetido: {beams}")
        if beams and (min(beams) < 0 or max(beams) >= self.M):
            raise InfeasibleSelectionError(f"Haces fuera de [0, {self.M}): {beams}")

    @property
    def n_rf(self) -> int:
        return len(self.selected_beams)

    @cached_property
    def analog_matrix(self) -> np.ndarray:
        """F, n_rf x M"""
        return dft_rows(self.M, self.selected_beams)


def dft_rows(M: int, beams: Sequence[int]) -> np.ndarray:
    beams = np.asarray(list(beams), dtype=float)
    return np.exp(-2j * np.pi * np.outer(beams, np.arange(M)) / M) / np.sqrt(M)


def _beam_rate(channels: np.ndarray, beams: Sequence[int], powers: np.ndarray, sigma2: float) -> float:
    gains = dft_rows(channels.shape[1], beams) @ channels.T
    return float(np.sum(rates_from_sinr(mmse_sinrs(gains, powers, sigma2))))


def select_dft_beams(
    channels: np.ndarray,
    n_rf: int,
    powers=1.0,
    sigma2: float = 1.0,
) -> DftCodebook:
    """
    Selección greedy de haces DFT para los usuarios de un sector.

    Mismo esqueleto que la selección de sub-arrays: en cada paso se agrega el
    haz que más aumenta el sum rate MMSE del sector; empates -> menor índice.

    Args:
        channels: Canales de los usuarios del sector, K_s x M
        n_rf: Haces a elegir (<= M)
        powers: Potencia de transmisión por usuario
        sigma2: Potencia de ruido

    Returns:
        DftCodebook con los haces elegidos y la traza de sum rate por paso
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    M = channels.shape[1]
    if n_rf < 1 or n_rf > M:
        raise InfeasibleSelectionError(f"n_rf={n_rf} fuera de [1, {M}]")
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (channels.shape[0],))

    beams: List[int] = []
    remaining = list(range(M))
    trace: List[float] = []
    for _ in range(n_rf):
        best_rate, best_beam = -np.inf, remaining[0]
        for candidate in remaining:
            rate = _beam_rate(channels, beams + [candidate], powers, sigma2)
            if rate > best_rate:
                best_rate, best_beam = rate, candidate
        beams.append(best_beam)
        remaining.remove(best_beam)
        trace.append(best_rate)

    return DftCodebook(M=M, selected_beams=tuple(beams), trace=tuple(trace))


# ---------------------------------------------------------------------------
# Uplink
# ---------------------------------------------------------------------------

def mmse_ula_uplink(
    codebook: DftCodebook,
    channels: np.ndarray,
    powers,
    sigma2: float,
    k: int,
) -> np.ndarray:
    """
    Combinador digital MMSE (sin normalizar) del usuario k de un sector.

    w = P_k C^-1 F h_k con C = F(sum_{i!=k} P_i h_i h_i^H + sigma^2 I)F^H,
    donde la suma recorre solo los usuarios del mismo sector (las filas de
    channels).
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (channels.shape[0],))
    F = codebook.analog_matrix
    beamspace = channels @ F.T
    others = np.arange(channels.shape[0]) != k

    covariance = (beamspace[others].T * powers[others]) @ beamspace[others].conj()
    covariance = covariance + sigma2 * (F @ F.conj().T)
    return powers[k] * hermitian_solve(covariance, beamspace[k])


def sinr_ula_uplink(
    codebook: DftCodebook,
    combiner: np.ndarray,
    channels: np.ndarray,
    powers,
    sigma2: float,
    k: int,
) -> float:
    """SINR_k = P_k|w^H F h_k|^2 / (sum_{i!=k} P_i|w^H F h_i|^2 + sigma^2 ||F^H w||^2)"""
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (channels.shape[0],))
    F = codebook.analog_matrix
    weighted = powers * np.abs(channels @ F.T @ np.asarray(combiner).conj()) ** 2

    signal = weighted[k]
    noise = sigma2 * np.linalg.norm(F.conj().T @ combiner) ** 2
    denominator = weighted.sum() - signal + noise
    if signal == 0:
        return 0.0
    if denominator == 0:
        return float("inf")
    return float(signal / denominator)


def sum_rate_ula_uplink(
    codebooks: Dict[int, DftCodebook],
    channels: np.ndarray,
    assignment: SectorAssignment,
    powers,
    sigma2: float = 1.0,
) -> float:
    """
    Sum rate uplink del benchmark con combinadores MMSE.

    channels[k] es el canal del usuario k hacia el ULA de su propio sector.
    Sólo interfieren usuarios del mismo sector.
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (assignment.K,))
    total = 0.0
    for sector in SECTORS:
        users = assignment.users_in(sector)
        if not users:
            continue
        gains = codebooks[sector].analog_matrix @ channels[users].T
        total += float(np.sum(rates_from_sinr(mmse_sinrs(gains, powers[users], sigma2))))
    return total


def _check_sector_budget(assignment: SectorAssignment, n_rf: Optional[int], M: int):
    for sector in SECTORS:
        resident = len(assignment.users_in(sector))
        if n_rf is not None and resident > n_rf:
            raise InfeasibleSelectionError(f"Sector {sector}: {resident} usuarios exceden n_rf={n_rf}")
        if resident > M:
            raise InfeasibleSelectionError(f"Sector {sector}: {resident} usuarios exceden M={M} haces")


def optimize_uplink_ula(
    channels: np.ndarray,
    assignment: SectorAssignment,
    powers,
    sigma2: float = 1.0,
    n_rf: Optional[int] = None,
) -> LinkReport:
    """
    Uplink completo del benchmark: haces greedy por sector, combinación MMSE y SINR.

    Cada sector recibe tantas cadenas RF como usuarios residentes.

    Args:
        channels: K x M, canal de cada usuario hacia el ULA de su sector
        assignment: Sector de cada usuario
        powers: Potencia de transmisión por usuario (escalar o K valores)
        sigma2: Potencia de ruido
        n_rf: Cadenas RF disponibles por ULA (None = sin límite)

    Returns:
        LinkReport con combinadores levantados al array (K x M) y los codebooks por sector
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    M = channels.shape[1]
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (assignment.K,)).copy()
    _check_sector_budget(assignment, n_rf, M)

    sinr = np.zeros(assignment.K)
    combiners = np.zeros((assignment.K, M), dtype=complex)
    codebooks: Dict[int, DftCodebook] = {}
    trace: List[float] = []
    completed = 0.0

    for sector in SECTORS:
        users = assignment.users_in(sector)
        if not users:
            continue
        local = channels[users]
        book = select_dft_beams(local, len(users), powers[users], sigma2)
        codebooks[sector] = book
        trace.extend(completed + rate for rate in book.trace)

        for position, k in enumerate(users):
            w = mmse_ula_uplink(book, local, powers[users], sigma2, position)
            sinr[k] = sinr_ula_uplink(book, w, local, powers[users], sigma2, position)
            combiners[k] = book.analog_matrix.conj().T @ unit_norm(w)
        completed = trace[-1]

    rates = rates_from_sinr(sinr)
    return LinkReport(
        per_user_sinr=sinr,
        per_user_rate=rates,
        sum_rate=float(np.sum(rates)),
        combiners=combiners,
        trace=trace,
        iterations=len(trace),
        beams=codebooks,
    )


# ---------------------------------------------------------------------------
# Downlink
# ---------------------------------------------------------------------------

def ula_precoders(
    codebooks: Dict[int, DftCodebook],
    channels: np.ndarray,
    assignment: SectorAssignment,
    p: np.ndarray,
    sigma2: float,
) -> np.ndarray:
    """
    Precoders MMSE por dualidad, levantados al array: v_k = F^H w_k, K x M.

    El uplink dual ve d_k = F conj(h_k), así h_k^T F^H w = w^T conj(d_k).
    w_k = C^-1 d_k / ||.|| con C = sum_{i!=k, mismo sector} p_i d_i d_i^H + sigma^2 I.
    """
    M = channels.shape[1]
    precoders = np.zeros((assignment.K, M), dtype=complex)
    for sector, book in codebooks.items():
        users = assignment.users_in(sector)
        F = book.analog_matrix
        dual = channels[users].conj() @ F.T
        powers = p[users]
        for position, k in enumerate(users):
            others = np.arange(len(users)) != position
            covariance = (dual[others].T * powers[others]) @ dual[others].conj()
            covariance = covariance + sigma2 * np.eye(book.n_rf)
            w = unit_norm(hermitian_solve(covariance, dual[position]))
            precoders[k] = F.conj().T @ w
    return precoders


def ula_coupling(channels: np.ndarray, assignment: SectorAssignment, precoders: np.ndarray) -> np.ndarray:
    """|h_k^T v_i|^2 con los términos entre sectores distintos anulados"""
    coupling = np.abs(channels @ precoders.T) ** 2
    return np.where(assignment.same_sector_mask(), coupling, 0.0)


def sinr_downlink_ula(
    channels: np.ndarray,
    assignment: SectorAssignment,
    precoders: np.ndarray,
    p,
    sigma2: float,
    k: int,
) -> float:
    """SINR_k = p_k|h_k^T v_k|^2 / (sum_{i!=k, mismo sector} p_i|h_k^T v_i|^2 + sigma^2)"""
    coupling = ula_coupling(np.atleast_2d(channels), assignment, np.atleast_2d(precoders))
    return float(sinr_from_coupling(coupling, np.asarray(p, dtype=float), sigma2)[k])


def downlink_ula(
    channels: np.ndarray,
    assignment: SectorAssignment,
    total_power: float,
    n_rf: Optional[int] = None,
    t_max: int = 20,
    eps_th: float = 0.01,
    sigma2: float = 1.0,
    active_set: bool = False,
) -> LinkReport:
    """
    Downlink del benchmark con la misma iteración alternada que el DCAA.

    Los haces de cada sector se eligen una vez sobre el uplink dual
    (canales conjugados, potencia uniforme P/K); luego se alternan precoders
    MMSE y waterfilling sobre la potencia total de los tres sectores.

    Args:
        channels: K x M, canal de cada usuario hacia el ULA de su sector
        assignment: Sector de cada usuario
        total_power: P_DL
        n_rf: Cadenas RF disponibles por ULA (None = sin límite)
        t_max: Iteraciones máximas
        eps_th: Umbral de |dp|_1
        sigma2: Potencia de ruido
        active_set: Waterfilling de conjunto activo

    Returns:
        LinkReport con precoders levantados (K x M), potencias y trazas
    """
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    M = channels.shape[1]
    K = assignment.K
    if total_power <= 0:
        raise ConfigurationError(f"P_DL debe ser positiva, recibido: {total_power}")
    _check_sector_budget(assignment, n_rf, M)

    uniform = np.full(K, total_power / K)
    codebooks: Dict[int, DftCodebook] = {}
    for sector in SECTORS:
        users = assignment.users_in(sector)
        if users:
            codebooks[sector] = select_dft_beams(channels[users].conj(), len(users), uniform[users], sigma2)

    def build_state(p: np.ndarray):
        precoders = ula_precoders(codebooks, channels, assignment, p, sigma2)
        return precoders, ula_coupling(channels, assignment, precoders)

    outcome = alternate_precoding_and_power(
        K=K,
        total_power=total_power,
        noise_level=sigma2,
        t_max=t_max,
        eps_th=eps_th,
        build_state=build_state,
        active_set=active_set,
        tag="ULA",
    )

    sinr = sinr_from_coupling(outcome.coupling_abs2, outcome.power, sigma2)
    rates = rates_from_sinr(sinr)
    return LinkReport(
        per_user_sinr=sinr,
        per_user_rate=rates,
        sum_rate=float(np.sum(rates)),
        combiners=outcome.state,
        trace=outcome.trace,
        power=outcome.power,
        final_power=outcome.final_power,
        p_change_trace=outcome.p_change_trace,
        iterations=outcome.iterations,
        converged=outcome.converged,
        beams=codebooks,
    )


def simulate_downlink_ula_symbols(
    channels: np.ndarray,
    assignment: SectorAssignment,
    precoders: np.ndarray,
    p,
    sigma2: float = 1.0,
    n_symbols: int = 100_000,
    rng=None,
) -> np.ndarray:
    """
    SINR empírico por usuario: cada ULA transmite x_s = sum_{i en s} v_i s_i
    y el usuario k sólo recibe el ULA de su sector.
    """
    generator = np.random.default_rng(rng)
    channels = np.atleast_2d(np.asarray(channels, dtype=complex))
    precoders = np.atleast_2d(np.asarray(precoders))
    powers = np.asarray(p, dtype=float)
    mask = assignment.same_sector_mask()

    symbols = complex_gaussian(generator, (n_symbols, assignment.K)) * np.sqrt(powers)
    noise = complex_gaussian(generator, (n_symbols, assignment.K)) * np.sqrt(sigma2)

    coupling = np.where(mask, channels @ precoders.T, 0.0)
    received = symbols @ coupling.T + noise
    signal = symbols * np.diag(coupling)
    return empirical_sinr(signal, received - signal)
