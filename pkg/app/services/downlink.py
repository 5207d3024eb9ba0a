"""
Downlink del cylinder DCAA.

Precoders MMSE por dualidad uplink-downlink, waterfilling de potencia y la
iteración alternada precoder/potencia con selección fija. La iteración y el
waterfilling trabajan sobre la matriz de acoplamiento |a_ki|^2 (ganancia del
stream i hacia el usuario k), así el benchmark ULA reutiliza el mismo código.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Tuple, Union

import numpy as np

from app.services import uplink
from app.services.errors import ConfigurationError, DegenerateChannelError
from app.services.uplink import (
    LinkReport,
    SelectionMatrix,
    UplinkScenario,
    complex_gaussian,
    empirical_sinr,
    hermitian_solve,
    rates_from_sinr,
    unit_norm,
)


@dataclass(frozen=True)
class DownlinkScenario:
    """Canales efectivos (K x 2N), potencia total P_DL, M, sigma^2 y criterio de parada"""
    channels: np.ndarray
    total_power: float
    M: int
    sigma2: float = 1.0
    t_max: int = 20
    eps_th: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "channels", np.atleast_2d(np.asarray(self.channels, dtype=complex)))
        if self.total_power <= 0:
            raise ConfigurationError(f"P_DL debe ser positiva, recibido: {self.total_power}")
        if self.t_max < 1:
            raise ConfigurationError(f"t_max debe ser >= 1, recibido: {self.t_max}")
        if self.eps_th <= 0:
            raise ConfigurationError(f"eps_th debe ser positivo, recibido: {self.eps_th}")
        if self.sigma2 < 0:
            raise ConfigurationError("sigma2 no puede ser negativa")

    @property
    def K(self) -> int:
        return self.channels.shape[0]

    @property
    def noise_level(self) -> float:
        """Ruido equivalente una vez absorbido el splitter 1/M: M*sigma^2"""
        return self.M * self.sigma2


@dataclass(frozen=True)
class PowerAllocation:
    """Potencias por usuario; suman total_power"""
    p: np.ndarray
    total_power: float

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", p)
        if np.any(p < 0):
            raise ConfigurationError("Las potencias no pueden ser negativas")
        if abs(p.sum() - self.total_power) > 1e-9 * max(1.0, self.total_power):
            raise ConfigurationError(f"Las potencias suman {p.sum()} y no {self.total_power}")

    @classmethod
    def uniform(cls, K: int, total_power: float) -> "PowerAllocation":
        return cls(p=np.full(K, total_power / K), total_power=total_power)


PowerLike = Union[PowerAllocation, np.ndarray]


def _power_values(p: PowerLike) -> np.ndarray:
    if isinstance(p, PowerAllocation):
        return p.p
    return np.asarray(p, dtype=float)


# ---------------------------------------------------------------------------
# Núcleo común (DCAA y ULA)
# ---------------------------------------------------------------------------

def sinr_from_coupling(coupling_abs2: np.ndarray, p: np.ndarray, noise_level: float) -> np.ndarray:
    """SINR_k = p_k G_kk / (sum_{i!=k} p_i G_ki + noise_level)"""
    received = coupling_abs2 * p
    signal = np.diag(received)
    interference = received.sum(axis=1) - signal
    denominator = interference + noise_level
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(denominator > 0, signal / denominator, np.inf)
    return np.where(signal == 0, 0.0, sinr)


def waterfill_from_coupling(
    coupling_abs2: np.ndarray,
    noise_level: float,
    total_power: float,
    p_prev: np.ndarray,
    active_set: bool = False,
) -> np.ndarray:
    """
    Waterfilling con interferencia congelada en p_prev.

    Z_k = sum_{j!=k} p_prev_j G_kj + noise_level; offset_k = Z_k / G_kk;
    mu = P/K + mean(offset); p_k = max(mu - offset_k, 0). Después del clamp
    las potencias positivas se reescalan para sumar P. Con active_set se
    quitan los usuarios con potencia <= 0 y se recalcula mu hasta que todos
    los activos quedan positivos.

    Los usuarios con ganancia propia nula reciben 0.
    """
    gains = np.real(np.diag(coupling_abs2))
    interference = coupling_abs2 @ p_prev - gains * p_prev
    offsets_all = (interference + noise_level)

    valid = gains > 0
    if not np.any(valid):
        raise DegenerateChannelError("Todas las ganancias efectivas son cero")
    offsets = offsets_all[valid] / gains[valid]

    if active_set:
        active = np.ones(offsets.size, dtype=bool)
        while True:
            level = (total_power + offsets[active].sum()) / active.sum()
            allocation = level - offsets
            dropped = active & (allocation <= 0)
            if not np.any(dropped):
                break
            active &= ~dropped
        allocation = np.where(active, allocation, 0.0)
    else:
        level = (total_power + offsets.sum()) / offsets.size
        allocation = np.maximum(level - offsets, 0.0)
        allocation *= total_power / allocation.sum()

    p = np.zeros_like(gains)
    p[valid] = allocation
    return p


@dataclass
class IterationOutcome:
    """Mejor iterado y trazas de la iteración alternada"""
    power: np.ndarray
    state: Any
    coupling_abs2: np.ndarray
    sum_rate: float
    final_power: np.ndarray
    trace: List[float] = field(default_factory=list)
    p_change_trace: List[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def alternate_precoding_and_power(
    K: int,
    total_power: float,
    noise_level: float,
    t_max: int,
    eps_th: float,
    build_state: Callable[[np.ndarray], Tuple[Any, np.ndarray]],
    active_set: bool = False,
    tag: str = "DOWNLINK",
) -> IterationOutcome:
    """
    Alternar precoders y waterfilling desde p = P/K hasta |dp|_1 < eps_th o t_max.

    build_state(p) devuelve (estado, |a_ki|^2) con los precoders calculados
    para p. Se conserva el mejor iterado (la iteración no es monótona).
    """
    p = np.full(K, total_power / K)
    state, coupling = build_state(p)
    rate = float(np.sum(rates_from_sinr(sinr_from_coupling(coupling, p, noise_level))))

    outcome = IterationOutcome(
        power=p, state=state, coupling_abs2=coupling, sum_rate=rate, final_power=p, trace=[rate],
    )

    change = np.inf
    for t in range(1, t_max + 1):
        if t > 1:
            state, coupling = build_state(p)
        p_next = waterfill_from_coupling(coupling, noise_level, total_power, p, active_set)
        rate = float(np.sum(rates_from_sinr(sinr_from_coupling(coupling, p_next, noise_level))))
        change = float(np.sum(np.abs(p_next - p)))
        p = p_next

        outcome.trace.append(rate)
        outcome.p_change_trace.append(change)
        outcome.iterations = t
        outcome.final_power = p
        if rate > outcome.sum_rate:
            outcome.power, outcome.state, outcome.coupling_abs2, outcome.sum_rate = p, state, coupling, rate

        if change < eps_th:
            outcome.converged = True
            break

    if not outcome.converged:
        print(f"⚠️ [{tag}] Sin convergencia tras {t_max} iteraciones (|dp|_1={change:.4g})")
    return outcome


# ---------------------------------------------------------------------------
# Cylinder DCAA
# ---------------------------------------------------------------------------

def _dual_sigma2(scen: DownlinkScenario) -> float:
    # sigma^2 = 0 no define un uplink dual; se usa 1
    return scen.sigma2 if scen.sigma2 > 0 else 1.0


def mmse_precoder(S: SelectionMatrix, scen: DownlinkScenario, p: PowerLike, k: int) -> np.ndarray:
    """
    Precoder MMSE unitario del usuario k obtenido del uplink dual.

    w_k = C^-1 S conj(h_k) / ||.|| con C = S(sum_{i!=k} p_i conj(h_i) h_i^T + M sigma^2 I)S^T.
    Con sigma^2 = 0 el uplink dual usa sigma^2 = 1.
    """
    powers = _power_values(p)
    dual = S.apply(scen.channels).conj()
    others = np.arange(scen.K) != k

    interference = (dual[others].T * powers[others]) @ dual[others].conj()
    covariance = interference + scen.M * _dual_sigma2(scen) * np.eye(S.n_rf)
    return unit_norm(hermitian_solve(covariance, dual[k]))


def mmse_precoders(S: SelectionMatrix, scen: DownlinkScenario, p: PowerLike) -> np.ndarray:
    """Precoders de todos los usuarios, K x n_rf"""
    return np.array([mmse_precoder(S, scen, p, k) for k in range(scen.K)])


def coupling_matrix(S: SelectionMatrix, scen: DownlinkScenario, precoders: np.ndarray) -> np.ndarray:
    """a_ki = h_k^T S^T w_i (sin el factor 1/sqrt(M) del splitter)"""
    return S.apply(scen.channels) @ np.asarray(precoders).T


def sinr_downlink(
    S: SelectionMatrix,
    precoders: np.ndarray,
    scen: DownlinkScenario,
    p: PowerLike,
    k: int,
) -> float:
    """
    SINR_k = (1/M) p_k |h_k^T S^T w_k|^2 / ((1/M) sum_{i!=k} p_i |h_k^T S^T w_i|^2 + sigma^2)
    """
    powers = _power_values(p)
    received = np.abs(coupling_matrix(S, scen, precoders)[k]) ** 2 * powers / scen.M
    signal = received[k]
    denominator = received.sum() - signal + scen.sigma2
    if signal == 0:
        return 0.0
    if denominator == 0:
        return float("inf")
    return float(signal / denominator)


def waterfill(
    S: SelectionMatrix,
    precoders: np.ndarray,
    scen: DownlinkScenario,
    p_prev: PowerLike,
    active_set: bool = False,
) -> PowerAllocation:
    """
    Asignación de potencia por waterfilling con los precoders dados.

    Args:
        S: Matriz de selección
        precoders: K x n_rf
        scen: Escenario downlink
        p_prev: Potencias de la iteración anterior (fijan la interferencia Z_k)
        active_set: Usar la variante de conjunto activo en vez del reescalado

    Returns:
        PowerAllocation que suma P_DL
    """
    coupling = np.abs(coupling_matrix(S, scen, precoders)) ** 2
    p = waterfill_from_coupling(coupling, scen.noise_level, scen.total_power, _power_values(p_prev), active_set)
    return PowerAllocation(p=p, total_power=scen.total_power)


def dual_uplink_selection(scen: DownlinkScenario, p: np.ndarray, n_rf: int) -> SelectionMatrix:
    """Selección greedy sobre los canales duales conj(h) con potencias p"""
    dual_sigma2 = _dual_sigma2(scen)
    dual = UplinkScenario(
        channels=scen.channels.conj(),
        transmit_snr=_power_values(p) / dual_sigma2,
        M=scen.M,
        sigma2=dual_sigma2,
    )
    return uplink.greedy_select(dual, n_rf).selection


def optimize_downlink(
    channels: np.ndarray,
    total_power: float,
    n_rf: int,
    t_max: int = 20,
    eps_th: float = 0.01,
    *,
    M: int,
    sigma2: float = 1.0,
    update_selection: bool = False,
    active_set: bool = False,
) -> LinkReport:
    """
    Optimización alternada del downlink del DCAA.

    La selección se obtiene una sola vez con la selección greedy sobre los
    canales duales y p = P_DL/K. Con update_selection se vuelve a
    seleccionar al inicio de cada iteración con las potencias vigentes.

    Args:
        channels: Canales efectivos K x 2N
        total_power: P_DL
        n_rf: Cadenas RF
        t_max: Iteraciones máximas
        eps_th: Umbral de |p(t) - p(t-1)|_1
        M: Elementos por sub-array (splitter 1/M)
        sigma2: Potencia de ruido
        update_selection: Re-seleccionar sub-arrays en cada iteración
        active_set: Waterfilling de conjunto activo

    Returns:
        LinkReport del mejor iterado, con trazas por iteración
    """
    scen = DownlinkScenario(channels=channels, total_power=total_power, M=M, sigma2=sigma2, t_max=t_max, eps_th=eps_th)
    fixed_selection = dual_uplink_selection(scen, np.full(scen.K, total_power / scen.K), n_rf)

    def build_state(p: np.ndarray):
        selection = dual_uplink_selection(scen, p, n_rf) if update_selection else fixed_selection
        precoders = mmse_precoders(selection, scen, p)
        coupling = np.abs(coupling_matrix(selection, scen, precoders)) ** 2
        return (selection, precoders), coupling

    outcome = alternate_precoding_and_power(
        K=scen.K,
        total_power=total_power,
        noise_level=scen.noise_level,
        t_max=t_max,
        eps_th=eps_th,
        build_state=build_state,
        active_set=active_set,
        tag="DOWNLINK",
    )

    selection, precoders = outcome.state
    sinr = sinr_from_coupling(outcome.coupling_abs2, outcome.power, scen.noise_level)
    rates = rates_from_sinr(sinr)
    return LinkReport(
        per_user_sinr=sinr,
        per_user_rate=rates,
        sum_rate=float(np.sum(rates)),
        selection=selection,
        combiners=precoders,
        trace=outcome.trace,
        power=outcome.power,
        final_power=outcome.final_power,
        p_change_trace=outcome.p_change_trace,
        iterations=outcome.iterations,
        converged=outcome.converged,
    )


def simulate_downlink_symbols(
    S: SelectionMatrix,
    precoders: np.ndarray,
    scen: DownlinkScenario,
    p: PowerLike,
    n_symbols: int = 100_000,
    rng=None,
) -> np.ndarray:
    """
    SINR empírico por usuario simulando símbolos.

    x = sqrt(1/M) S^T W s, y_k = h_k^T x + z_k. Sin ruido ni interferencia
    el SINR es inf.
    """
    generator = np.random.default_rng(rng)
    powers = _power_values(p)
    precoders = np.asarray(precoders)

    symbols = complex_gaussian(generator, (n_symbols, scen.K)) * np.sqrt(powers)
    transmitted = np.zeros((n_symbols, scen.channels.shape[1]), dtype=complex)
    transmitted[:, list(S.omega)] = np.sqrt(1 / scen.M) * (symbols @ precoders)

    noise = complex_gaussian(generator, (n_symbols, scen.K)) * np.sqrt(scen.sigma2)
    received = transmitted @ scen.channels.T + noise

    own_gain = np.diag(coupling_matrix(S, scen, precoders))
    signal = np.sqrt(1 / scen.M) * own_gain * symbols
    return empirical_sinr(signal, received - signal)
