"""
Canal estadístico 3GPP Indoor-office NLoS (clusters + rayos) y canales efectivos.

Cada usuario tiene su propio RngStream, así que la generación de un usuario
no depende de cuántos usuarios haya ni del orden en que se generen.
"""

import hashlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from app.services.cylinder import CylinderArray, subarray_outputs_many
from app.services.errors import ConfigurationError
from app.services.geometry import wrap_angle
from app.services.pattern import ElementPattern, element_gain


# Separación entre trials en el espacio de stream-ids
USERS_PER_TRIAL = 1 << 20


@dataclass(frozen=True)
class RngStream:
    """Stream aleatorio reproducible identificado por (seed, stream_id)"""
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        """Nuevo Generator; dos llamadas producen la misma secuencia"""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,)))


def stream_for(seed: int, trial: int, user: int) -> RngStream:
    """
    Stream de un usuario dentro de un trial.

    Agregar usuarios no altera los canales de los usuarios anteriores.
    """
    return RngStream(seed=seed, stream_id=trial * USERS_PER_TRIAL + user)


def _as_generator(rng: Union[RngStream, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass(frozen=True)
class ChannelParams:
    """Parámetros Indoor-office NLoS (3GPP TR 38.901); f_c en Hz, spreads de rayo en grados"""
    f_c: float = 47.2e9
    n_clusters: int = 19
    n_rays: int = 20
    r_tau: float = 3.0
    c_phi: float = 1.273
    c_theta: float = 1.184
    c_asa_deg: float = 8.53
    c_eas_deg: float = 9.0

    def __post_init__(self):
        if self.f_c <= 0:
            raise ConfigurationError(f"f_c debe ser positiva, recibido: {self.f_c}")
        if self.n_clusters < 1 or self.n_rays < 1:
            raise ConfigurationError("n_clusters y n_rays deben ser >= 1")
        if self.r_tau <= 1:
            raise ConfigurationError(f"r_tau debe ser > 1, recibido: {self.r_tau}")
        if self.c_asa_deg < 0 or self.c_eas_deg < 0:
            raise ConfigurationError("Los spreads por cluster no pueden ser negativos")

    @property
    def log_frequency(self) -> float:
        """log10(1 + f_c en GHz)"""
        return float(np.log10(1 + self.f_c / 1e9))

    def large_scale_statistics(self) -> Dict[str, Tuple[float, float]]:
        """(media, desviación) de lgDS, lgASA y lgEAS"""
        lf = self.log_frequency
        return {
            "lgDS": (-7.173 - 0.28 * lf, 0.10 * lf + 0.055),
            "lgASA": (1.863 - 0.11 * lf, 0.12 * lf + 0.059),
            "lgEAS": (1.387 - 0.15 * lf, -0.09 * lf + 0.746),
        }


@dataclass(frozen=True)
class LargeScaleParameters:
    """DS en segundos, ASA y EAS en grados"""
    delay_spread: float
    asa_deg: float
    eas_deg: float


@dataclass(frozen=True)
class ClusterSet:
    """
    Clusters de un usuario.

    Los ángulos se guardan como offsets respecto a la dirección LoS del
    usuario (X*phi' + Y, en radianes); generate_rays suma la LoS.
    """
    delays: np.ndarray
    powers: np.ndarray
    large_scale: LargeScaleParameters
    azimuth_offsets: np.ndarray
    zenith_offsets: np.ndarray


@dataclass(frozen=True)
class PathSet:
    """Realización multitrayecto de un usuario: L = N_c*N_r rayos"""
    los_phi: float
    los_theta: float
    phi: np.ndarray
    theta: np.ndarray
    alpha: np.ndarray

    @property
    def n_paths(self) -> int:
        return int(self.alpha.size)

    def scaled(self, factor: complex) -> "PathSet":
        return PathSet(self.los_phi, self.los_theta, self.phi, self.theta, self.alpha * factor)

    def content_hash(self) -> str:
        """SHA-256 sobre los bytes canónicos (float64 little-endian) del canal"""
        payload = np.concatenate([
            [self.los_phi, self.los_theta],
            self.phi,
            self.theta,
            self.alpha.real,
            self.alpha.imag,
        ]).astype("<f8")
        return hashlib.sha256(payload.tobytes()).hexdigest()

    def to_records(self) -> List[Dict[str, float]]:
        """Rayos como lista de {phi_rad, theta_rad, alpha_re, alpha_im}"""
        return [
            {"phi_rad": float(p), "theta_rad": float(t), "alpha_re": float(a.real), "alpha_im": float(a.imag)}
            for p, t, a in zip(self.phi, self.theta, self.alpha)
        ]

    @classmethod
    def from_records(cls, records: List[Dict[str, float]], los: Tuple[float, float]) -> "PathSet":
        return cls(
            los_phi=float(los[0]),
            los_theta=float(los[1]),
            phi=np.array([r["phi_rad"] for r in records], dtype=float),
            theta=np.array([r["theta_rad"] for r in records], dtype=float),
            alpha=np.array([complex(r["alpha_re"], r["alpha_im"]) for r in records]),
        )


def draw_user_los(rng: Union[RngStream, np.random.Generator]) -> Tuple[float, float]:
    """Dirección LoS del usuario: phi ~ U(-pi, pi), theta = pi/2"""
    generator = _as_generator(rng)
    return float(generator.uniform(-np.pi, np.pi)), np.pi / 2


def draw_large_scale_parameters(rng: Union[RngStream, np.random.Generator], params: ChannelParams) -> LargeScaleParameters:
    """Sortear DS, ASA y EAS log-normales con los parámetros del escenario"""
    generator = _as_generator(rng)
    stats = params.large_scale_statistics()
    lg_ds = generator.normal(*stats["lgDS"])
    lg_asa = generator.normal(*stats["lgASA"])
    lg_eas = generator.normal(*stats["lgEAS"])
    return LargeScaleParameters(
        delay_spread=float(10 ** lg_ds),
        asa_deg=float(10 ** lg_asa),
        eas_deg=float(10 ** lg_eas),
    )


def draw_raw_delays(
    rng: Union[RngStream, np.random.Generator],
    n_clusters: int,
    r_tau: float,
    delay_spread: float,
) -> np.ndarray:
    """tau' = -r_tau * DS * ln(X), X ~ U(0, 1]; sin ordenar ni desplazar"""
    generator = _as_generator(rng)
    uniform = 1.0 - generator.random(n_clusters)
    return -r_tau * delay_spread * np.log(uniform)


def generate_clusters(
    rng: Union[RngStream, np.random.Generator],
    params: ChannelParams,
    large_scale: Optional[LargeScaleParameters] = None,
) -> ClusterSet:
    """
    Generar delays, potencias y ángulos de los N_c clusters.

    Args:
        rng: Stream o Generator del usuario
        params: Parámetros del canal
        large_scale: DS/ASA/EAS fijos (si es None se sortean)

    Returns:
        ClusterSet con delays ordenados (delays[0] = 0) y potencias normalizadas
    """
    generator = _as_generator(rng)
    if large_scale is None:
        large_scale = draw_large_scale_parameters(generator, params)
    n = params.n_clusters
    ds = large_scale.delay_spread

    # Delays y potencias
    raw = draw_raw_delays(generator, n, params.r_tau, ds)
    delays = np.sort(raw - raw.min())
    shadowing = generator.normal(0.0, 3.0, n)
    powers = np.exp(-delays * (params.r_tau - 1) / (params.r_tau * ds)) * 10 ** (-shadowing / 10)
    powers = powers / powers.sum()

    relative = powers / powers.max()

    # Azimut: mapeo inverso gaussiano
    asa = large_scale.asa_deg
    azimuth_prime = 2 * (asa / 1.4) * np.sqrt(-np.log(relative)) / params.c_phi
    azimuth_sign = generator.choice([-1.0, 1.0], size=n)
    azimuth_jitter = generator.normal(0.0, asa / 7, n)
    azimuth_offsets = np.radians(azimuth_sign * azimuth_prime + azimuth_jitter)

    # Cenit: mapeo laplaciano
    eas = large_scale.eas_deg
    zenith_prime = -eas * np.log(relative) / params.c_theta
    zenith_sign = generator.choice([-1.0, 1.0], size=n)
    zenith_jitter = generator.normal(0.0, eas / 7, n)
    zenith_offsets = np.radians(zenith_sign * zenith_prime + zenith_jitter)

    return ClusterSet(
        delays=delays,
        powers=powers,
        large_scale=large_scale,
        azimuth_offsets=azimuth_offsets,
        zenith_offsets=zenith_offsets,
    )


def generate_rays(
    rng: Union[RngStream, np.random.Generator],
    params: ChannelParams,
    clusters: ClusterSet,
    los: Tuple[float, float],
) -> PathSet:
    """
    Expandir cada cluster en N_r rayos con potencia, ángulos y fase propios.

    La potencia total de los rayos suma 1.
    """
    generator = _as_generator(rng)
    shape = (params.n_clusters, params.n_rays)

    alpha_asa = generator.uniform(-2.0, 2.0, shape)
    alpha_eas = generator.uniform(-2.0, 2.0, shape)
    intra = np.exp(-np.sqrt(2) * alpha_asa / 11) * np.exp(-np.sqrt(2) * alpha_eas / 9)
    ray_powers = clusters.powers[:, None] * intra / intra.sum(axis=1, keepdims=True)
    ray_powers = ray_powers / ray_powers.sum()

    spread_az = generator.uniform(-2.0, 2.0, shape)
    spread_zen = generator.uniform(-2.0, 2.0, shape)
    phi = los[0] + clusters.azimuth_offsets[:, None] + np.radians(params.c_asa_deg) * spread_az
    theta = los[1] + clusters.zenith_offsets[:, None] + np.radians(params.c_eas_deg) * spread_zen

    phases = generator.uniform(-np.pi, np.pi, shape)
    alpha = np.sqrt(ray_powers) * np.exp(1j * phases)

    return PathSet(
        los_phi=float(los[0]),
        los_theta=float(los[1]),
        phi=np.asarray(wrap_angle(phi.ravel()), dtype=float),
        theta=np.clip(theta.ravel(), 0.0, np.pi),
        alpha=alpha.ravel(),
    )


def generate_user_channel(stream: RngStream, params: ChannelParams) -> PathSet:
    """LoS, clusters y rayos de un usuario a partir de un único Generator"""
    generator = stream.generator()
    los = draw_user_los(generator)
    clusters = generate_clusters(generator, params)
    return generate_rays(generator, params, clusters, los)


def effective_channel_dcaa(cyl: CylinderArray, paths: PathSet) -> np.ndarray:
    """h = sum_l alpha_l * r(phi_l, theta_l), vector de 2N entradas"""
    outputs = subarray_outputs_many(cyl, paths.phi, paths.theta)
    return paths.alpha @ outputs


def sector_boresight(sector: int) -> float:
    """Orientación del ULA del sector: (sector - 2) * 2*pi/3"""
    if sector not in (1, 2, 3):
        raise ConfigurationError(f"Sector inválido: {sector}")
    return (sector - 2) * 2 * np.pi / 3


def ula_steering(
    pattern: ElementPattern,
    M: int,
    sector: int,
    phi,
    theta,
    fixed_psi: Optional[float] = None,
) -> np.ndarray:
    """
    Respuestas del ULA de media longitud de onda del sector, forma (L, M).

    Args:
        pattern: Patrón de elemento
        M: Elementos del ULA
        sector: Sector servido (1, 2 o 3)
        phi: Azimuts de los rayos
        theta: Cenits de los rayos
        fixed_psi: Elevación fija del patrón en radianes; None usa
            psi = theta - pi/2 como el DCAA
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    xi = wrap_angle(phi - sector_boresight(sector))
    psi = theta - np.pi / 2 if fixed_psi is None else np.full_like(theta, float(fixed_psi))
    amplitude = np.sqrt(element_gain(pattern, xi, psi))
    phases = np.exp(-1j * np.pi * np.outer(np.sin(xi), np.arange(M)))
    return np.atleast_1d(amplitude)[:, None] * phases


def effective_channel_ula(
    pattern: ElementPattern,
    M: int,
    sector: int,
    paths: PathSet,
    fixed_psi: Optional[float] = None,
) -> np.ndarray:
    """h = sum_l alpha_l * a_ULA(sector, phi_l), vector de M entradas"""
    return paths.alpha @ ula_steering(pattern, M, sector, paths.phi, paths.theta, fixed_psi)
