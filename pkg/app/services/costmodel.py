"""
Costo de hardware: cylinder DCAA vs ULA con HBF y sectorización.

Cotizaciones tomadas del fabricante para mmWave a 37 GHz:
- Antena: 0.01 USD por elemento
- Phase shifter TPG2102 de 5 bits: 131.20 USD
- Switch RF SPDT TGS4302: 28.62 USD

Los montos se manejan con Decimal para reproducir los totales al centavo.
"""

from dataclasses import dataclass
from decimal import Decimal
from typing import Dict, List, Optional, Union

from app.services.errors import ConfigurationError


# Cotización por banda. Formato: {banda: {"c_an": precio, "c_ps": precio, "c_sw": precio}}
COMPONENT_QUOTATIONS = {
    "37GHz": {
        "c_an": Decimal("0.01"),     # Elemento de antena
        "c_ps": Decimal("131.20"),   # Phase shifter 5 bits (TPG2102)
        "c_sw": Decimal("28.62"),    # Switch SPDT (TGS4302)
    },
}

DEFAULT_BAND = "37GHz"

CENT = Decimal("0.01")

Amount = Union[Decimal, float, int, str]


def _amount(value: Amount) -> Decimal:
    # str() evita arrastrar el error binario de los floats (0.01 -> 0.01000000000000000020816...)
    return value if isinstance(value, Decimal) else Decimal(str(value))


@dataclass(frozen=True)
class CostInputs:
    """Precios unitarios y dimensiones del sistema (M, N, n_rf)"""
    M: int
    N: int
    n_rf: int
    c_ps: Decimal
    c_sw: Decimal
    c_an: Optional[Decimal] = None

    def __post_init__(self):
        for name in ("c_an", "c_ps", "c_sw"):
            value = getattr(self, name)
            if value is None:
                continue
            amount = _amount(value)
            if amount < 0:
                raise ConfigurationError(f"{name} no puede ser negativo, recibido: {value}")
            object.__setattr__(self, name, amount)
        if self.M < 1 or self.N < 1 or self.n_rf < 1:
            raise ConfigurationError("M, N y n_rf deben ser >= 1")

    @classmethod
    def from_quotation(cls, M: int, N: int, n_rf: int, band: str = DEFAULT_BAND) -> "CostInputs":
        """
        Armar inputs con la cotización de una banda.

        Example:
            >>> CostInputs.from_quotation(M=128, N=104, n_rf=30).c_sw
            Decimal('28.62')
        """
        prices = get_quotation(band)
        if prices is None:
            raise ConfigurationError(f"Sin cotización para la banda {band}")
        return cls(M=M, N=N, n_rf=n_rf, **prices)

    def _antenna_price(self) -> Decimal:
        if self.c_an is None:
            raise ConfigurationError("c_an es requerido para calcular el costo")
        return self.c_an


def cost_cylinder(inputs: CostInputs) -> Decimal:
    """
    c_cylin = 2*N*M*c_an + n_rf*N*c_sw

    Example:
        >>> cost_cylinder(CostInputs.from_quotation(M=128, N=104, n_rf=30))
        Decimal('89560.64')
    """
    antennas = 2 * inputs.N * inputs.M * inputs._antenna_price()
    switches = inputs.n_rf * inputs.N * inputs.c_sw
    return antennas + switches


def cost_ula(inputs: CostInputs) -> Decimal:
    """
    c_ULA = 3*n_rf*M*c_ps + 3*M*c_an

    Example:
        >>> cost_ula(CostInputs.from_quotation(M=128, N=104, n_rf=30))
        Decimal('1511427.84')
    """
    shifters = 3 * inputs.n_rf * inputs.M * inputs.c_ps
    antennas = 3 * inputs.M * inputs._antenna_price()
    return shifters + antennas


def to_cents(amount: Decimal) -> int:
    """Monto redondeado a centavos enteros"""
    return int((amount / CENT).to_integral_value())


def breakeven_antenna_cost(inputs: CostInputs) -> Decimal:
    """
    Precio de antena que iguala ambos costos.

    c_an* = (3*n_rf*M*c_ps - n_rf*N*c_sw) / (2*N*M - 3*M); ignora inputs.c_an.

    Raises:
        ConfigurationError: si 2NM <= 3M (el cilindro nunca usa más antenas)
    """
    denominator = 2 * inputs.N * inputs.M - 3 * inputs.M
    if denominator <= 0:
        raise ConfigurationError(f"Break-even indefinido: 2NM - 3M = {denominator}")
    numerator = 3 * inputs.n_rf * inputs.M * inputs.c_ps - inputs.n_rf * inputs.N * inputs.c_sw
    return numerator / Decimal(denominator)


def calculate_costs(inputs: CostInputs) -> Dict[str, Union[float, int]]:
    """
    Reporte de costos de ambos sistemas.

    Args:
        inputs: Precios y dimensiones (c_an requerido)

    Returns:
        {
            'cost_cylinder': float,       # Costo del cylinder DCAA, al centavo
            'cost_ula': float,            # Costo del ULA con HBF, al centavo
            'cost_cylinder_cents': int,   # Mismo monto en centavos enteros
            'cost_ula_cents': int,
            'ratio': float,               # cost_cylinder / cost_ula
            'breakeven_c_an': float       # Precio de antena que iguala ambos costos
        }

    Example:
        >>> calculate_costs(CostInputs.from_quotation(M=128, N=104, n_rf=30))['cost_ula']
        1511427.84
    """
    cylinder = to_cents(cost_cylinder(inputs))
    ula = to_cents(cost_ula(inputs))
    ratio = Decimal(cylinder) / Decimal(ula) if ula > 0 else Decimal("NaN")

    return {
        "cost_cylinder": cylinder / 100,
        "cost_ula": ula / 100,
        "cost_cylinder_cents": cylinder,
        "cost_ula_cents": ula,
        "ratio": float(ratio),
        "breakeven_c_an": float(breakeven_antenna_cost(inputs)),
    }


def get_quotation(band: str) -> Optional[Dict[str, Decimal]]:
    """Cotización de una banda o None si no existe"""
    return COMPONENT_QUOTATIONS.get(band)


def list_quotation_bands() -> List[str]:
    return list(COMPONENT_QUOTATIONS.keys())
