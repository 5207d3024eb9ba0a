"""
Errores del simulador.

Todos heredan de ValueError para que las rutas y el CLI los traten como
errores de entrada (400) sin tener que conocer cada tipo.
"""


class SimulationError(ValueError):
    """Error base del simulador"""


class ConfigurationError(SimulationError):
    """Parámetros físicos o numéricos inválidos (M < 2, f_c <= 0, grid vacío, etc)"""


class InfeasibleSelectionError(SimulationError):
    """La selección pedida no es realizable (n_rf > candidatos, K > n_rf, guard de enumeración)"""


class NumericalError(SimulationError):
    """Una matriz que debía ser Hermitiana definida positiva no lo es"""


class DegenerateChannelError(SimulationError):
    """Todas las ganancias efectivas son cero"""


class DegeneratePatternError(SimulationError):
    """No se encontró valle del patrón dentro de pi/2"""
