"""Gerarchia di eccezioni del toolkit SUC."""

from typing import Optional, Sequence


class SucError(Exception):
    """Radice di tutti gli errori del toolkit"""


# ---------------------------------------------------------------- grid

class GridDataError(SucError, ValueError):
    """Errore nei dati di sistema, con file e riga incriminati"""

    def __init__(self, message: str, file: Optional[str] = None, row: Optional[int] = None):
        self.file = file
        self.row = row
        where = ""
        if file is not None:
            where = f" [{file}" + (f", row {row}" if row is not None else "") + "]"
        super().__init__(f"{message}{where}")


class MissingColumn(GridDataError):
    pass


class DuplicateId(GridDataError):
    pass


class InvalidValue(GridDataError):
    pass


class DisconnectedNetwork(GridDataError):
    pass


class SingularSusceptanceMatrix(SucError, ValueError):
    pass


class ZeroDemand(SucError, ValueError):
    pass


# ------------------------------------------------------------ forecast

class InsufficientHistory(SucError, ValueError):
    pass


# -------------------------------------------------------------- solver

class SolverError(SucError):
    """Fallimento di un solver (exit code 3 da CLI)"""


class NumericalFailure(SolverError):
    def __init__(self, message: str, iterations: int):
        self.iterations = iterations
        super().__init__(f"{message} (after {iterations} pivots)")


class InfeasibleProblem(SolverError):
    pass


class UnboundedProblem(SolverError):
    pass


class NodeLimitReached(SolverError):
    def __init__(self, message: str, nodes: int):
        self.nodes = nodes
        super().__init__(message)


class IterationLimitReached(SolverError):
    """L-shaped senza convergenza: trasporta incumbent e bound"""

    def __init__(self, message: str, incumbent: Optional[Sequence[float]],
                 lower_bound: float, upper_bound: float):
        self.incumbent = incumbent
        self.lower_bound = lower_bound
        self.upper_bound = upper_bound
        super().__init__(f"{message} (lb={lower_bound:.6g}, ub={upper_bound:.6g})")


class SubproblemInfeasible(SolverError):
    pass


# ----------------------------------------------------------------- suc

class DimensionMismatch(SucError, ValueError):
    pass


class ScheduleViolation(SucError, ValueError):
    def __init__(self, message: str, unit: int, hour: int):
        self.unit = unit
        self.hour = hour
        super().__init__(f"{message} (unit {unit}, hour {hour})")


# --------------------------------------------------------------- opsel

class DegenerateState(SucError, ValueError):
    pass


# ------------------------------------------------------------- harness

class ConfigError(SucError, ValueError):
    pass


class InvalidPenetration(SucError, ValueError):
    pass
