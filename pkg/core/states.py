from enum import Enum


class Policy(str, Enum):
    """Policy di unit commitment confrontate negli studi"""
    DETERMINISTIC = "deterministic"
    EMPIRICAL = "empirical"
    DATA_DRIVEN = "data_driven"
    OPSEL = "opsel"  # data-driven + selezione OCBA


class ForecastVariant(str, Enum):
    """Varianti del modello di previsione eolica"""
    NORMAL_PLUG_IN = "normal_plug_in"
    POSTERIOR_PREDICTIVE = "posterior_predictive"
    PERSISTENCE_POINT = "persistence_point"
    PERSISTENCE_EMPIRICAL = "persistence_empirical"


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class MilpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    NODE_LIMIT = "node_limit"


class SolveMethod(str, Enum):
    EXTENSIVE = "extensive"
    LSHAPED = "lshaped"


class RowSense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="
