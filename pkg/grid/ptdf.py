"""Shift factor (PTDF) per il flusso DC."""

from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from core.errors import SingularSusceptanceMatrix
from utils.logging_config import get_logger

logger = get_logger(__name__)


def incidence_matrix(n_buses: int, lines: Sequence) -> np.ndarray:
    """Matrice Cft = Cf - Ct (righe = linee, colonne = bus 0-based)"""
    cft = np.zeros((len(lines), n_buses))
    for k, line in enumerate(lines):
        cft[k, line.from_bus - 1] = 1.0
        cft[k, line.to_bus - 1] = -1.0
    return cft


def susceptance_matrices(n_buses: int, lines: Sequence):
    """
    Costruisce Bbus e Bf del flusso DC.

    P = Bbus * theta, flussi = Bf * theta (orientamento from -> to).

    Returns:
        tuple: (Bbus [bus x bus], Bf [linee x bus])
    """
    cft = incidence_matrix(n_buses, lines)
    b = np.array([1.0 / line.reactance for line in lines])
    bf = b[:, None] * cft
    bbus = cft.T @ bf
    return bbus, bf


def is_connected(n_buses: int, lines: Sequence) -> bool:
    if n_buses <= 1:
        return True
    rows = [line.from_bus - 1 for line in lines]
    cols = [line.to_bus - 1 for line in lines]
    graph = csr_matrix((np.ones(len(lines)), (rows, cols)), shape=(n_buses, n_buses))
    n_components, _ = connected_components(graph, directed=False)
    return n_components == 1


def compute_ptdf(buses: Sequence, lines: Sequence, slack_bus: int) -> np.ndarray:
    """
    Calcola la matrice PTDF tramite inversa della Bbus ridotta.

    Riga l, colonna b: MW sulla linea l per 1 MW iniettato al bus b e
    prelevato allo slack. La colonna dello slack e' nulla.

    Args:
        buses: Bus del sistema (id 1..n)
        lines: Linee di trasmissione
        slack_bus: Id del bus di riferimento

    Returns:
        np.ndarray: Matrice [linee x bus]
    """
    n = len(buses)
    if not lines:
        return np.zeros((0, n))
    if not is_connected(n, lines):
        raise SingularSusceptanceMatrix("network is disconnected, reduced Bbus is singular")

    bbus, bf = susceptance_matrices(n, lines)
    keep = [k for k in range(n) if k != slack_bus - 1]
    reduced = bbus[np.ix_(keep, keep)]

    try:
        x_reduced = np.linalg.inv(reduced)
    except np.linalg.LinAlgError as e:
        raise SingularSusceptanceMatrix(str(e)) from e
    if not np.all(np.isfinite(x_reduced)) or np.linalg.cond(reduced) > 1e12:
        raise SingularSusceptanceMatrix("reduced Bbus is ill-conditioned")

    x_full = np.zeros((n, n))
    x_full[np.ix_(keep, keep)] = x_reduced
    ptdf = bf @ x_full
    ptdf[:, slack_bus - 1] = 0.0

    logger.debug("ptdf_computed", lines=len(lines), buses=n, slack_bus=slack_bus)
    return ptdf


def dc_flows(buses: Sequence, lines: Sequence, slack_bus: int, injection: np.ndarray) -> np.ndarray:
    """Flussi di linea da una soluzione diretta Bbus * theta = P (theta_slack = 0)"""
    n = len(buses)
    bbus, bf = susceptance_matrices(n, lines)
    keep = [k for k in range(n) if k != slack_bus - 1]
    theta = np.zeros(n)
    theta[keep] = np.linalg.solve(bbus[np.ix_(keep, keep)], np.asarray(injection)[keep])
    return bf @ theta
