"""Branch and bound sulle variabili binarie."""

import heapq
import itertools
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import InfeasibleProblem, NodeLimitReached, UnboundedProblem
from core.states import LpStatus, MilpStatus
from solver.lp import LpInstance, LpSolution, solve_lp
from utils.logging_config import get_logger

logger = get_logger(__name__)

INTEGRALITY_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class MilpInstance:
    """LP con un sottoinsieme di variabili binarie"""
    lp: LpInstance
    binaries: Tuple[int, ...]

    def __post_init__(self):
        binaries = tuple(sorted(set(int(j) for j in self.binaries)))
        if binaries and (binaries[0] < 0 or binaries[-1] >= self.lp.n_vars):
            raise IndexError("binary index outside the variable range")
        object.__setattr__(self, "binaries", binaries)

    @property
    def n_vars(self) -> int:
        return self.lp.n_vars

    def binary_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Bound dell'LP intersecati con [0, 1] sulle binarie"""
        lo, hi = self.lp.lo.copy(), self.lp.hi.copy()
        idx = list(self.binaries)
        lo[idx] = np.maximum(np.ceil(lo[idx] - INTEGRALITY_TOL), 0.0)
        hi[idx] = np.minimum(np.floor(hi[idx] + INTEGRALITY_TOL), 1.0)
        return lo, hi


@dataclass(frozen=True, eq=False)
class MilpSolution:
    status: MilpStatus
    x: np.ndarray
    objective: float
    bound: float
    nodes: int

    @property
    def gap(self) -> float:
        return relative_gap(self.objective, self.bound)


def relative_gap(incumbent: float, bound: float) -> float:
    if not math.isfinite(incumbent):
        return math.inf
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))


@dataclass
class _Node:
    lo: np.ndarray
    hi: np.ndarray
    bound: float
    depth: int


def _most_fractional(x: np.ndarray, binaries: Sequence[int]) -> Optional[int]:
    if not binaries:
        return None
    vals = x[list(binaries)]
    frac = np.abs(vals - np.round(vals))
    k = int(np.argmax(frac))
    if frac[k] <= INTEGRALITY_TOL:
        return None
    return binaries[k]


def solve_milp(
    instance: MilpInstance,
    gap_tol: float = 1e-6,
    node_limit: int = 100000
) -> MilpSolution:
    """
    Branch and bound: ramo sulla binaria piu' frazionaria, discesa in
    profondita' e ripartenza dal nodo con bound migliore quando la discesa
    si chiude.

    Args:
        instance: Problema misto-binario di minimo
        gap_tol: Gap relativo (incumbent - bound) / max(1, |incumbent|)
        node_limit: Nodi massimi esplorati

    Returns:
        MilpSolution: Ottimo o incumbent con status NODE_LIMIT

    Raises:
        InfeasibleProblem: Nessuna soluzione intera
        UnboundedProblem: Rilassamento illimitato
        NodeLimitReached: Limite di nodi senza incumbent
    """
    binaries = list(instance.binaries)
    lo0, hi0 = instance.binary_bounds()
    if np.any(lo0 > hi0):
        raise InfeasibleProblem("binary bounds exclude both 0 and 1")

    counter = itertools.count()
    open_nodes: List[Tuple[float, int, _Node]] = []
    incumbent_x: Optional[np.ndarray] = None
    incumbent = math.inf
    nodes = 0
    dive: Optional[_Node] = _Node(lo0, hi0, -math.inf, 0)
    # bound minimo dei nodi chiusi entro il gap ma sotto l'incumbent
    closed_bound = math.inf

    while dive is not None or open_nodes:
        if dive is None:
            _, _, dive = heapq.heappop(open_nodes)
            if dive.bound >= incumbent - _prune_slack(incumbent, gap_tol):
                closed_bound = min(closed_bound, dive.bound)
                dive = None
                continue

        if nodes >= node_limit:
            break
        node, dive = dive, None
        nodes += 1

        relax: LpSolution = solve_lp(instance.lp.with_bounds(node.lo, node.hi))
        if relax.status == LpStatus.INFEASIBLE:
            continue
        if relax.status == LpStatus.UNBOUNDED:
            raise UnboundedProblem("LP relaxation is unbounded")
        if relax.objective >= incumbent - _prune_slack(incumbent, gap_tol):
            closed_bound = min(closed_bound, relax.objective)
            continue

        j = _most_fractional(relax.x, binaries)
        if j is None:
            x = relax.x.copy()
            x[binaries] = np.round(x[binaries])
            incumbent, incumbent_x = relax.objective, x
            logger.debug("milp_incumbent", objective=incumbent, nodes=nodes)
            continue

        down_hi = node.hi.copy()
        down_hi[j] = 0.0
        up_lo = node.lo.copy()
        up_lo[j] = 1.0
        down = _Node(node.lo, down_hi, relax.objective, node.depth + 1)
        up = _Node(up_lo, node.hi, relax.objective, node.depth + 1)
        # si scende dal lato dell'arrotondamento, l'altro figlio resta aperto
        if relax.x[j] >= 0.5:
            dive, other = up, down
        else:
            dive, other = down, up
        heapq.heappush(open_nodes, (other.bound, next(counter), other))

    pending = [entry[0] for entry in open_nodes] + ([dive.bound] if dive is not None else [])
    bound = min([incumbent, closed_bound] + pending)

    if incumbent_x is None:
        if nodes >= node_limit and (dive is not None or open_nodes):
            raise NodeLimitReached(f"no integer solution within {node_limit} nodes", nodes)
        raise InfeasibleProblem("no integer feasible solution")

    hit_limit = (dive is not None or bool(open_nodes)) and relative_gap(incumbent, bound) > gap_tol
    status = MilpStatus.NODE_LIMIT if hit_limit else MilpStatus.OPTIMAL
    if status == MilpStatus.OPTIMAL:
        bound = max(bound, incumbent - gap_tol * max(1.0, abs(incumbent)))
    else:
        logger.warning("milp_node_limit", nodes=nodes, incumbent=incumbent, bound=bound)

    logger.debug(
        "milp_solved",
        status=status.value,
        nodes=nodes,
        objective=incumbent,
        bound=bound,
        binaries=len(binaries)
    )
    return MilpSolution(status=status, x=incumbent_x, objective=incumbent, bound=bound, nodes=nodes)


def _prune_slack(incumbent: float, gap_tol: float) -> float:
    """Nodi con bound entro il gap dall'incumbent non possono migliorarlo abbastanza"""
    if not math.isfinite(incumbent):
        return 0.0
    return gap_tol * max(1.0, abs(incumbent))
