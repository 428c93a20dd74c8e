"""
Metodo L-shaped (Benders) per programmi stocastici a due stadi.

Il master e' un MILP sulle variabili di primo stadio x; per ogni scenario
il ricorso e' un LP i cui rhs e bound dipendono in modo affine da x:

    b(x) = b0 + T_b x,   lo(x) = lo0 + T_lo x,   hi(x) = hi0 + T_hi x

Dai duali (y, lambda, mu) del ricorso in x_hat si ottiene il taglio
Q(x) >= Q(x_hat) + g (x - x_hat) con g = y T_b + lambda T_lo - mu T_hi.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, List, Optional, Sequence, Tuple

import numpy as np

from core.errors import (
    IterationLimitReached, NumericalFailure, SubproblemInfeasible, UnboundedProblem
)
from core.states import LpStatus, RowSense
from solver.lp import LpInstance, LpSolution, solve_lp
from solver.lp_format import write_lp_file
from solver.milp import MilpInstance, MilpSolution, solve_milp
from utils.logging_config import get_logger

logger = get_logger(__name__)

CUT_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RecourseLp:
    """LP di secondo stadio valutato in x_hat, con le mappe affini da x"""
    lp: LpInstance
    T_b: Optional[np.ndarray] = None  # [righe x n1]
    T_lo: Optional[np.ndarray] = None  # [variabili x n1]
    T_hi: Optional[np.ndarray] = None  # [variabili x n1]


@dataclass(frozen=True, eq=False)
class BendersCut:
    """theta >= intercept + coefficients . x"""
    intercept: float
    coefficients: np.ndarray
    scenario: Optional[int] = None  # None = taglio aggregato

    def value(self, x: np.ndarray) -> float:
        return float(self.intercept + self.coefficients @ x)


@dataclass
class LShapedResult:
    x: np.ndarray
    objective: float
    lower_bound: float
    upper_bound: float
    iterations: int
    cuts: List[BendersCut] = field(default_factory=list)
    recourse_values: Optional[np.ndarray] = None  # Q_s nell'incumbent
    bounds: List[Tuple[float, float]] = field(default_factory=list)  # (LB, UB) per iterazione


RecourseBuilder = Callable[[np.ndarray, Any], RecourseLp]


def benders_cut(recourse: RecourseLp, solution: LpSolution, x_hat: np.ndarray,
                scenario: Optional[int] = None) -> BendersCut:
    """Taglio di ottimalita' dai moltiplicatori del ricorso in x_hat"""
    n1 = x_hat.shape[0]
    g = np.zeros(n1)
    if recourse.T_b is not None:
        g += solution.duals @ recourse.T_b
    if recourse.T_lo is not None:
        g += solution.lower_multipliers @ recourse.T_lo
    if recourse.T_hi is not None:
        g -= solution.upper_multipliers @ recourse.T_hi
    intercept = solution.objective - float(g @ x_hat)
    return BendersCut(intercept=intercept, coefficients=g, scenario=scenario)


def solve_recourse(recourse: RecourseLp, scenario_index: int) -> LpSolution:
    solution = solve_lp(recourse.lp)
    if solution.status == LpStatus.INFEASIBLE:
        raise SubproblemInfeasible(
            f"recourse LP infeasible for scenario {scenario_index}: complete recourse violated"
        )
    if solution.status == LpStatus.UNBOUNDED:
        raise UnboundedProblem(f"recourse LP unbounded for scenario {scenario_index}")
    return solution


def _master_with_cuts(master: MilpInstance, cuts: Sequence[BendersCut], n_theta: int,
                      weights: np.ndarray) -> MilpInstance:
    """Master esteso con theta >= 0 e le righe di taglio theta - g x >= e"""
    lp = master.lp
    n1 = lp.n_vars
    c = np.concatenate([lp.c, weights])
    A = np.hstack([lp.A, np.zeros((lp.n_rows, n_theta))])
    rows, rhs = [], []
    for cut in cuts:
        row = np.zeros(n1 + n_theta)
        row[:n1] = -cut.coefficients
        row[n1 + (cut.scenario if cut.scenario is not None else 0)] = 1.0
        rows.append(row)
        rhs.append(cut.intercept)
    if rows:
        A = np.vstack([A, np.vstack(rows)])
    senses = tuple(lp.senses) + (RowSense.GE,) * len(rows)
    b = np.concatenate([lp.b, rhs])
    lo = np.concatenate([lp.lo, np.zeros(n_theta)])
    hi = np.concatenate([lp.hi, np.full(n_theta, np.inf)])
    names = None
    if lp.names is not None:
        names = list(lp.names) + [f"theta_{k}" for k in range(n_theta)]
    return MilpInstance(LpInstance(c, A, senses, b, lo, hi, names), master.binaries)


def solve_two_stage_lshaped(
    master: MilpInstance,
    recourse_builder: RecourseBuilder,
    scenarios: Sequence[Any],
    tol: float = 1e-6,
    max_iter: int = 200,
    multicut: bool = False,
    node_limit: int = 100000,
    debug_cuts: bool = False,
    dump_dir: Optional[str] = None
) -> LShapedResult:
    """
    L-shaped a taglio singolo (o multi-taglio) con ricorso completo.

    L'obiettivo e' c'x + (1/S) sum_s Q_s(x), con Q_s >= 0. Ogni iterazione
    risolve il master, valuta i ricorsi nell'ordine degli scenari e aggiunge
    un taglio mediato (oppure S tagli con multicut).

    Args:
        master: MILP di primo stadio (senza theta)
        recourse_builder: (x, scenario) -> RecourseLp
        scenarios: Scenari, valutati nell'ordine dato
        tol: Chiusura UB - LB <= tol (1 + |UB|)
        max_iter: Iterazioni massime
        multicut: Un theta per scenario
        node_limit: Nodi del B&B del master
        debug_cuts: Ricontrolla la validita' dei tagli a ogni iterazione
        dump_dir: Se impostato, scrive master e ricorsi in formato LP

    Returns:
        LShapedResult: x*, obiettivo e bound

    Raises:
        IterationLimitReached: Bound non chiusi entro max_iter
        SubproblemInfeasible: Ricorso non completo
    """
    S = len(scenarios)
    if S < 1:
        raise ValueError("at least one scenario is required")
    n_theta = S if multicut else 1
    weights = np.full(n_theta, 1.0 / S) if multicut else np.ones(1)

    cuts: List[BendersCut] = []
    evaluated: List[Tuple[np.ndarray, np.ndarray]] = []
    lower_bound, upper_bound = -math.inf, math.inf
    incumbent: Optional[np.ndarray] = None
    incumbent_q: Optional[np.ndarray] = None
    bounds: List[Tuple[float, float]] = []
    started = time.perf_counter()

    for k in range(1, max_iter + 1):
        extended = _master_with_cuts(master, cuts, n_theta, weights)
        if dump_dir is not None:
            write_lp_file(extended.lp, f"{dump_dir}/master_{k:03d}.lp", extended.binaries)
        sol: MilpSolution = solve_milp(extended, gap_tol=tol * 0.1, node_limit=node_limit)
        lower_bound = max(lower_bound, sol.bound)
        x_hat = np.round(sol.x[:master.n_vars], 12)
        x_hat[list(master.binaries)] = np.round(x_hat[list(master.binaries)])

        q = np.empty(S)
        new_cuts: List[BendersCut] = []
        for s, scenario in enumerate(scenarios):
            recourse = recourse_builder(x_hat, scenario)
            if dump_dir is not None and k == 1:
                write_lp_file(recourse.lp, f"{dump_dir}/recourse_{s:03d}.lp")
            rsol = solve_recourse(recourse, s)
            q[s] = rsol.objective
            new_cuts.append(benders_cut(recourse, rsol, x_hat, scenario=s))

        value = float(master.lp.c @ x_hat + q.mean())
        if value < upper_bound:
            upper_bound, incumbent, incumbent_q = value, x_hat.copy(), q.copy()

        if multicut:
            cuts.extend(new_cuts)
        else:
            # riduzione deterministica nell'ordine degli scenari
            g = np.zeros(master.n_vars)
            e = 0.0
            for cut in new_cuts:
                g += cut.coefficients
                e += cut.intercept
            cuts.append(BendersCut(intercept=e / S, coefficients=g / S))

        evaluated.append((x_hat.copy(), q.copy()))
        bounds.append((lower_bound, upper_bound))
        if debug_cuts:
            _check_cuts(cuts, evaluated, multicut)

        logger.debug(
            "lshaped_iteration",
            k=k,
            lower_bound=lower_bound,
            upper_bound=upper_bound,
            cuts=len(cuts),
            master_nodes=sol.nodes
        )
        if upper_bound - lower_bound <= tol * (1.0 + abs(upper_bound)):
            logger.info(
                "lshaped_converged",
                iterations=k,
                objective=upper_bound,
                lower_bound=lower_bound,
                scenarios=S,
                elapsed=round(time.perf_counter() - started, 3)
            )
            return LShapedResult(
                x=incumbent,
                objective=upper_bound,
                lower_bound=lower_bound,
                upper_bound=upper_bound,
                iterations=k,
                cuts=cuts,
                recourse_values=incumbent_q,
                bounds=bounds,
            )

    logger.warning("lshaped_iteration_limit", max_iter=max_iter, lower_bound=lower_bound,
                   upper_bound=upper_bound)
    raise IterationLimitReached(
        f"L-shaped did not converge in {max_iter} iterations",
        incumbent=None if incumbent is None else incumbent.tolist(),
        lower_bound=lower_bound,
        upper_bound=upper_bound,
    )


def _check_cuts(cuts: Sequence[BendersCut], evaluated: Sequence[Tuple[np.ndarray, np.ndarray]],
                multicut: bool) -> None:
    """Ogni taglio deve sottostimare il ricorso in tutti i punti valutati"""
    for x, q in evaluated:
        for cut in cuts:
            true_value = q[cut.scenario] if multicut else q.mean()
            if cut.value(x) > true_value + CUT_TOL * (1.0 + abs(true_value)):
                logger.error("invalid_benders_cut", cut_value=cut.value(x), recourse=true_value)
                raise NumericalFailure("Benders cut overestimates the recourse function", len(cuts))
