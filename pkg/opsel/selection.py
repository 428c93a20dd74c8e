"""
Selezione sequenziale OCBA tra i candidati (passi 2-3 della procedura OPSEL).

A ogni iterazione k il budget delta_t viene ripartito con ocba_allocate; ogni
candidato l valuta max(0, N_k,l - N_k-1,l) scenari freschi estratti da
evaluation_rng(seed, l, k). Le valutazioni girano in parallelo ma sono
ridotte in ordine di candidato, quindi il risultato non dipende da
max_parallel.
"""

import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import DegenerateState
from core.report_models import CandidateRecord, OpselIteration, OpselReport, OpselTiming
from core.states import SolveMethod
from forecast.models import ForecastModel
from forecast.scenarios import evaluation_rng
from grid.system import PowerSystem
from opsel.ocba import OcbaState, equal_allocate, ocba_allocate
from opsel.search import Candidate, OpselProblem, gather_jobs, parallel_candidate_search
from suc.dispatch import DispatchEvaluator
from suc.model import Prices
from suc.saa import SolverOptions, solve_saa_suc
from suc.schedule import CommitmentSchedule
from utils.logging_config import get_logger

logger = get_logger(__name__)


class SucOpselProblem:
    """
    Problema OPSEL per la SUC data-driven.

    search risolve la SAA con S scenari del modello di previsione; evaluate
    stima i costi totali di una schedule su scenari freschi dello stesso
    modello. L'oggetto viene serializzato verso i processi del pool.
    """

    def __init__(
        self,
        system: PowerSystem,
        loads,
        forecast: ForecastModel,
        prices: Prices,
        method: Union[SolveMethod, str] = SolveMethod.LSHAPED,
        options: Optional[SolverOptions] = None
    ):
        self.system = system
        self.loads = np.asarray(loads, dtype=float)
        self.forecast = forecast
        self.prices = prices
        self.method = SolveMethod(method)
        self.options = options or SolverOptions()
        self._evaluator: Optional[DispatchEvaluator] = None

    @property
    def evaluator(self) -> DispatchEvaluator:
        if self._evaluator is None:
            self._evaluator = DispatchEvaluator(self.system, self.loads, self.prices, self.forecast.horizon)
        return self._evaluator

    def __getstate__(self) -> Dict[str, Any]:
        state = dict(self.__dict__)
        state["_evaluator"] = None
        return state

    def search(self, worker: int, seed: int, S: int) -> Tuple[CommitmentSchedule, np.ndarray]:
        result = solve_saa_suc(self.system, self.loads, self.forecast, S, seed, self.prices,
                               self.method, self.options)
        return result.schedule, self.evaluator.scenario_costs(result.schedule, result.scenarios)

    def evaluate(self, decision: CommitmentSchedule, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.evaluator.scenario_costs(decision, self.forecast.sample(rng, n))


@dataclass
class OpselOutcome:
    """Candidato selezionato, report e candidati distinti con le statistiche finali"""
    best: Candidate
    report: OpselReport
    candidates: List[Candidate]
    state: OcbaState
    duplicates: Dict[int, List[int]] = field(default_factory=dict)


def _evaluate_job(problem: OpselProblem, decision: Any, n: int, seed: int, worker: int, k: int) -> np.ndarray:
    return np.asarray(problem.evaluate(decision, n, evaluation_rng(seed, worker, k)), dtype=float)


async def select_iteration(
    state: OcbaState,
    delta_t: int,
    problem: OpselProblem,
    candidates: Sequence[Candidate],
    seed: int,
    classic: bool = False,
    max_parallel: int = 1,
    equal: bool = False
) -> OpselIteration:
    """
    Esegue una iterazione di allocazione e valutazione.

    Args:
        state: Statistiche cumulate (aggiornate in place)
        delta_t: Scenari da distribuire in questa iterazione
        problem: Problema OPSEL
        candidates: Candidati distinti, allineati agli indici di state
        seed: Seed base della selezione
        classic: Regola OCBA classica
        max_parallel: Processi concorrenti per le valutazioni
        equal: Allocazione uniforme (termine di confronto)

    Returns:
        OpselIteration: Record della iterazione
    """
    if len(candidates) != state.n_candidates:
        raise DegenerateState("candidates and state are not aligned")
    k = state.iteration + 1
    allocation = equal_allocate(state, delta_t) if equal else ocba_allocate(state, delta_t, classic)

    jobs = [
        (problem, cand.schedule, int(n), seed, cand.worker, k)
        for cand, n in zip(candidates, allocation.increments) if n > 0
    ]
    results = await gather_jobs(_evaluate_job, jobs, max_parallel)
    for result in results:
        if isinstance(result, Exception):
            raise result

    index = {cand.worker: j for j, cand in enumerate(candidates)}
    for job, costs in zip(jobs, results):
        state.merge(index[job[4]], costs)

    state.iteration = k
    state.budget_used += int(allocation.increments.sum())

    record = OpselIteration(
        k=k,
        N=[int(n) for n in state.counts],
        mean=[float(v) for v in state.means],
        var=[float(v) for v in state.variances],
        best=candidates[state.best].worker,
        increments=[int(n) for n in allocation.increments],
        real_targets=[float(v) for v in allocation.real_targets],
    )
    logger.debug("opsel_iteration", k=k, increments=record.increments, best=record.best,
                 budget_used=state.budget_used)
    return record


def _deduplicate(candidates: List[Candidate], state: OcbaState):
    """Fonde i candidati con schedule identica nel primo che la propone"""
    first: Dict[bytes, int] = {}
    keep: List[int] = []
    duplicates: Dict[int, List[int]] = {}
    for j, cand in enumerate(candidates):
        key = cand.key()
        if key in first:
            owner = first[key]
            state.absorb(owner, j)
            duplicates.setdefault(candidates[owner].worker, []).append(cand.worker)
        else:
            first[key] = j
            keep.append(j)
    if len(keep) < len(candidates):
        logger.info("duplicate_candidates_merged", distinct=len(keep), total=len(candidates))
    return [candidates[j] for j in keep], state.subset(keep), duplicates


async def run_opsel(
    problem: OpselProblem,
    L: int,
    S: int,
    T: int,
    delta_t: int,
    seed: int,
    max_parallel: int = 1,
    classic: bool = False,
    equal: bool = False
) -> OpselOutcome:
    """
    Procedura completa di ottimizzazione e selezione.

    Args:
        problem: Problema OPSEL
        L: Numero di worker per la ricerca
        S: Scenari per ricerca (N_0,l = S)
        T: Budget di selezione oltre L*S (0 = solo ricerca)
        delta_t: Scenari per iterazione; l'ultima e' troncata al budget residuo
        seed: Seed base (ricerca: seed XOR l; valutazione: (seed, l, k))
        max_parallel: Processi concorrenti
        classic: Regola OCBA classica
        equal: Allocazione uniforme al posto di OCBA

    Returns:
        OpselOutcome: Miglior candidato e report
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if delta_t < 1:
        raise ValueError("delta_t must be >= 1")

    started = time.perf_counter()
    found = await parallel_candidate_search(problem, L, S, seed, max_parallel)
    state = OcbaState.from_samples([c.search_costs for c in found])
    candidates, state, duplicates = _deduplicate(found, state)
    search_seconds = time.perf_counter() - started

    started = time.perf_counter()
    iterations: List[OpselIteration] = []
    if len(candidates) >= 2:
        while state.budget_used < T:
            step = min(delta_t, T - state.budget_used)
            iterations.append(
                await select_iteration(state, step, problem, candidates, seed, classic, max_parallel, equal)
            )
    selection_seconds = time.perf_counter() - started

    best = candidates[state.best]
    variances = state.variances
    records = [
        CandidateRecord(
            worker=cand.worker,
            seed=cand.seed,
            search_mean=cand.search_mean,
            search_variance=cand.search_variance,
            final_count=int(state.counts[j]),
            final_mean=float(state.means[j]),
            final_variance=float(variances[j]),
            duplicates=duplicates.get(cand.worker, []),
        )
        for j, cand in enumerate(candidates)
    ]
    report = OpselReport(
        workers=L,
        scenarios=S,
        budget=T,
        delta_t=delta_t,
        seed=seed,
        best_worker=best.worker,
        candidates=records,
        iterations=iterations,
        budget_used=state.budget_used,
        timing=OpselTiming(search_seconds=search_seconds, selection_seconds=selection_seconds),
    )
    logger.info(
        "opsel_completed",
        best_worker=best.worker,
        distinct=len(candidates),
        iterations=len(iterations),
        budget_used=state.budget_used,
        search_seconds=round(search_seconds, 3),
        selection_seconds=round(selection_seconds, 3)
    )
    return OpselOutcome(best=best, report=report, candidates=candidates, state=state,
                        duplicates=duplicates)
