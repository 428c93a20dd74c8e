"""
Ricerca parallela dei candidati (passo 1 della procedura OPSEL).

Ogni worker l risolve una SAA indipendente con seed base_seed XOR l. I job
sono distribuiti con asyncio.gather su un ProcessPoolExecutor; con
max_parallel=1 girano in linea nello stesso processo.
"""

import asyncio
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from core.errors import DegenerateState, SucError
from forecast.scenarios import worker_seed
from utils.logging_config import get_logger

logger = get_logger(__name__)


class OpselProblem(Protocol):
    """Problema di ottimizzazione e selezione"""

    def search(self, worker: int, seed: int, S: int) -> Tuple[Any, np.ndarray]:
        """Decisione candidata e costi per scenario sugli S scenari di ricerca"""

    def evaluate(self, decision: Any, n: int, rng: np.random.Generator) -> np.ndarray:
        """n costi totali su scenari freschi estratti da rng"""


@dataclass(frozen=True, eq=False)
class Candidate:
    """Decisione proposta da un worker"""
    schedule: Any
    worker: int
    seed: int
    search_costs: np.ndarray

    @property
    def search_mean(self) -> float:
        return float(np.mean(self.search_costs))

    @property
    def search_variance(self) -> float:
        n = len(self.search_costs)
        return float(np.var(self.search_costs, ddof=1)) if n > 1 else 0.0

    def key(self) -> bytes:
        return decision_key(self.schedule)


def decision_key(decision: Any) -> bytes:
    if hasattr(decision, "key"):
        return decision.key()
    return np.asarray(decision).tobytes()


async def gather_jobs(fn: Callable, jobs: Sequence[tuple], max_parallel: int = 1,
                      executor: Optional[Executor] = None) -> List[Any]:
    """
    Esegue fn(*job) per ogni job e restituisce i risultati nell'ordine dei job.

    Le eccezioni sono restituite al posto del risultato, come con
    asyncio.gather(return_exceptions=True).
    """
    if max_parallel <= 1 and executor is None:
        results: List[Any] = []
        for job in jobs:
            try:
                results.append(fn(*job))
            except Exception as e:
                results.append(e)
            await asyncio.sleep(0)
        return results

    loop = asyncio.get_running_loop()
    own = executor is None
    pool = executor or ProcessPoolExecutor(max_workers=max_parallel)
    try:
        tasks = [loop.run_in_executor(pool, fn, *job) for job in jobs]
        return await asyncio.gather(*tasks, return_exceptions=True)
    finally:
        if own:
            pool.shutdown(wait=True)


def _search_job(problem: OpselProblem, worker: int, seed: int, S: int):
    decision, costs = problem.search(worker, seed, S)
    return decision, np.asarray(costs, dtype=float)


async def parallel_candidate_search(
    problem: OpselProblem,
    L: int,
    S: int,
    base_seed: int,
    max_parallel: int = 1,
    seeds: Optional[Sequence[int]] = None
) -> List[Candidate]:
    """
    Lancia L ricerche SAA indipendenti.

    Args:
        problem: Problema OPSEL
        L: Numero di worker (>= 2)
        S: Scenari per ricerca
        base_seed: Seed base, il worker l usa base_seed XOR l
        max_parallel: Processi concorrenti
        seeds: Seed espliciti per worker (sovrascrive lo schema XOR)

    Returns:
        List[Candidate]: Candidati dei worker riusciti, in ordine di worker

    Raises:
        DegenerateState: Meno di due worker completati
    """
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    worker_seeds = list(seeds) if seeds is not None else [worker_seed(base_seed, w) for w in range(1, L + 1)]
    if len(worker_seeds) != L:
        raise ValueError("one seed per worker is required")

    logger.info("candidate_search_started", workers=L, scenarios=S, max_parallel=max_parallel)
    jobs = [(problem, w, worker_seeds[w - 1], S) for w in range(1, L + 1)]
    results = await gather_jobs(_search_job, jobs, max_parallel)

    candidates: List[Candidate] = []
    for (_, w, seed, _), result in zip(jobs, results):
        if isinstance(result, Exception):
            if not isinstance(result, SucError):
                raise result
            logger.warning("worker_dropped", worker=w, seed=seed, error=str(result))
            continue
        decision, costs = result
        candidates.append(Candidate(schedule=decision, worker=w, seed=seed, search_costs=costs))
        logger.debug("candidate_found", worker=w, seed=seed, search_mean=float(np.mean(costs)))

    if len(candidates) < 2:
        raise DegenerateState(f"only {len(candidates)} worker(s) produced a candidate")
    return candidates
