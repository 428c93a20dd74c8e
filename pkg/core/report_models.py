from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from core.states import Policy


class CandidateRecord(BaseModel):
    """Candidato OPSEL con stime di ricerca e finali"""
    worker: int
    seed: int
    search_mean: float
    search_variance: float
    final_count: int
    final_mean: float
    final_variance: float
    duplicates: List[int] = []


class OpselIteration(BaseModel):
    """Stato dopo l'iterazione k di selezione"""
    k: int
    N: List[int]
    mean: List[float]
    var: List[float]
    best: int
    increments: List[int]
    real_targets: List[float]


class OpselTiming(BaseModel):
    search_seconds: float
    selection_seconds: float

    @property
    def overhead_ratio(self) -> float:
        return self.selection_seconds / self.search_seconds if self.search_seconds > 0 else 0.0


class OpselReport(BaseModel):
    """Risultato della procedura di ottimizzazione e selezione"""
    workers: int
    scenarios: int
    budget: int
    delta_t: int
    seed: int
    best_worker: int
    candidates: List[CandidateRecord]
    iterations: List[OpselIteration] = []
    budget_used: int = 0
    timing: Optional[OpselTiming] = None


class CostRecord(BaseModel):
    """Costo di un giorno (o blocco) per una policy"""
    day: int
    block: Optional[int] = None
    total: float
    penalty: float = 0.0
    commitment: float = 0.0
    dispatch: float = 0.0
    curtailment: float = 0.0


class PolicyTotals(BaseModel):
    policy: Policy
    total_cost: float
    penalty_cost: float
    penalty_ratio: float
    r_delta_g: Optional[float] = None
    entries: List[CostRecord] = []


class StudyReport(BaseModel):
    """Report di uno studio (JSON deterministico: nessun tempo di calcolo)"""
    study: str
    seed: int
    policies: List[PolicyTotals]
    baseline: Optional[Policy] = None
    config: Dict[str, Any] = {}
    forecasts: List[Dict[str, Any]] = []
    opsel: List[OpselReport] = []
    extra: Dict[str, Any] = Field(default_factory=dict)

    def totals(self, policy: Policy) -> PolicyTotals:
        for entry in self.policies:
            if entry.policy == policy:
                return entry
        raise KeyError(policy)
