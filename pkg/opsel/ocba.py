"""
Optimal Computing Budget Allocation.

Per i candidati non migliori N_l / N_l' = (delta_l' / delta_l)^2 con
delta_l = (G_l - G_b) / sigma_l; per il migliore
N_b = sigma_b sqrt(sum_{l != b} N_l^2 / sigma_l^2); la somma e' il budget
cumulato. Con classic=True si usa il rapporto classico (sigma_l / Delta_l)^2
con Delta non standardizzato.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from core.errors import DegenerateState

TIE_TOL = 1e-12


@dataclass
class OcbaState:
    """
    Statistiche cumulate per candidato.

    counts, means e m2 (somma dei quadrati degli scarti) sono aggiornati con
    il merge di Chan; budget_used conta gli scenari assegnati dopo la ricerca.
    """
    counts: np.ndarray
    means: np.ndarray
    m2: np.ndarray
    iteration: int = 0
    budget_used: int = 0
    initial_total: int = field(default=0)

    @classmethod
    def from_samples(cls, samples: Sequence[Sequence[float]]) -> "OcbaState":
        counts, means, m2 = [], [], []
        for costs in samples:
            arr = np.asarray(costs, dtype=float)
            if arr.size == 0:
                raise DegenerateState("every candidate needs at least one sample")
            counts.append(arr.size)
            means.append(arr.mean())
            m2.append(float(np.sum((arr - arr.mean()) ** 2)))
        state = cls(np.array(counts, dtype=np.int64), np.array(means), np.array(m2))
        state.initial_total = int(state.counts.sum())
        return state

    @property
    def n_candidates(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def variances(self) -> np.ndarray:
        """Varianza campionaria (ddof=1); 0 con un solo campione"""
        with np.errstate(invalid="ignore", divide="ignore"):
            var = np.where(self.counts > 1, self.m2 / np.maximum(self.counts - 1, 1), 0.0)
        return var

    @property
    def best(self) -> int:
        return int(np.argmin(self.means))

    def merge(self, index: int, costs: Sequence[float]) -> None:
        """Aggiunge nuovi campioni al candidato index (merge di Chan)"""
        arr = np.asarray(costs, dtype=float)
        n_b = arr.size
        if n_b == 0:
            return
        mean_b = float(arr.mean())
        m2_b = float(np.sum((arr - mean_b) ** 2))
        n_a, mean_a, m2_a = int(self.counts[index]), float(self.means[index]), float(self.m2[index])
        n = n_a + n_b
        delta = mean_b - mean_a
        self.means[index] = mean_a + delta * n_b / n
        self.m2[index] = m2_a + m2_b + delta * delta * n_a * n_b / n
        self.counts[index] = n

    def absorb(self, index: int, other: int) -> None:
        """Fonde le statistiche del candidato other in index (duplicati)"""
        n_a, n_b = int(self.counts[index]), int(self.counts[other])
        n = n_a + n_b
        delta = self.means[other] - self.means[index]
        self.means[index] += delta * n_b / n
        self.m2[index] += self.m2[other] + delta * delta * n_a * n_b / n
        self.counts[index] = n

    def subset(self, keep: Sequence[int]) -> "OcbaState":
        keep = list(keep)
        return OcbaState(
            counts=self.counts[keep].copy(),
            means=self.means[keep].copy(),
            m2=self.m2[keep].copy(),
            iteration=self.iteration,
            budget_used=self.budget_used,
            initial_total=self.initial_total,
        )


@dataclass(frozen=True, eq=False)
class OcbaAllocation:
    """Soluzione reale, target interi e incrementi di una iterazione"""
    real_targets: np.ndarray
    targets: np.ndarray
    increments: np.ndarray
    best: int
    co_best: List[int]


def _sigma(state: OcbaState) -> np.ndarray:
    sigma = np.sqrt(state.variances)
    return np.maximum(sigma, 1e-9 * (1.0 + np.abs(state.means)))


def ocba_real_targets(state: OcbaState, total: float, classic: bool = False):
    """
    Allocazione reale con somma total.

    Returns:
        tuple: (targets reali, indice migliore, insieme co-best)
    """
    L = state.n_candidates
    if L < 2:
        raise DegenerateState("OCBA needs at least two distinct candidates")
    means = state.means
    sigma = _sigma(state)
    b = int(np.argmin(means))
    gap = means - means[b]
    tied = gap <= TIE_TOL * (1.0 + abs(means[b]))
    co_best = [int(k) for k in np.flatnonzero(tied)]

    if tied.all():
        return np.full(L, total / L), b, co_best

    others = ~tied
    if classic:
        ratio = (sigma[others] / gap[others]) ** 2
    else:
        delta = gap[others] / sigma[others]
        ratio = 1.0 / delta ** 2
    best_ratio = sigma[b] * np.sqrt(np.sum(ratio ** 2 / sigma[others] ** 2))
    alpha = total / (ratio.sum() + best_ratio)

    real = np.empty(L)
    real[others] = alpha * ratio
    real[tied] = alpha * best_ratio / tied.sum()
    return real, b, co_best


def largest_remainder(values: np.ndarray, total: int) -> np.ndarray:
    """Arrotonda valori reali non negativi a interi con somma esatta total"""
    floors = np.floor(values).astype(np.int64)
    remaining = int(total - floors.sum())
    if remaining > 0:
        order = np.argsort(-(values - floors), kind="stable")
        floors[order[:remaining]] += 1
    elif remaining < 0:
        order = np.argsort(values - floors, kind="stable")
        for k in order:
            if remaining == 0:
                break
            if floors[k] > 0:
                floors[k] -= 1
                remaining += 1
    return floors


def ocba_allocate(state: OcbaState, delta_t: int, classic: bool = False) -> OcbaAllocation:
    """
    Target N_{k,l} per la prossima iterazione.

    I target non scendono mai sotto i conteggi correnti: gli incrementi
    max(0, N_real - N_prev) sono riscalati a delta_t e arrotondati con il
    metodo dei resti maggiori, cosi' la somma dei target e' esattamente
    quella del budget.

    Args:
        state: Statistiche correnti
        delta_t: Nuovi scenari da distribuire
        classic: Usa il rapporto OCBA classico

    Returns:
        OcbaAllocation: Allocazione della iterazione
    """
    if delta_t < 0:
        raise ValueError("delta_t must be >= 0")
    prev = state.counts.astype(float)
    total = state.total + delta_t
    real, b, co_best = ocba_real_targets(state, float(total), classic)

    raw = np.maximum(real - prev, 0.0)
    if delta_t == 0 or raw.sum() <= 0:
        increments = np.zeros(state.n_candidates, dtype=np.int64)
    else:
        increments = largest_remainder(raw * (delta_t / raw.sum()), delta_t)
    targets = state.counts + increments
    return OcbaAllocation(real_targets=real, targets=targets, increments=increments, best=b,
                          co_best=co_best)


def equal_allocate(state: OcbaState, delta_t: int) -> OcbaAllocation:
    """Allocazione uniforme, termine di confronto per OCBA"""
    L = state.n_candidates
    increments = largest_remainder(np.full(L, delta_t / L), delta_t)
    real = state.counts + np.full(L, delta_t / L)
    return OcbaAllocation(real_targets=real, targets=state.counts + increments,
                          increments=increments, best=state.best, co_best=[state.best])
