from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Sequence

import numpy as np

from core.errors import DimensionMismatch
from forecast.models import ForecastModel


def make_rng(seed: int) -> np.random.Generator:
    """Generatore counter-based Philox (64 bit) per un seed"""
    return np.random.Generator(np.random.Philox(seed))


def worker_seed(base_seed: int, worker: int) -> int:
    """Sottoflusso del worker: seed XOR indice"""
    return int(base_seed) ^ int(worker)


def evaluation_rng(seed: int, worker: int, iteration: int) -> np.random.Generator:
    """Flusso di valutazione indipendente per (seed, candidato, iterazione)"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, worker, iteration])))


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    """S traiettorie eoliche [S x farm x ore] campionate da un modello"""
    scenarios: np.ndarray
    seed: Optional[int] = None
    source: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.scenarios, dtype=float)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise DimensionMismatch(f"scenarios must be [S x farms x hours], got {arr.shape}")
        if (arr < 0).any():
            raise ValueError("scenario values must be nonnegative")
        arr.setflags(write=False)
        object.__setattr__(self, "scenarios", arr)

    def __len__(self) -> int:
        return self.scenarios.shape[0]

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.scenarios)

    def __getitem__(self, s: int) -> np.ndarray:
        return self.scenarios[s]

    @property
    def n_farms(self) -> int:
        return self.scenarios.shape[1]

    @property
    def horizon(self) -> int:
        return self.scenarios.shape[2]

    @classmethod
    def single(cls, trajectory: Sequence, source: Optional[Dict[str, Any]] = None) -> "ScenarioSet":
        """Insieme con un solo scenario (previsione puntuale)"""
        traj = np.atleast_2d(np.asarray(trajectory, dtype=float))
        return cls(scenarios=traj[None, :, :], seed=None, source=source or {"variant": "point"})


def sample_scenarios(model: ForecastModel, S: int, horizon: int, seed: int) -> ScenarioSet:
    """
    Campiona S traiettorie i.i.d. dal modello.

    Stessi (model, S, horizon, seed) producono array identici bit a bit.

    Args:
        model: Modello di previsione
        S: Numero di scenari (>= 1)
        horizon: Ore dell'orizzonte, deve coincidere con quelle del modello
        seed: Seed a 64 bit

    Returns:
        ScenarioSet: Scenari clampati in [0, capacity]
    """
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    if horizon != model.horizon:
        raise DimensionMismatch(f"model horizon {model.horizon} != requested {horizon}")
    draws = model.sample(make_rng(seed), S)
    return ScenarioSet(scenarios=draws, seed=seed, source=model.descriptor(seed))
