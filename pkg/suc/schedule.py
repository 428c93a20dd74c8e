"""Schedule di commitment u[i, t] e costo di primo stadio."""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Tuple

import numpy as np
import pandas as pd

from core.errors import DimensionMismatch, ScheduleViolation
from grid.system import PowerSystem


def transitions(system: PowerSystem, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(startup, shutdown) binari [unita' x ore] rispetto allo stato precedente"""
    init = np.array([1 if unit.initially_on else 0 for unit in system.units])
    prev = np.hstack([init[:, None], u[:, :-1]])
    return (u > prev).astype(int), (u < prev).astype(int)


@dataclass(frozen=True, eq=False)
class CommitmentSchedule:
    """Matrice binaria on/off [unita' x ore]"""
    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u)
        if u.ndim != 2:
            raise DimensionMismatch(f"schedule must be [units x hours], got shape {u.shape}")
        if not np.all(np.isin(u, (0, 1))):
            raise ValueError("schedule entries must be 0 or 1")
        u = u.astype(np.int8)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def n_units(self) -> int:
        return self.u.shape[0]

    @property
    def horizon(self) -> int:
        return self.u.shape[1]

    def key(self) -> bytes:
        """Chiave di deduplicazione (schedule identiche hanno chiave uguale)"""
        return self.u.tobytes() + bytes(str(self.u.shape), "ascii")

    def __eq__(self, other) -> bool:
        return isinstance(other, CommitmentSchedule) and np.array_equal(self.u, other.u)

    def __hash__(self) -> int:
        return hash(self.key())

    def violations(self, system: PowerSystem) -> Iterator[Tuple[int, int, str]]:
        """
        Violazioni di min-up/min-down, chiusura iniziale inclusa.

        Yields:
            (unit id, ora 1-based, descrizione)
        """
        if self.n_units != system.n_units:
            raise DimensionMismatch(
                f"schedule has {self.n_units} units, system has {system.n_units}"
            )
        T = self.horizon
        for i, unit in enumerate(system.units):
            row = self.u[i]
            init = 1 if unit.initially_on else 0
            forced = min(unit.forced_initial_hours(), T)
            for t in range(forced):
                if row[t] != init:
                    yield unit.id, t + 1, "initial state must be held"
                    break

            prev = init
            for t in range(T):
                if row[t] > prev:
                    end = min(T, t + unit.min_on)
                    if not np.all(row[t:end] == 1):
                        yield unit.id, t + 1, f"min_on={unit.min_on} violated after startup"
                elif row[t] < prev:
                    end = min(T, t + unit.min_off)
                    if not np.all(row[t:end] == 0):
                        yield unit.id, t + 1, f"min_off={unit.min_off} violated after shutdown"
                prev = row[t]

    def validate(self, system: PowerSystem) -> "CommitmentSchedule":
        """Solleva ScheduleViolation alla prima violazione"""
        for unit_id, hour, message in self.violations(system):
            raise ScheduleViolation(message, unit=unit_id, hour=hour)
        return self

    def is_valid(self, system: PowerSystem) -> bool:
        return next(iter(self.violations(system)), None) is None

    def to_frame(self, system: PowerSystem) -> pd.DataFrame:
        records = [
            {"unit": unit.id, "hour": t + 1, "u": int(self.u[i, t])}
            for i, unit in enumerate(system.units)
            for t in range(self.horizon)
        ]
        return pd.DataFrame.from_records(records, columns=["unit", "hour", "u"])

    def to_csv(self, system: PowerSystem, path: str) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(system).to_csv(target, index=False)
        return target

    @classmethod
    def from_csv(cls, system: PowerSystem, path: str) -> "CommitmentSchedule":
        """Legge il formato lungo unit,hour,u"""
        df = pd.read_csv(path)
        missing = {"unit", "hour", "u"} - set(df.columns)
        if missing:
            raise DimensionMismatch(f"schedule file lacks columns {sorted(missing)}")
        wide = df.pivot(index="unit", columns="hour", values="u").sort_index(axis=1)
        ids = [unit.id for unit in system.units]
        if sorted(wide.index.tolist()) != sorted(ids):
            raise DimensionMismatch("schedule units do not match the system")
        return cls(wide.loc[ids].to_numpy(dtype=int))

    @classmethod
    def all_off(cls, system: PowerSystem, horizon: int) -> "CommitmentSchedule":
        return cls(np.zeros((system.n_units, horizon), dtype=int))


def first_stage_cost(system: PowerSystem, u: np.ndarray) -> Tuple[float, float, float]:
    """
    Costo di primo stadio di una schedule.

    Returns:
        tuple: (costo di minimo tecnico, startup, shutdown) in $
    """
    u = np.asarray(u, dtype=int)
    price = np.array([unit.fuel_price for unit in system.units])
    f_min = np.array([fl.f_min for fl in system.fuel])
    startups, shutdowns = transitions(system, u)
    min_load = float(np.sum((price * f_min)[:, None] * u))
    su = float(np.sum(np.array([unit.startup_cost for unit in system.units])[:, None] * startups))
    sd = float(np.sum(np.array([unit.shutdown_cost for unit in system.units])[:, None] * shutdowns))
    return min_load, su, sd
