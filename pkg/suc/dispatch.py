"""Valutazione di una schedule: dispatch di secondo stadio e costi."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from grid.system import PowerSystem
from solver.lshaped import solve_recourse
from suc.model import Prices, UcRecourse
from suc.schedule import CommitmentSchedule, first_stage_cost


@dataclass(frozen=True, eq=False)
class DispatchSolution:
    """Dispatch ottimo con u fissata (MW per [unita'|bus|farm] x ore)"""
    p: np.ndarray
    ens: np.ndarray
    ovg: np.ndarray
    wc: np.ndarray
    flows: np.ndarray
    cost: float
    fuel_cost: float
    ens_cost: float
    ovg_cost: float
    wc_cost: float


@dataclass(frozen=True)
class CostBreakdown:
    commitment: float
    dispatch: float
    penalty_ens: float
    penalty_overgen: float
    curtailment: float
    total: float

    @property
    def penalty(self) -> float:
        return self.penalty_ens + self.penalty_overgen

    @property
    def penalty_ratio(self) -> float:
        return self.penalty / self.total if self.total else 0.0

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(
            commitment=self.commitment + other.commitment,
            dispatch=self.dispatch + other.dispatch,
            penalty_ens=self.penalty_ens + other.penalty_ens,
            penalty_overgen=self.penalty_overgen + other.penalty_overgen,
            curtailment=self.curtailment + other.curtailment,
            total=self.total + other.total,
        )

    def scaled(self, factor: float) -> "CostBreakdown":
        return CostBreakdown(
            commitment=self.commitment * factor,
            dispatch=self.dispatch * factor,
            penalty_ens=self.penalty_ens * factor,
            penalty_overgen=self.penalty_overgen * factor,
            curtailment=self.curtailment * factor,
            total=self.total * factor,
        )

    @classmethod
    def zero(cls) -> "CostBreakdown":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


class DispatchEvaluator:
    """
    Valutatore riusabile per un (sistema, carico, prezzi, orizzonte).

    La matrice del ricorso viene costruita una volta sola; ogni chiamata
    cambia solo rhs e bound.
    """

    def __init__(self, system: PowerSystem, loads, prices: Prices, horizon: Optional[int] = None):
        loads_arr = np.asarray(loads, dtype=float)
        T = loads_arr.shape[-1] if horizon is None else horizon
        self.system = system
        self.prices = prices
        self.recourse = UcRecourse(system, loads, prices, T)
        self.layout = self.recourse.layout

    def dispatch(self, schedule: CommitmentSchedule, wind: np.ndarray) -> DispatchSolution:
        rec = self.recourse.for_schedule(schedule, wind)
        sol = solve_recourse(rec, 0)
        p, ens, ovg, wc = self.layout.split_dispatch(sol.x)

        marginal = np.array([
            u.fuel_price * f.f_avg for u, f in zip(self.system.units, self.system.fuel)
        ])
        fuel_cost = float(np.sum(marginal[:, None] * p))
        ens_cost = float(self.prices.c_ens * ens.sum())
        ovg_cost = float(self.prices.c_ens * ovg.sum())
        wc_cost = float(self.prices.c_wc * wc.sum())

        wind = np.atleast_2d(np.asarray(wind, dtype=float))
        loads = self.recourse.stage.loads
        injection = np.zeros((self.system.n_buses, self.layout.T))
        for i, unit in enumerate(self.system.units):
            injection[unit.bus - 1] += p[i]
        for w, farm in enumerate(self.system.farms):
            injection[farm.bus - 1] += wind[w] - wc[w]
        injection += ens - ovg - loads
        flows = self.system.ptdf @ injection

        return DispatchSolution(
            p=p, ens=ens, ovg=ovg, wc=wc, flows=flows,
            cost=fuel_cost + ens_cost + ovg_cost + wc_cost,
            fuel_cost=fuel_cost, ens_cost=ens_cost, ovg_cost=ovg_cost, wc_cost=wc_cost,
        )

    def scenario_costs(self, schedule: CommitmentSchedule, scenarios) -> np.ndarray:
        """Costo totale (primo + secondo stadio) per ogni scenario, nell'ordine dato"""
        first = sum(first_stage_cost(self.system, schedule.u))
        return np.array([first + self.dispatch(schedule, w).cost for w in scenarios])

    def breakdown(self, schedule: CommitmentSchedule, wind: np.ndarray) -> CostBreakdown:
        min_load, su, sd = first_stage_cost(self.system, schedule.u)
        sol = self.dispatch(schedule, wind)
        commitment = min_load + su + sd
        return CostBreakdown(
            commitment=commitment,
            dispatch=sol.fuel_cost,
            penalty_ens=sol.ens_cost,
            penalty_overgen=sol.ovg_cost,
            curtailment=sol.wc_cost,
            total=commitment + sol.cost,
        )

    def expected_breakdown(self, schedule: CommitmentSchedule, scenarios) -> CostBreakdown:
        """Media delle scomposizioni sugli scenari (stima di G(u) per voce)"""
        parts = [self.breakdown(schedule, w) for w in scenarios]
        if not parts:
            raise ValueError("at least one scenario is required")
        total = sum(parts, CostBreakdown.zero())
        return total.scaled(1.0 / len(parts))


def _schedule(u) -> CommitmentSchedule:
    return u if isinstance(u, CommitmentSchedule) else CommitmentSchedule(np.asarray(u))


def evaluate_dispatch(system: PowerSystem, u, wind_trajectory, loads, prices: Prices) -> DispatchSolution:
    """
    Dispatch di secondo stadio con u fissata.

    Sempre ammissibile: ens, ovg e wc garantiscono il ricorso completo.
    """
    schedule = _schedule(u)
    return DispatchEvaluator(system, loads, prices, schedule.horizon).dispatch(schedule, wind_trajectory)


def estimate_expected_cost(system: PowerSystem, u, scenarios, loads, prices: Prices) -> Tuple[float, float]:
    """
    Stima di G(u): media e varianza campionaria dei costi totali per scenario.

    Returns:
        tuple: (media, varianza con ddof=1; 0 con un solo scenario)
    """
    schedule = _schedule(u)
    costs = DispatchEvaluator(system, loads, prices, schedule.horizon).scenario_costs(schedule, scenarios)
    variance = float(np.var(costs, ddof=1)) if len(costs) > 1 else 0.0
    return float(np.mean(costs)), variance


def realized_cost(system: PowerSystem, u, realized_wind, loads, prices: Prices) -> CostBreakdown:
    """Costo effettivo della schedule sulla traiettoria realizzata"""
    schedule = _schedule(u)
    return DispatchEvaluator(system, loads, prices, schedule.horizon).breakdown(schedule, realized_wind)
