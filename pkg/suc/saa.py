"""Risoluzione della SUC approssimata SAA."""

import time
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from core.states import SolveMethod
from forecast.models import ForecastModel
from forecast.scenarios import ScenarioSet, sample_scenarios
from grid.system import PowerSystem
from solver.lp_format import write_lp_file
from solver.lshaped import solve_two_stage_lshaped
from solver.milp import solve_milp
from suc.model import Prices, UcLayout, UcRecourse, build_extensive_form, build_master
from suc.schedule import CommitmentSchedule
from utils.logging_config import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class SolverOptions:
    """Tolleranze e opzioni comuni ai solver"""
    milp_gap: float = 1e-6
    lshaped_tol: float = 1e-6
    lshaped_max_iter: int = 200
    node_limit: int = 100000
    multicut: bool = False
    debug_cuts: bool = False
    lp_dump_dir: Optional[str] = None

    @classmethod
    def from_settings(cls, settings) -> "SolverOptions":
        return cls(
            milp_gap=settings.milp_gap,
            lshaped_tol=settings.lshaped_tol,
            lshaped_max_iter=settings.lshaped_max_iter,
            node_limit=settings.milp_node_limit,
            multicut=settings.multicut,
            debug_cuts=settings.debug_cuts,
            lp_dump_dir=settings.lp_dump_dir,
        )


class SaaResult(NamedTuple):
    schedule: CommitmentSchedule
    objective: float
    scenarios: ScenarioSet


def solve_scenario_set(
    system: PowerSystem,
    loads,
    scenarios: ScenarioSet,
    prices: Prices,
    method: Union[SolveMethod, str] = SolveMethod.LSHAPED,
    options: Optional[SolverOptions] = None
) -> SaaResult:
    """SAA su un insieme di scenari gia' campionato"""
    options = options or SolverOptions()
    method = SolveMethod(method)
    horizon = scenarios.horizon
    layout = UcLayout(system, horizon)
    started = time.perf_counter()

    if method == SolveMethod.EXTENSIVE:
        instance = build_extensive_form(system, loads, scenarios, prices)
        if options.lp_dump_dir is not None:
            write_lp_file(instance.lp, f"{options.lp_dump_dir}/extensive.lp", instance.binaries)
        solution = solve_milp(instance, gap_tol=options.milp_gap, node_limit=options.node_limit)
        x, objective = solution.x, solution.objective
    else:
        result = solve_two_stage_lshaped(
            build_master(system, horizon),
            UcRecourse(system, loads, prices, horizon),
            list(scenarios),
            tol=options.lshaped_tol,
            max_iter=options.lshaped_max_iter,
            multicut=options.multicut,
            node_limit=options.node_limit,
            debug_cuts=options.debug_cuts,
            dump_dir=options.lp_dump_dir,
        )
        x, objective = result.x, result.objective

    schedule = layout.schedule(x).validate(system)
    logger.debug(
        "saa_solved",
        method=method.value,
        scenarios=len(scenarios),
        objective=objective,
        commitments=int(schedule.u.sum()),
        elapsed=round(time.perf_counter() - started, 3)
    )
    return SaaResult(schedule=schedule, objective=float(objective), scenarios=scenarios)


def solve_saa_suc(
    system: PowerSystem,
    loads,
    forecast: ForecastModel,
    S: int,
    seed: int,
    prices: Prices,
    method: Union[SolveMethod, str] = SolveMethod.LSHAPED,
    options: Optional[SolverOptions] = None
) -> SaaResult:
    """
    Campiona S scenari dal modello e risolve la SUC SAA.

    Args:
        system: Sistema elettrico
        loads: Carico di sistema [ore] o per bus
        forecast: Modello da cui campionare
        S: Numero di scenari
        seed: Seed del campionamento
        prices: Prezzi di penalita'
        method: extensive | lshaped
        options: Tolleranze dei solver

    Returns:
        SaaResult: (schedule, obiettivo G_bar(u), scenari usati)
    """
    scenarios = sample_scenarios(forecast, S, forecast.horizon, seed)
    return solve_scenario_set(system, loads, scenarios, prices, method, options)


def point_forecast_schedule(
    system: PowerSystem,
    loads,
    point_forecast: np.ndarray,
    prices: Prices,
    options: Optional[SolverOptions] = None
) -> SaaResult:
    """UC deterministica sulla previsione puntuale (un solo scenario)"""
    scenarios = ScenarioSet.single(point_forecast)
    return solve_scenario_set(system, loads, scenarios, prices, SolveMethod.EXTENSIVE, options)
