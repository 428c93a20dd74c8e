"""
Studi sperimentali: day-ahead (costo atteso), intra-day rolling (costo
realizzato), OPSEL e calibrazione della numerosita' di valutazione S_e.

Giorni e blocchi sono elaborati in sequenza; ogni policy porta con se' gli
stati iniziali delle unita' da un blocco al successivo.
"""

import asyncio
import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import ConfigError
from core.report_models import CostRecord, OpselReport, PolicyTotals, StudyReport
from core.states import Policy
from forecast.models import (
    ForecastModel, NormalPlugIn, fit_intraday_posterior_predictive, fit_persistence_point,
    fit_plug_in, fit_posterior_predictive, persistence_empirical_model
)
from forecast.scenarios import make_rng, sample_scenarios, worker_seed
from grid.system import PowerSystem, load_system
from harness.data_io import day_slice, read_load_series, read_wind_series
from harness.synthetic import generate_synthetic_streams
from opsel.selection import SucOpselProblem, run_opsel
from suc.dispatch import CostBreakdown, DispatchEvaluator
from suc.model import Prices
from suc.saa import SolverOptions, point_forecast_schedule, solve_saa_suc
from suc.schedule import CommitmentSchedule
from utils.logging_config import get_logger

logger = get_logger(__name__)

# Etichette dei flussi casuali derivati dal seed dello studio
HISTORY_STREAM = 1
SEARCH_STREAM = 2
EVALUATION_STREAM = 3
CALIBRATION_STREAM = 4


@dataclass
class StudyResult:
    """Report deterministico piu' artefatti accessori"""
    report: StudyReport
    timing: Dict[str, Any] = field(default_factory=dict)
    scatter: Optional[pd.DataFrame] = None


@dataclass
class StudyInputs:
    system: PowerSystem
    loads: np.ndarray
    wind: np.ndarray


def stream_seed(seed: int, stream: int, day: int, block: int = 0) -> int:
    """Seed a 64 bit indipendente per (studio, flusso, giorno, blocco)"""
    state = np.random.SeedSequence([seed, stream, day, block]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])


def load_inputs(config) -> StudyInputs:
    """Sistema e serie storiche referenziati dalla configurazione"""
    config.validate_files()
    system = load_system(config.bus_file, config.unit_file, config.line_file,
                         config.slack_bus, config.farm_file)
    loads = read_load_series(config.load_file)
    wind = read_wind_series(config.wind_file)
    if wind.shape[0] != system.n_farms:
        raise ConfigError(f"wind file has {wind.shape[0]} farms, system has {system.n_farms}")
    needed = (config.warmup_days + config.n_days) * 24
    if loads.shape[-1] < needed or wind.shape[-1] < needed:
        raise ConfigError(f"series shorter than warmup_days + n_days ({needed} hours)")
    return StudyInputs(system=system, loads=loads, wind=wind)


def relative_saving(totals: Dict[Policy, float], policy: Policy, baseline: Policy, reverse: bool = False) -> float:
    """
    Risparmio relativo.

    reverse=False: (G^policy - G^baseline) / G^baseline (day-ahead, baseline data-driven)
    reverse=True: (G^baseline - G^policy) / G^baseline (intra-day e OPSEL)
    """
    base = totals[baseline]
    if base == 0:
        return 0.0
    diff = totals[baseline] - totals[policy] if reverse else totals[policy] - totals[baseline]
    return diff / base


def _record(day: int, cost: CostBreakdown, block: Optional[int] = None) -> CostRecord:
    return CostRecord(
        day=day,
        block=block,
        total=cost.total,
        penalty=cost.penalty,
        commitment=cost.commitment,
        dispatch=cost.dispatch,
        curtailment=cost.curtailment,
    )


def _policy_totals(entries: Dict[Policy, List[CostRecord]], baseline: Policy, reverse: bool) -> List[PolicyTotals]:
    totals = {p: float(sum(r.total for r in rec)) for p, rec in entries.items()}
    result = []
    for policy, records in entries.items():
        total = totals[policy]
        penalty = float(sum(r.penalty for r in records))
        saving = None
        if policy != baseline and baseline in totals:
            saving = relative_saving(totals, policy, baseline, reverse)
        result.append(PolicyTotals(
            policy=policy,
            total_cost=total,
            penalty_cost=penalty,
            penalty_ratio=penalty / total if total else 0.0,
            r_delta_g=saving,
            entries=records,
        ))
    return result


def _policies(config, allowed: Tuple[Policy, ...]) -> List[Policy]:
    try:
        chosen = [Policy(p) for p in config.policy_list]
    except ValueError as e:
        raise ConfigError(str(e)) from e
    chosen = [p for p in chosen if p in allowed]
    if not chosen:
        raise ConfigError(f"no usable policy among {config.policy_list}")
    return chosen


def _solve_policy(system, loads, model: ForecastModel, policy: Policy, S: int, seed: int,
                  prices: Prices, config, options: SolverOptions) -> CommitmentSchedule:
    if policy == Policy.DETERMINISTIC:
        return point_forecast_schedule(system, loads, model.point_forecast(), prices, options).schedule
    return solve_saa_suc(system, loads, model, S, seed, prices, config.method, options).schedule


# ---------------------------------------------------------------- day-ahead

def day_ahead_models(mu: np.ndarray, phi: np.ndarray, m: int, rng: np.random.Generator,
                     capacity: Optional[np.ndarray] = None) -> Dict[str, ForecastModel]:
    """
    Modello vero e stime per un giorno.

    Le m osservazioni storiche sono estratte dal modello vero N(mu, phi^2);
    da esse si stimano plug-in (SUC empirica) e predittiva (SUC data-driven).
    """
    truth = NormalPlugIn(mean=mu, phi=phi, capacity=capacity)
    history = truth.sample(rng, m)
    return {
        "truth": truth,
        Policy.EMPIRICAL.value: fit_plug_in(history, m, phi, capacity),
        Policy.DATA_DRIVEN.value: fit_posterior_predictive(history, m, phi, capacity),
        Policy.DETERMINISTIC.value: fit_plug_in(history, m, np.zeros_like(mu), capacity),
    }


def run_day_ahead_study(config) -> StudyResult:
    """
    Confronto a costo atteso tra SUC data-driven ed empirica.

    Per ogni giorno d il modello vero ha media pari alla serie eolica del
    giorno e deviazione phi_fraction * media; le schedule di ogni policy sono
    valutate sugli stessi S_e scenari del modello vero.
    """
    inputs = load_inputs(config)
    system, prices = inputs.system, Prices(c_ens=config.c_ens, c_wc=config.c_wc)
    options = SolverOptions.from_settings(config)
    policies = _policies(config, (Policy.DETERMINISTIC, Policy.EMPIRICAL, Policy.DATA_DRIVEN))
    capacity = system.farm_capacity
    T = config.horizon
    entries: Dict[Policy, List[CostRecord]] = {p: [] for p in policies}
    forecasts: List[Dict[str, Any]] = []

    for d in range(config.n_days):
        day = config.warmup_days + d
        loads = day_slice(inputs.loads, day, T)
        mu = day_slice(inputs.wind, day, T)
        phi = config.phi_fraction * mu
        models = day_ahead_models(mu, phi, config.m, make_rng(stream_seed(config.seed, HISTORY_STREAM, d)), capacity)

        search_seed = stream_seed(config.seed, SEARCH_STREAM, d)
        truth = sample_scenarios(models["truth"], config.eval_scenarios, T,
                                 stream_seed(config.seed, EVALUATION_STREAM, d))
        evaluator = DispatchEvaluator(system, loads, prices, T)
        for policy in policies:
            model = models[policy.value]
            schedule = _solve_policy(system, loads, model, policy, config.scenarios, search_seed,
                                     prices, config, options)
            cost = evaluator.expected_breakdown(schedule, truth)
            entries[policy].append(_record(d + 1, cost))
            forecasts.append({"day": d + 1, "policy": policy.value, **model.descriptor(search_seed)})
        logger.info("day_ahead_day_done", day=d + 1,
                    costs={p.value: round(entries[p][-1].total, 2) for p in policies})

    report = StudyReport(
        study="day_ahead",
        seed=config.seed,
        policies=_policy_totals(entries, Policy.DATA_DRIVEN, reverse=False),
        baseline=Policy.DATA_DRIVEN,
        config=config.echo(),
        forecasts=forecasts,
    )
    return StudyResult(report=report)


# ---------------------------------------------------------------- intra-day

def decision_hours(config) -> List[Tuple[int, int, int]]:
    """(giorno, blocco, h_t) con h_t indice dell'ultima ora osservata"""
    blocks = 24 // config.n_h
    return [
        (d, b, (config.warmup_days + d) * 24 + b * config.n_h - 1)
        for d in range(config.n_days) for b in range(blocks)
    ]


def intraday_models(history: np.ndarray, n_h: int, window: int,
                    capacity: Optional[np.ndarray] = None) -> Dict[str, ForecastModel]:
    """
    Modelli intra-day sulla storia oraria [ore x farm].

    deterministic: persistenza puntuale; empirical: persistenza
    probabilistica; data_driven: predittiva sul supporto di persistenza.
    """
    return {
        Policy.DETERMINISTIC.value: fit_persistence_point(history, n_h, capacity),
        Policy.EMPIRICAL.value: persistence_empirical_model(history, n_h, window=window, capacity=capacity),
        Policy.DATA_DRIVEN.value: fit_intraday_posterior_predictive(history, n_h, window=window,
                                                                    capacity=capacity),
    }


def _block_data(inputs: StudyInputs, h_t: int, n_h: int):
    history = inputs.wind[:, :h_t + 1].T
    window = slice(h_t + 1, h_t + 1 + n_h)
    return history, inputs.loads[..., window], inputs.wind[:, window]


def run_intraday_study(config) -> StudyResult:
    """
    Simulazione rolling intra-day a costo realizzato.

    Ogni n_h ore ogni policy decide le n_h ore successive con la storia fino
    a h_t e viene valutata sulla produzione eolica realizzata.
    """
    inputs = load_inputs(config)
    prices = Prices(c_ens=config.c_ens, c_wc=config.c_wc)
    options = SolverOptions.from_settings(config)
    policies = _policies(config, (Policy.DETERMINISTIC, Policy.EMPIRICAL, Policy.DATA_DRIVEN))
    capacity = inputs.system.farm_capacity
    systems = {p: inputs.system for p in policies}
    entries: Dict[Policy, List[CostRecord]] = {p: [] for p in policies}

    for d, b, h_t in decision_hours(config):
        history, loads, realized = _block_data(inputs, h_t, config.n_h)
        models = intraday_models(history, config.n_h, config.intraday_window, capacity)
        search_seed = stream_seed(config.seed, SEARCH_STREAM, d, b)
        for policy in policies:
            system = systems[policy]
            schedule = _solve_policy(system, loads, models[policy.value], policy, config.scenarios,
                                     search_seed, prices, config, options)
            cost = DispatchEvaluator(system, loads, prices, config.n_h).breakdown(schedule, realized)
            entries[policy].append(_record(d + 1, cost, b + 1))
            systems[policy] = system.with_initial_states(schedule.u)
        logger.debug("intraday_block_done", day=d + 1, block=b + 1)
    logger.info("intraday_study_done", blocks=len(decision_hours(config)))

    baseline = Policy.DETERMINISTIC if Policy.DETERMINISTIC in policies else policies[0]
    report = StudyReport(
        study="intraday",
        seed=config.seed,
        policies=_policy_totals(entries, baseline, reverse=True),
        baseline=baseline,
        config=config.echo(),
    )
    return StudyResult(report=report)


# ---------------------------------------------------------------- OPSEL

def run_opsel_study(config) -> StudyResult:
    """
    SUC data-driven intra-day con e senza OPSEL.

    La policy data_driven risolve una sola SAA con il seed del worker 1;
    la policy opsel lancia L ricerche e la selezione OCBA con budget T. Con
    T=0 non c'e' selezione e la policy opsel coincide con la singola SAA.
    """
    inputs = load_inputs(config)
    if config.workers < 2:
        raise ConfigError("the OPSEL study needs workers >= 2")
    prices = Prices(c_ens=config.c_ens, c_wc=config.c_wc)
    options = SolverOptions.from_settings(config)
    capacity = inputs.system.farm_capacity
    policies = (Policy.DATA_DRIVEN, Policy.OPSEL)
    systems = {p: inputs.system for p in policies}
    entries: Dict[Policy, List[CostRecord]] = {p: [] for p in policies}
    opsel_reports: List[OpselReport] = []
    timing_blocks: List[Dict[str, Any]] = []
    scatter_rows: List[Dict[str, Any]] = []

    for d, b, h_t in decision_hours(config):
        history, loads, realized = _block_data(inputs, h_t, config.n_h)
        model = fit_intraday_posterior_predictive(history, config.n_h, window=config.intraday_window,
                                                  capacity=capacity)
        block_seed = stream_seed(config.seed, SEARCH_STREAM, d, b)

        single_system = systems[Policy.DATA_DRIVEN]
        single = solve_saa_suc(single_system, loads, model, config.scenarios, worker_seed(block_seed, 1),
                               prices, config.method, options).schedule
        single_cost = DispatchEvaluator(single_system, loads, prices, config.n_h).breakdown(single, realized)

        opsel_system = systems[Policy.OPSEL]
        evaluator = DispatchEvaluator(opsel_system, loads, prices, config.n_h)
        if config.budget == 0:
            chosen = single
        else:
            problem = SucOpselProblem(opsel_system, loads, model, prices, config.method, options)
            outcome = asyncio.run(run_opsel(
                problem, config.workers, config.scenarios, config.budget, config.delta_t,
                block_seed, config.max_parallel, config.classic_ocba
            ))
            chosen = outcome.best.schedule
            timing = outcome.report.timing
            timing_blocks.append({
                "day": d + 1,
                "block": b + 1,
                "search_seconds": timing.search_seconds,
                "selection_seconds": timing.selection_seconds,
            })
            opsel_reports.append(outcome.report.model_copy(update={"timing": None}))
            if d + 1 == config.scatter_day and b == 0:
                for cand, record in zip(outcome.candidates, outcome.report.candidates):
                    realized_cost = evaluator.breakdown(cand.schedule, realized).total
                    for worker in [cand.worker] + record.duplicates:
                        scatter_rows.append({"worker": worker, "realized_cost": realized_cost})

        opsel_cost = evaluator.breakdown(chosen, realized)
        entries[Policy.DATA_DRIVEN].append(_record(d + 1, single_cost, b + 1))
        entries[Policy.OPSEL].append(_record(d + 1, opsel_cost, b + 1))
        systems[Policy.DATA_DRIVEN] = single_system.with_initial_states(single.u)
        systems[Policy.OPSEL] = opsel_system.with_initial_states(chosen.u)
        logger.info("opsel_block_done", day=d + 1, block=b + 1,
                    single=round(single_cost.total, 2), opsel=round(opsel_cost.total, 2))

    report = StudyReport(
        study="opsel",
        seed=config.seed,
        policies=_policy_totals(entries, Policy.DATA_DRIVEN, reverse=True),
        baseline=Policy.DATA_DRIVEN,
        config=config.echo(),
        opsel=opsel_reports,
    )
    search = float(sum(t["search_seconds"] for t in timing_blocks))
    selection = float(sum(t["selection_seconds"] for t in timing_blocks))
    timing = {
        "search_seconds": search,
        "selection_seconds": selection,
        "overhead_ratio": selection / search if search > 0 else 0.0,
        "blocks": timing_blocks,
    }
    scatter = None
    if scatter_rows:
        scatter = pd.DataFrame(scatter_rows).sort_values("worker", kind="stable").reset_index(drop=True)
    return StudyResult(report=report, timing=timing, scatter=scatter)


# ---------------------------------------------------------------- calibrazione

def run_calibration_study(config) -> StudyResult:
    """
    Errore relativo della stima di G(u) al variare di S_e.

    Per ogni giorno la schedule della SUC empirica (S scenari) viene valutata
    con ciascuna numerosita' di calibration_sizes e con la numerosita' di
    riferimento; si riporta l'errore relativo massimo sui giorni.
    """
    inputs = load_inputs(config)
    system, prices = inputs.system, Prices(c_ens=config.c_ens, c_wc=config.c_wc)
    options = SolverOptions.from_settings(config)
    capacity = system.farm_capacity
    T = config.horizon
    sizes = config.calibration_size_list
    errors: Dict[int, List[float]] = {s: [] for s in sizes}
    entries: List[CostRecord] = []

    for d in range(min(config.calibration_days, config.n_days)):
        day = config.warmup_days + d
        loads = day_slice(inputs.loads, day, T)
        mu = day_slice(inputs.wind, day, T)
        models = day_ahead_models(mu, config.phi_fraction * mu, config.m,
                                  make_rng(stream_seed(config.seed, HISTORY_STREAM, d)), capacity)
        schedule = solve_saa_suc(system, loads, models[Policy.EMPIRICAL.value], config.scenarios,
                                 stream_seed(config.seed, SEARCH_STREAM, d), prices, config.method,
                                 options).schedule
        evaluator = DispatchEvaluator(system, loads, prices, T)
        reference_set = sample_scenarios(models["truth"], config.calibration_reference, T,
                                         stream_seed(config.seed, CALIBRATION_STREAM, d, 0))
        reference = evaluator.expected_breakdown(schedule, reference_set)
        entries.append(_record(d + 1, reference))
        for k, size in enumerate(sizes, start=1):
            scenarios = sample_scenarios(models["truth"], size, T,
                                         stream_seed(config.seed, CALIBRATION_STREAM, d, k))
            estimate = float(np.mean(evaluator.scenario_costs(schedule, scenarios)))
            errors[size].append(abs(estimate - reference.total) / abs(reference.total))
        logger.info("calibration_day_done", day=d + 1, reference=round(reference.total, 2))

    calibration = [
        {"eval_scenarios": size, "max_relative_error": max(errors[size]) if errors[size] else 0.0}
        for size in sizes
    ]
    report = StudyReport(
        study="calibration",
        seed=config.seed,
        policies=_policy_totals({Policy.EMPIRICAL: entries}, Policy.EMPIRICAL, reverse=False),
        config=config.echo(),
        extra={"reference_size": config.calibration_reference, "calibration": calibration},
    )
    return StudyResult(report=report)


# ---------------------------------------------------------------- sweep

SWEEP_COLUMNS = ["seed", "policy", "total_cost", "r_delta_g"]


def run_sweep(study: Callable[[Any], StudyResult], config, grid: Dict[str, Sequence[Any]],
              seeds: Sequence[int], regenerate: bool = False) -> pd.DataFrame:
    """
    Ripete uno studio su una griglia di parametri e su piu' seed.

    Args:
        study: run_day_ahead_study, run_intraday_study o run_opsel_study
        config: Settings di partenza
        grid: Chiave di Settings -> valori da provare (prodotto cartesiano)
        seeds: Seed dello studio
        regenerate: Rigenera le serie sintetiche per ogni seed in output_dir/series_<seed>

    Returns:
        pd.DataFrame: Una riga per (punto, seed, policy) con total_cost e r_delta_g
    """
    if not seeds:
        raise ValueError("at least one seed is required")
    keys = list(grid)
    capacity = None
    if regenerate:
        system = load_system(config.bus_file, config.unit_file, config.line_file,
                             config.slack_bus, config.farm_file)
        capacity = system.farm_capacity

    rows: List[Dict[str, Any]] = []
    for point in itertools.product(*(grid[k] for k in keys)):
        values = dict(zip(keys, point))
        for seed in seeds:
            update: Dict[str, Any] = {**values, "seed": int(seed)}
            if regenerate:
                series = Path(config.output_dir) / f"series_{seed}"
                update.update(load_file=str(series / "loads.csv"), wind_file=str(series / "wind.csv"))
            run_config = config.model_copy(update=update)
            if regenerate:
                generate_synthetic_streams(run_config, n_farms=len(capacity), capacity=capacity)
            report = study(run_config).report
            for totals in report.policies:
                rows.append({
                    **values,
                    "seed": int(seed),
                    "policy": totals.policy.value,
                    "total_cost": totals.total_cost,
                    "r_delta_g": totals.r_delta_g,
                })
        logger.info("sweep_point_done", study=getattr(study, "__name__", str(study)), seeds=len(seeds), **values)
    return pd.DataFrame(rows, columns=keys + SWEEP_COLUMNS)


def sweep_summary(frame: pd.DataFrame, keys: Sequence[str]) -> pd.DataFrame:
    """Medie sui seed di total_cost e r_delta_g per (punto, policy)"""
    by = list(keys) + ["policy"]
    return frame.groupby(by, sort=False)[["total_cost", "r_delta_g"]].mean().reset_index()
