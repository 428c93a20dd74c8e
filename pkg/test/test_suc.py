import numpy as np
import pytest

from core.errors import DimensionMismatch, ScheduleViolation
from core.states import SolveMethod
from forecast.models import NormalPlugIn, fit_plug_in
from forecast.scenarios import ScenarioSet, sample_scenarios
from solver.milp import solve_milp
from suc.dispatch import (
    DispatchEvaluator, estimate_expected_cost, evaluate_dispatch, realized_cost
)
from suc.model import Prices, build_deterministic_uc, build_extensive_form, build_master
from suc.saa import SolverOptions, point_forecast_schedule, solve_saa_suc, solve_scenario_set
from suc.schedule import CommitmentSchedule, first_stage_cost, transitions

TIGHT = SolverOptions(lshaped_tol=1e-8, milp_gap=1e-9)


def _g1_restart_schedule():
    """G1 spento alle ore 1-8, acceso alle 9-10, di nuovo spento dalle 11"""
    u = np.zeros((3, 24), dtype=int)
    u[0, 8:10] = 1
    return CommitmentSchedule(u)


def test_min_on_violation_after_restart(six_bus):
    """Test G1 acceso all'ora 9 deve restare acceso fino alla 12 (min_on=4)"""
    schedule = _g1_restart_schedule()
    violations = list(schedule.violations(six_bus))
    assert violations[0][:2] == (1, 9)
    with pytest.raises(ScheduleViolation) as exc:
        schedule.validate(six_bus)
    assert exc.value.unit == 1
    assert exc.value.hour == 9

    fixed = np.array(schedule.u)
    fixed[0, 8:12] = 1
    assert CommitmentSchedule(fixed).is_valid(six_bus)


def test_initial_state_must_be_held(six_bus):
    """Test chiusura dello stato iniziale dal blocco precedente"""
    system = six_bus.with_initial_states(np.array([[1, 1, 1], [0, 0, 1], [1, 0, 0]]))
    u = np.ones((3, 4), dtype=int)
    u[1, 0] = 0
    u[2] = 0
    first = next(iter(CommitmentSchedule(u).violations(system)))
    assert first == (2, 1, "initial state must be held")


def test_schedule_rejects_bad_entries(six_bus):
    """Test valori non binari e dimensioni errate"""
    with pytest.raises(ValueError):
        CommitmentSchedule(np.full((3, 2), 2))
    with pytest.raises(DimensionMismatch):
        CommitmentSchedule(np.ones(4, dtype=int))
    with pytest.raises(DimensionMismatch):
        CommitmentSchedule(np.ones((2, 4), dtype=int)).validate(six_bus)


def test_schedule_csv_round_trip(six_bus, tmp_path):
    """Test scrittura e lettura del formato unit,hour,u"""
    schedule = _g1_restart_schedule()
    path = schedule.to_csv(six_bus, str(tmp_path / "out" / "schedule.csv"))
    assert path.read_text().splitlines()[0] == "unit,hour,u"
    loaded = CommitmentSchedule.from_csv(six_bus, str(path))
    assert loaded == schedule
    assert hash(loaded) == hash(schedule)


def test_transitions_against_initial_state(six_bus):
    """Test accensioni e spegnimenti rispetto allo stato iniziale"""
    u = np.array([[0, 1, 1], [1, 1, 0], [1, 1, 1]])
    startups, shutdowns = transitions(six_bus, u)
    # G1 e G2 accesi all'inizio, G3 spento
    np.testing.assert_array_equal(startups, [[0, 1, 0], [0, 0, 0], [1, 0, 0]])
    np.testing.assert_array_equal(shutdowns, [[1, 0, 0], [0, 0, 1], [0, 0, 0]])


def test_first_stage_cost_all_on(six_bus):
    """Test costo di minimo tecnico e startup di G3"""
    u = np.ones((3, 4), dtype=int)
    min_load, su, sd = first_stage_cost(six_bus, u)
    expected = 4 * sum(unit.fuel_price * fl.f_min for unit, fl in zip(six_bus.units, six_bus.fuel))
    assert min_load == pytest.approx(expected)
    assert su == pytest.approx(six_bus.units[2].startup_cost)
    assert sd == 0.0


def _assert_feasible_dispatch(system, loads, schedule, wind, sol):
    assert np.isfinite(sol.cost)
    supplied = sol.p.sum(axis=0) + sol.ens.sum(axis=0) - sol.ovg.sum(axis=0) + wind.sum(axis=0) - sol.wc.sum(axis=0)
    np.testing.assert_allclose(supplied, loads, atol=1e-6)
    p_min = np.array([u.p_min for u in system.units])[:, None] * schedule.u
    p_max = np.array([u.p_max for u in system.units])[:, None] * schedule.u
    assert np.all(sol.p >= p_min - 1e-6)
    assert np.all(sol.p <= p_max + 1e-6)
    assert np.all(np.abs(sol.flows) <= system.flow_limits[:, None] + 1e-6)
    assert np.all(sol.wc >= -1e-9)
    assert np.all(sol.wc <= wind + 1e-6)


def _random_pairs(rng, count):
    """Coppie (u, vento) casuali, con tutto spento e tutto acceso in testa"""
    fixed = [np.zeros((3, 4), dtype=int), np.ones((3, 4), dtype=int)]
    for k in range(count):
        u = fixed[k] if k < len(fixed) else rng.integers(0, 2, size=(3, 4))
        yield CommitmentSchedule(u), rng.uniform(0.0, 150.0, size=(1, 4))


def test_recourse_is_complete(six_bus, six_bus_loads, prices):
    """Test dispatch ammissibile per u e scenari casuali"""
    rng = np.random.default_rng(12)
    evaluator = DispatchEvaluator(six_bus, six_bus_loads, prices)
    for schedule, wind in _random_pairs(rng, 10):
        sol = evaluator.dispatch(schedule, wind)
        _assert_feasible_dispatch(six_bus, six_bus_loads, schedule, wind, sol)


@pytest.mark.slow
def test_recourse_is_complete_on_many_pairs(six_bus, six_bus_loads, prices):
    """Test nessun dispatch inammissibile su 10^4 coppie (u, scenario)"""
    rng = np.random.default_rng(13)
    evaluator = DispatchEvaluator(six_bus, six_bus_loads, prices)
    for schedule, wind in _random_pairs(rng, 10_000):
        sol = evaluator.dispatch(schedule, wind)
        _assert_feasible_dispatch(six_bus, six_bus_loads, schedule, wind, sol)


def test_all_units_off_is_energy_not_served(six_bus, six_bus_loads, prices):
    """Test tutte le unita' spente e vento nullo: ens pari alla domanda"""
    schedule = CommitmentSchedule.all_off(six_bus, 4)
    sol = evaluate_dispatch(six_bus, schedule, np.zeros((1, 4)), six_bus_loads, prices)
    np.testing.assert_allclose(sol.ens.sum(axis=0), six_bus_loads, atol=1e-6)
    assert sol.ens_cost == pytest.approx(prices.c_ens * six_bus_loads.sum())


def _scenarios(S, seed=4):
    model = NormalPlugIn(mean=[[60.0, 80.0, 40.0, 100.0]], phi=[[15.0] * 4], capacity=[150.0])
    return sample_scenarios(model, S, 4, seed)


@pytest.mark.parametrize("seed", [4, 5, 6])
@pytest.mark.parametrize("S", [1, 5, 10])
def test_extensive_matches_lshaped(six_bus, six_bus_loads, prices, S, seed):
    """Test forma estesa e L-shaped con lo stesso ottimo"""
    scenarios = _scenarios(S, seed=seed)
    extensive = solve_scenario_set(six_bus, six_bus_loads, scenarios, prices, SolveMethod.EXTENSIVE, TIGHT)
    lshaped = solve_scenario_set(six_bus, six_bus_loads, scenarios, prices, SolveMethod.LSHAPED, TIGHT)
    assert lshaped.objective == pytest.approx(extensive.objective, rel=1e-6)
    # l'obiettivo coincide con la stima di G(u) sugli stessi scenari
    mean, _ = estimate_expected_cost(six_bus, lshaped.schedule, scenarios, six_bus_loads, prices)
    assert mean == pytest.approx(lshaped.objective, rel=1e-6)


def test_multicut_matches_single_cut(six_bus, six_bus_loads, prices):
    """Test varianti a taglio singolo e multiplo"""
    scenarios = _scenarios(3, seed=9)
    single = solve_scenario_set(six_bus, six_bus_loads, scenarios, prices, SolveMethod.LSHAPED, TIGHT)
    multi = solve_scenario_set(
        six_bus, six_bus_loads, scenarios, prices, SolveMethod.LSHAPED,
        SolverOptions(lshaped_tol=1e-8, milp_gap=1e-9, multicut=True)
    )
    assert multi.objective == pytest.approx(single.objective, rel=1e-6)


def test_model_sizes(six_bus, six_bus_loads, prices):
    """Test dimensioni di master e forma estesa"""
    master = build_master(six_bus, 4)
    assert master.lp.n_vars == 3 * 3 * 4
    assert len(master.binaries) == 12
    extensive = build_extensive_form(six_bus, six_bus_loads, _scenarios(2), prices)
    assert extensive.lp.n_vars == 36 + 2 * 4 * (3 + 2 * 6 + 1)
    with pytest.raises(DimensionMismatch):
        build_extensive_form(six_bus, six_bus_loads[:3], _scenarios(2), prices)


def test_breakdown_sums_to_total(six_bus, six_bus_loads, prices):
    """Test la scomposizione dei costi somma al totale"""
    schedule = CommitmentSchedule(np.ones((3, 4), dtype=int))
    cost = realized_cost(six_bus, schedule, np.array([[90.0, 140.0, 10.0, 0.0]]), six_bus_loads, prices)
    parts = cost.commitment + cost.dispatch + cost.penalty + cost.curtailment
    assert cost.total == pytest.approx(parts)
    assert 0.0 <= cost.penalty_ratio <= 1.0


def test_expected_breakdown_is_mean(six_bus, six_bus_loads, prices):
    """Test scomposizione attesa come media delle scomposizioni"""
    schedule = CommitmentSchedule(np.ones((3, 4), dtype=int))
    scenarios = _scenarios(4)
    evaluator = DispatchEvaluator(six_bus, six_bus_loads, prices)
    expected = evaluator.expected_breakdown(schedule, scenarios)
    assert expected.total == pytest.approx(evaluator.scenario_costs(schedule, scenarios).mean())
    with pytest.raises(ValueError):
        evaluator.expected_breakdown(schedule, [])


def test_identical_scenarios_have_zero_variance(six_bus, six_bus_loads, prices):
    """Test scenari identici: varianza nulla"""
    trajectory = np.array([[50.0, 60.0, 70.0, 80.0]])
    scenarios = ScenarioSet(np.stack([trajectory] * 5))
    mean, variance = estimate_expected_cost(
        six_bus, np.ones((3, 4), dtype=int), scenarios, six_bus_loads, prices
    )
    assert variance == 0.0
    assert mean > 0.0


def test_zero_phi_matches_deterministic_uc(six_bus, six_bus_loads, prices):
    """Test phi=0: SAA equivalente alla UC deterministica"""
    history = np.array([[[60.0, 80.0, 40.0, 100.0]]])
    model = fit_plug_in(history, m=1, phi=0.0, capacity=[150.0])
    saa = solve_saa_suc(six_bus, six_bus_loads, model, 3, 7, prices, SolveMethod.EXTENSIVE, TIGHT)
    point = point_forecast_schedule(six_bus, six_bus_loads, model.point_forecast(), prices, TIGHT)
    assert saa.objective == pytest.approx(point.objective, rel=1e-6)


def test_deterministic_uc_is_single_scenario(six_bus, six_bus_loads, prices):
    """Test UC deterministica uguale alla forma estesa con un solo scenario"""
    forecast = np.array([[60.0, 80.0, 40.0, 100.0]])
    deterministic = build_deterministic_uc(six_bus, six_bus_loads, forecast, prices)
    extensive = build_extensive_form(six_bus, six_bus_loads, ScenarioSet.single(forecast), prices)
    assert deterministic.lp.n_vars == 36 + 4 * (3 + 2 * 6 + 1)
    np.testing.assert_array_equal(deterministic.lp.c, extensive.lp.c)
    np.testing.assert_array_equal(deterministic.lp.A, extensive.lp.A)

    solution = solve_milp(deterministic, gap_tol=1e-9)
    point = point_forecast_schedule(six_bus, six_bus_loads, forecast, prices, TIGHT)
    assert solution.objective == pytest.approx(point.objective, rel=1e-6)


def test_penalty_prices_validated():
    """Test prezzi negativi"""
    with pytest.raises(ValueError):
        Prices(c_ens=-1.0)


def test_higher_shedding_price_never_lowers_optimum(six_bus, prices):
    """Test aumentare C_ens non riduce l'ottimo della forma estesa"""
    loads = np.array([300.0, 340.0, 360.0, 320.0])
    scenarios = _scenarios(2, seed=7)
    objectives = [
        solve_scenario_set(six_bus, loads, scenarios, Prices(c_ens=c_ens, c_wc=prices.c_wc),
                           SolveMethod.EXTENSIVE, TIGHT).objective
        for c_ens in (500.0, 3500.0, 7000.0)
    ]
    for low, high in zip(objectives, objectives[1:]):
        assert high >= low - 1e-6 * abs(low)


@pytest.mark.slow
def test_saa_estimate_is_consistent(six_bus, six_bus_loads, prices):
    """Test per u fissata la varianza campionaria / S decresce come 1/S"""
    u = np.ones((3, 4), dtype=int)
    estimates = {S: estimate_expected_cost(six_bus, u, _scenarios(S, seed=30 + S), six_bus_loads, prices)
                 for S in (100, 1000)}
    (mean_small, var_small), (mean_large, var_large) = estimates[100], estimates[1000]
    assert 0.5 <= var_large / var_small <= 2.0
    assert (var_large / 1000) / (var_small / 100) == pytest.approx(0.1, rel=0.9)
    assert abs(mean_large - mean_small) <= 4.0 * np.sqrt(var_small / 100 + var_large / 1000)
