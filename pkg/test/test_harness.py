import json

import numpy as np
import pandas as pd
import pytest

from config import load_config
from conftest import SIX_BUS
from core.errors import ConfigError, DimensionMismatch, InvalidPenetration, InvalidValue, MissingColumn
from core.states import Policy
from grid.system import load_system, wind_penetration
from harness.data_io import (
    daily_matrix, day_slice, read_load_series, read_series, read_wind_series, write_series
)
from harness.report import TOTALS_COLUMNS, load_report, write_study
from harness.studies import (
    decision_hours, relative_saving, run_calibration_study, run_day_ahead_study,
    run_intraday_study, run_opsel_study, run_sweep, stream_seed, sweep_summary
)
from harness.synthetic import (
    generate_synthetic_streams, generate_synthetic_system, scale_to_penetration, synthetic_streams
)
from scripts.cli import EXIT_OK, EXIT_VALIDATION, build_parser, main


def _settings(tmp_path, **overrides):
    """Configurazione ridotta sul sistema a sei bus"""
    values = dict(
        bus_file=str(SIX_BUS / "buses.csv"),
        unit_file=str(SIX_BUS / "units.csv"),
        line_file=str(SIX_BUS / "lines.csv"),
        farm_file=str(SIX_BUS / "farms.csv"),
        load_file=str(tmp_path / "series" / "loads.csv"),
        wind_file=str(tmp_path / "series" / "wind.csv"),
        output_dir=str(tmp_path / "out"),
        n_days=1,
        warmup_days=5,
        horizon=4,
        n_h=4,
        scenarios=2,
        eval_scenarios=3,
        method="extensive",
        milp_gap=1e-9,
        intraday_window=48,
        policies="deterministic,data_driven",
        seed=17,
    )
    values.update(overrides)
    return load_config(None, **values)


@pytest.fixture
def study_config(tmp_path):
    config = _settings(tmp_path)
    generate_synthetic_streams(config, capacity=[150.0])
    return config


def _write_config(tmp_path, config):
    """File chiave=valore equivalente alla configurazione"""
    keys = ["bus_file", "unit_file", "line_file", "farm_file", "load_file", "wind_file", "output_dir",
            "n_days", "warmup_days", "horizon", "n_h", "scenarios", "eval_scenarios", "method",
            "intraday_window", "seed"]
    path = tmp_path / "study.env"
    path.write_text("".join(f"{k.upper()}={getattr(config, k)}\n" for k in keys), encoding="utf-8")
    return str(path)


@pytest.mark.parametrize("target", [0.378, 0.099])
def test_synthetic_penetration(target):
    """Test penetrazione eolica entro la tolleranza"""
    load, wind = synthetic_streams(24 * 30, 1, target, seed=5, capacity=[150.0])
    assert wind_penetration(wind, load) == pytest.approx(target, rel=1e-3)
    assert wind.max() <= 150.0
    assert load.min() >= 0.0


def test_unreachable_penetration():
    """Test capacita' insufficiente e target fuori intervallo"""
    shape = np.full((1, 24), 0.5)
    load = np.full(24, 100.0)
    with pytest.raises(InvalidPenetration):
        scale_to_penetration(shape, load, 0.9, capacity=[10.0])
    with pytest.raises(InvalidPenetration):
        scale_to_penetration(shape, load, 1.2)


def test_synthetic_files_are_deterministic(tmp_path):
    """Test stesso seed, stessi file byte per byte"""
    first = _settings(tmp_path / "a")
    second = _settings(tmp_path / "b")
    a = generate_synthetic_streams(first, capacity=[150.0])
    b = generate_synthetic_streams(second, capacity=[150.0])
    for path_a, path_b in zip(a, b):
        assert path_a.read_bytes() == path_b.read_bytes()
    loads = read_load_series(str(a[0]))
    assert loads.ndim == 1
    assert loads.shape[0] == (first.n_days + first.warmup_days) * 24
    assert read_wind_series(str(a[1])).shape == (1, loads.shape[0])


def test_synthetic_system_loads(tmp_path):
    """Test la rete casuale supera la validazione"""
    paths = generate_synthetic_system(12, 5, 2, seed=3, out_dir=str(tmp_path / "net"))
    system = load_system(str(paths["buses"]), str(paths["units"]), str(paths["lines"]),
                         farm_file=str(paths["farms"]))
    assert system.n_buses == 12
    assert system.n_units == 5
    assert system.n_farms == 2
    assert system.n_lines >= 11


def test_series_round_trip(tmp_path):
    """Test scrittura e lettura di una serie wide"""
    values = np.array([[1.0, 2.5, 3.0], [0.0, 4.0, 5.25]])
    path = write_series(str(tmp_path / "wind.csv"), values, prefix="w")
    assert path.read_text().splitlines()[0] == "hour,w1,w2"
    np.testing.assert_allclose(read_series(str(path)), values)


@pytest.mark.parametrize("text,error", [
    ("value\n1\n2", MissingColumn),
    ("hour,load\n0,1\n2,2", InvalidValue),
    ("hour,load\n0,1\n1,-2", InvalidValue),
])
def test_series_errors(write_csv, text, error):
    """Test colonna hour mancante, ore non consecutive, valori negativi"""
    with pytest.raises(error):
        read_series(write_csv("series.csv", text))


def test_non_numeric_value_row(write_csv):
    """Test riga del valore non numerico"""
    with pytest.raises(InvalidValue) as exc:
        read_series(write_csv("series.csv", "hour,load\n0,1\n1,abc"))
    assert exc.value.row == 3


def test_day_slicing():
    """Test ore di un giorno e matrice giornaliera"""
    series = np.arange(72, dtype=float)[None, :]
    np.testing.assert_array_equal(day_slice(series, 1)[0], np.arange(24, 48))
    assert daily_matrix(series).shape == (3, 1, 24)
    with pytest.raises(DimensionMismatch):
        day_slice(series, 3)


def test_relative_saving():
    """Test risparmio relativo nei due versi"""
    totals = {Policy.DATA_DRIVEN: 100.0, Policy.EMPIRICAL: 110.0, Policy.DETERMINISTIC: 125.0}
    assert relative_saving(totals, Policy.EMPIRICAL, Policy.DATA_DRIVEN) == pytest.approx(0.1)
    assert relative_saving(totals, Policy.DATA_DRIVEN, Policy.DETERMINISTIC, reverse=True) == pytest.approx(0.2)
    assert relative_saving({Policy.DATA_DRIVEN: 0.0, Policy.OPSEL: 1.0}, Policy.OPSEL, Policy.DATA_DRIVEN) == 0.0


def test_stream_seeds():
    """Test seed derivati deterministici e distinti"""
    assert stream_seed(1, 2, 3, 4) == stream_seed(1, 2, 3, 4)
    seeds = {stream_seed(1, s, d, b) for s in (1, 2, 3) for d in range(3) for b in range(2)}
    assert len(seeds) == 18
    assert all(0 <= s < 2 ** 64 for s in seeds)


def test_decision_hours(tmp_path):
    """Test h_t = (warmup + d) * 24 + b * n_h - 1"""
    config = _settings(tmp_path, n_days=2, n_h=6)
    hours = decision_hours(config)
    assert len(hours) == 8
    assert hours[0] == (0, 0, 5 * 24 - 1)
    assert hours[5] == (1, 1, 6 * 24 + 6 - 1)


def test_intraday_study_is_reproducible(study_config, tmp_path):
    """Test studio intra-day: report identico rieseguendo con lo stesso seed"""
    first = run_intraday_study(study_config)
    second = run_intraday_study(study_config)
    a = write_study(first, str(tmp_path / "run1"))
    b = write_study(second, str(tmp_path / "run2"))
    assert a["report"].read_bytes() == b["report"].read_bytes()

    report = load_report(str(a["report"]))
    assert report.baseline == Policy.DETERMINISTIC
    data_driven = report.totals(Policy.DATA_DRIVEN)
    assert len(data_driven.entries) == 24 // study_config.n_h
    assert data_driven.r_delta_g is not None
    assert report.totals(Policy.DETERMINISTIC).r_delta_g is None

    totals = pd.read_csv(a["totals"], float_precision="round_trip")
    assert list(totals.columns) == TOTALS_COLUMNS
    # rDeltaG si ricalcola esattamente dai totali stampati
    by_policy = totals.set_index("policy")
    base = by_policy.loc["deterministic", "total_cost"]
    saving = (base - by_policy.loc["data_driven", "total_cost"]) / base
    assert by_policy.loc["data_driven", "r_delta_g"] == saving
    assert saving == data_driven.r_delta_g
    assert "timing" not in a


def test_day_ahead_study(study_config):
    """Test studio day-ahead: stesse valutazioni per tutte le policy"""
    config = study_config.model_copy(update={"policies": "deterministic,empirical,data_driven"})
    result = run_day_ahead_study(config)
    report = result.report
    assert report.baseline == Policy.DATA_DRIVEN
    assert {t.policy for t in report.policies} == {Policy.DETERMINISTIC, Policy.EMPIRICAL, Policy.DATA_DRIVEN}
    for totals in report.policies:
        entry = totals.entries[0]
        assert entry.total == pytest.approx(entry.commitment + entry.dispatch + entry.penalty + entry.curtailment)
    variants = {f["policy"]: f["variant"] for f in report.forecasts}
    assert variants["data_driven"] == "posterior_predictive"


def test_opsel_study_outputs(study_config, tmp_path):
    """Test studio OPSEL: scatter del primo blocco e tempi fuori dal report"""
    config = study_config.model_copy(update={"workers": 2, "budget": 4, "delta_t": 2})
    result = run_opsel_study(config)
    paths = write_study(result, str(tmp_path / "opsel"))

    scatter = pd.read_csv(paths["scatter"])
    assert list(scatter.columns) == ["worker", "realized_cost"]
    assert sorted(scatter["worker"].tolist()) == [1, 2]
    timing = json.loads(paths["timing"].read_text())
    assert len(timing["blocks"]) == 24 // config.n_h
    assert "search_seconds" not in paths["report"].read_text()
    assert all(o.budget_used == 4 or not o.iterations for o in result.report.opsel)


def test_opsel_study_without_budget(study_config):
    """Test T=0: la policy OPSEL coincide con la singola SAA"""
    config = study_config.model_copy(update={"workers": 2, "budget": 0})
    report = run_opsel_study(config).report
    assert report.totals(Policy.OPSEL).total_cost == pytest.approx(report.totals(Policy.DATA_DRIVEN).total_cost)
    assert report.totals(Policy.OPSEL).r_delta_g == pytest.approx(0.0)
    assert report.opsel == []


def test_calibration_study(study_config):
    """Test errore relativo massimo per numerosita'"""
    config = study_config.model_copy(update={
        "calibration_sizes": "2,4", "calibration_reference": 16, "calibration_days": 1
    })
    report = run_calibration_study(config).report
    sizes = [row["eval_scenarios"] for row in report.extra["calibration"]]
    assert sizes == [2, 4]
    assert all(row["max_relative_error"] >= 0.0 for row in report.extra["calibration"])


def test_missing_inputs(tmp_path):
    """Test serie non generate"""
    with pytest.raises(ConfigError):
        run_intraday_study(_settings(tmp_path))


def test_cli_gen_data_and_solve(study_config, tmp_path, capsys):
    """Test gen-data e solve da riga di comando"""
    config_file = _write_config(tmp_path, study_config)
    assert main(["gen-data", "--config", config_file]) == EXIT_OK
    capsys.readouterr()
    assert main(["solve", "--config", config_file, "--policy", "deterministic"]) == EXIT_OK
    objective = float(capsys.readouterr().out.strip().splitlines()[-1])
    assert objective > 0.0
    assert (tmp_path / "out" / "schedule.csv").exists()


def test_cli_validation_exit_codes(tmp_path):
    """Test exit code 2 per configurazioni non valide"""
    assert main(["intraday", "--config", str(tmp_path / "missing.env")]) == EXIT_VALIDATION
    assert main(["gen-data", "--n-h", "5"]) == EXIT_VALIDATION


def test_cli_solver_failure_exit_code(study_config, tmp_path, mocker):
    """Test exit code 3 quando un solver fallisce"""
    from core.errors import IterationLimitReached
    from scripts.cli import EXIT_SOLVER

    failing = mocker.Mock(side_effect=IterationLimitReached("no convergence", None, 0.0, 1.0))
    mocker.patch.dict("scripts.cli.STUDIES", {"intraday": failing})
    assert main(["intraday", "--config", _write_config(tmp_path, study_config)]) == EXIT_SOLVER
    failing.assert_called_once()


def test_cli_slack_bus_override(study_config, tmp_path):
    """Test --slack-bus passa alla configurazione, bus inesistente rifiutato"""
    args = build_parser().parse_args(["solve", "--slack-bus", "3"])
    assert args.slack_bus == 3
    config_file = _write_config(tmp_path, study_config)
    assert main(["gen-data", "--config", config_file, "--slack-bus", "3"]) == EXIT_OK
    assert main(["gen-data", "--config", config_file, "--slack-bus", "9"]) == EXIT_VALIDATION


def test_sweep_rows_and_summary(study_config):
    """Test una riga per (punto, seed, policy) e medie sui seed"""
    frame = run_sweep(run_intraday_study, study_config, {"scenarios": [2]}, seeds=[1, 2])
    assert list(frame.columns) == ["scenarios", "seed", "policy", "total_cost", "r_delta_g"]
    assert len(frame) == 2 * 2
    summary = sweep_summary(frame, ["scenarios"])
    assert len(summary) == 2
    mean = frame[frame.policy == "data_driven"].total_cost.mean()
    assert summary.set_index("policy").loc["data_driven", "total_cost"] == pytest.approx(mean)
    with pytest.raises(ValueError):
        run_sweep(run_intraday_study, study_config, {}, seeds=[])


def test_cli_sweep(study_config, tmp_path):
    """Test sottocomando sweep: CSV dei run e delle medie"""
    config_file = _write_config(tmp_path, study_config)
    code = main(["sweep", "--config", config_file, "--study", "intraday", "--grid", "scenarios=2",
                 "--seeds", "2", "--policies", "deterministic,data_driven"])
    assert code == EXIT_OK
    summary = pd.read_csv(tmp_path / "out" / "sweep_summary.csv")
    assert set(summary.policy) == {"deterministic", "data_driven"}
    assert main(["sweep", "--config", config_file, "--grid", "unknown=1"]) == EXIT_VALIDATION


DIRECTIONAL_SEEDS = list(range(101, 111))


@pytest.fixture
def directional_config(tmp_path):
    """Sistema a sei bus, due giorni di studio, penetrazione 37.8%"""
    config = _settings(tmp_path, n_days=2, horizon=12, scenarios=8, eval_scenarios=100,
                       method="lshaped", target_penetration=0.378, milp_gap=1e-6)
    generate_synthetic_streams(config, capacity=[150.0])
    return config


def _mean_saving(summary, key, value, policy):
    row = summary[(summary[key] == value) & (summary.policy == policy)]
    return float(row.r_delta_g.iloc[0])


@pytest.mark.slow
def test_day_ahead_saving_grows_with_phi(directional_config):
    """Test rDeltaG dell'empirica crescente in phi con m=1"""
    config = directional_config.model_copy(update={"m": 1, "policies": "empirical,data_driven"})
    phis = [0.05, 0.1, 0.2]
    frame = run_sweep(run_day_ahead_study, config, {"phi_fraction": phis}, DIRECTIONAL_SEEDS)
    summary = sweep_summary(frame, ["phi_fraction"])
    savings = [_mean_saving(summary, "phi_fraction", phi, "empirical") for phi in phis]
    assert savings[0] < savings[1] < savings[2]


@pytest.mark.slow
def test_day_ahead_saving_shrinks_with_history(directional_config):
    """Test rDeltaG dell'empirica non crescente in m con phi = 20% mu"""
    config = directional_config.model_copy(update={"phi_fraction": 0.2, "policies": "empirical,data_driven"})
    sizes = [1, 5, 10]
    frame = run_sweep(run_day_ahead_study, config, {"m": sizes}, DIRECTIONAL_SEEDS)
    summary = sweep_summary(frame, ["m"])
    savings = [_mean_saving(summary, "m", m, "empirical") for m in sizes]
    # tolleranza per il rumore Monte Carlo residuo a m grande
    assert savings[0] >= savings[1] - 1e-3
    assert savings[1] >= savings[2] - 1e-3
    assert savings[0] > savings[2]


@pytest.mark.slow
def test_intraday_policy_ordering(directional_config):
    """Test costo realizzato medio: data-driven <= empirica <= deterministica"""
    config = directional_config.model_copy(update={
        "n_days": 1, "policies": "deterministic,empirical,data_driven"
    })
    frame = run_sweep(run_intraday_study, config, {"n_h": [4]}, DIRECTIONAL_SEEDS, regenerate=True)
    totals = sweep_summary(frame, ["n_h"]).set_index("policy").total_cost
    assert totals["data_driven"] <= totals["empirical"] <= totals["deterministic"]


@pytest.mark.slow
def test_opsel_not_worse_than_single_saa(directional_config):
    """Test costo realizzato medio con OPSEL (L=4, T=1000, delta_t=200) non peggiore della singola SAA"""
    config = directional_config.model_copy(update={
        "n_days": 1, "workers": 4, "budget": 1000, "delta_t": 200
    })
    frame = run_sweep(run_opsel_study, config, {"n_h": [4]}, DIRECTIONAL_SEEDS, regenerate=True)
    totals = sweep_summary(frame, ["n_h"]).set_index("policy").total_cost
    assert totals["opsel"] <= totals["data_driven"]
