"""
Entry point a riga di comando.

    python -m scripts.cli gen-data --config study.env
    python -m scripts.cli day-ahead --config study.env --phi-fraction 0.05
    python -m scripts.cli opsel --workers 4 --budget 1000 --delta-t 200

Exit code: 0 successo, 2 errore di validazione, 3 fallimento di un solver.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from config import load_config
from core.errors import SolverError, SucError
from core.states import Policy
from forecast.scenarios import make_rng
from grid.system import load_system
from harness.data_io import day_slice, read_load_series, read_wind_series
from harness.report import totals_frame, write_study
from harness.studies import (
    HISTORY_STREAM, SEARCH_STREAM, day_ahead_models, run_calibration_study,
    run_day_ahead_study, run_intraday_study, run_opsel_study, run_sweep, stream_seed, sweep_summary
)
from harness.synthetic import generate_synthetic_streams, generate_synthetic_system
from suc.model import Prices
from suc.saa import SolverOptions, point_forecast_schedule, solve_saa_suc
from utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

# flag -> chiave di Settings
OVERRIDES = {
    "seed": int,
    "workers": int,
    "scenarios": int,
    "eval_scenarios": int,
    "budget": int,
    "delta_t": int,
    "horizon": int,
    "n_h": int,
    "n_days": int,
    "warmup_days": int,
    "m": int,
    "slack_bus": int,
    "phi_fraction": float,
    "target_penetration": float,
    "c_ens": float,
    "c_wc": float,
    "max_parallel": int,
    "method": str,
    "policies": str,
    "output_dir": str,
    "load_file": str,
    "wind_file": str,
    "log_level": str,
    "log_format": str,
}
SWITCHES = ("multicut", "classic_ocba", "debug_cuts")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="File chiave=valore (formato .env)")
    for key, kind in OVERRIDES.items():
        parser.add_argument("--" + key.replace("_", "-"), dest=key, type=kind, default=None)
    for key in SWITCHES:
        parser.add_argument("--" + key.replace("_", "-"), dest=key, action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="suc", description="Data-driven stochastic unit commitment")
    sub = parser.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("gen-data", help="Serie sintetiche di carico ed eolico"))

    gen_system = sub.add_parser("gen-system", help="Rete casuale per studi in scala ridotta")
    _common(gen_system)
    gen_system.add_argument("--buses", type=int, default=20)
    gen_system.add_argument("--units", type=int, default=10)
    gen_system.add_argument("--farms", type=int, default=2)
    gen_system.add_argument("--out-dir", default="data/synthetic")

    solve = sub.add_parser("solve", help="Una istanza UC (giorno day)")
    _common(solve)
    solve.add_argument("--day", type=int, default=1, help="Giorno di studio (1-based)")
    solve.add_argument("--policy", choices=[p.value for p in (Policy.DETERMINISTIC, Policy.EMPIRICAL,
                                                                Policy.DATA_DRIVEN)],
                       default=Policy.DATA_DRIVEN.value)

    for name, text in (("day-ahead", "Studio day-ahead a costo atteso"),
                       ("intraday", "Studio intra-day rolling a costo realizzato"),
                       ("opsel", "SUC data-driven con e senza OPSEL"),
                       ("calibrate", "Calibrazione della numerosita' S_e")):
        _common(sub.add_parser(name, help=text))

    sweep = sub.add_parser("sweep", help="Studio ripetuto su griglia di parametri e seed")
    _common(sweep)
    sweep.add_argument("--study", choices=["day-ahead", "intraday", "opsel"], default="day-ahead")
    sweep.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                       help="Valori di una chiave di configurazione (ripetibile)")
    sweep.add_argument("--seeds", type=int, default=10, help="Seed consecutivi a partire da --seed")
    sweep.add_argument("--regenerate", action="store_true", help="Serie sintetiche nuove per ogni seed")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = list(OVERRIDES) + list(SWITCHES)
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _gen_data(config) -> None:
    system = load_system(config.bus_file, config.unit_file, config.line_file,
                         config.slack_bus, config.farm_file)
    load_path, wind_path = generate_synthetic_streams(config, n_farms=system.n_farms,
                                                      capacity=system.farm_capacity)
    print(f"{load_path}\n{wind_path}")


def _gen_system(config, args: argparse.Namespace) -> None:
    paths = generate_synthetic_system(args.buses, args.units, args.farms, config.seed, args.out_dir)
    for path in paths.values():
        print(path)


def _solve(config, args: argparse.Namespace) -> None:
    config.validate_files()
    system = load_system(config.bus_file, config.unit_file, config.line_file,
                         config.slack_bus, config.farm_file)
    d = args.day - 1
    day = config.warmup_days + d
    loads = day_slice(read_load_series(config.load_file), day, config.horizon)
    mu = day_slice(read_wind_series(config.wind_file), day, config.horizon)
    models = day_ahead_models(mu, config.phi_fraction * mu, config.m,
                              make_rng(stream_seed(config.seed, HISTORY_STREAM, d)), system.farm_capacity)
    prices = Prices(c_ens=config.c_ens, c_wc=config.c_wc)
    options = SolverOptions.from_settings(config)
    policy = Policy(args.policy)
    if policy == Policy.DETERMINISTIC:
        result = point_forecast_schedule(system, loads, models[policy.value].point_forecast(), prices, options)
    else:
        result = solve_saa_suc(system, loads, models[policy.value], config.scenarios,
                               stream_seed(config.seed, SEARCH_STREAM, d), prices, config.method, options)
    path = result.schedule.to_csv(system, str(Path(config.output_dir) / "schedule.csv"))
    logger.info("schedule_written", path=str(path), objective=result.objective)
    print(f"{result.objective:.6f}")


STUDIES = {
    "day-ahead": run_day_ahead_study,
    "intraday": run_intraday_study,
    "opsel": run_opsel_study,
    "calibrate": run_calibration_study,
}


def _parse_grid(items: List[str]) -> Dict[str, List[Any]]:
    grid: Dict[str, List[Any]] = {}
    for item in items:
        key, sep, values = item.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in OVERRIDES:
            raise ValueError(f"invalid grid entry {item!r}")
        grid[key] = [OVERRIDES[key](v) for v in values.split(",") if v.strip()]
    return grid


def _sweep(config, args: argparse.Namespace) -> None:
    grid = _parse_grid(args.grid)
    seeds = [config.seed + k for k in range(args.seeds)]
    frame = run_sweep(STUDIES[args.study], config, grid, seeds, regenerate=args.regenerate)
    summary = sweep_summary(frame, list(grid))
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "sweep.csv", index=False, float_format="%.17g", lineterminator="\n")
    summary.to_csv(out / "sweep_summary.csv", index=False, float_format="%.17g", lineterminator="\n")
    print(summary.to_string(index=False))


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, **_overrides(args))
        setup_logging(config.log_level, config.log_format, config.log_file)

        if args.command == "gen-data":
            _gen_data(config)
        elif args.command == "gen-system":
            _gen_system(config, args)
        elif args.command == "solve":
            _solve(config, args)
        elif args.command == "sweep":
            _sweep(config, args)
        else:
            result = STUDIES[args.command](config)
            write_study(result, config.output_dir)
            print(totals_frame(result.report).to_string(index=False))
    except SolverError as e:
        logger.error("solver_failed", command=args.command, error=str(e))
        return EXIT_SOLVER
    except (ValidationError, ValueError, SucError) as e:
        logger.error("validation_failed", command=args.command, error=str(e))
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
