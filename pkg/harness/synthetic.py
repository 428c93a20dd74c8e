"""
Dati sintetici: serie di carico ed eolico, reti casuali.

Sostituiscono le serie storiche reali; tutto e' deterministico nel seed.
"""

from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import InvalidPenetration
from forecast.scenarios import make_rng
from grid.system import wind_penetration
from harness.data_io import write_series
from utils.logging_config import get_logger

logger = get_logger(__name__)

PENETRATION_TOL = 1e-3
AR_COEFFICIENT = 0.9


def synthetic_load(n_hours: int, rng: np.random.Generator, mean: float = 180.0, swing: float = 50.0) -> np.ndarray:
    """Profilo giornaliero (minimo notturno, picco serale) con rumore per giorno"""
    hours = np.arange(n_hours)
    daily = -np.cos(2.0 * np.pi * (hours % 24 - 4) / 24.0)
    level = 1.0 + 0.05 * rng.standard_normal(n_hours // 24 + 1)[hours // 24]
    load = level * (mean + swing * daily) + 0.02 * mean * rng.standard_normal(n_hours)
    return np.maximum(load, 0.0)


def synthetic_wind_shape(n_hours: int, n_farms: int, rng: np.random.Generator) -> np.ndarray:
    """Processo AR(1) per farm passato in una sigmoide: valori in (0, 1)"""
    z = np.empty((n_farms, n_hours))
    z[:, 0] = rng.standard_normal(n_farms)
    noise = rng.standard_normal((n_farms, n_hours)) * np.sqrt(1.0 - AR_COEFFICIENT ** 2)
    for t in range(1, n_hours):
        z[:, t] = AR_COEFFICIENT * z[:, t - 1] + noise[:, t]
    return 1.0 / (1.0 + np.exp(-1.5 * z))


def scale_to_penetration(shape: np.ndarray, load: np.ndarray, target: float,
                         capacity: Optional[Sequence[float]] = None, max_rounds: int = 100) -> np.ndarray:
    """
    Scala la forma eolica finche' wind_penetration coincide con target.

    Il clamping alla capacita' riduce l'energia: il fattore viene ricalcolato
    sulla sola parte non saturata.

    Raises:
        InvalidPenetration: target fuori da (0,1) o non raggiungibile
    """
    if not 0.0 < target < 1.0:
        raise InvalidPenetration(f"target penetration must lie in (0,1), got {target}")
    cap = np.full(shape.shape[0], np.inf) if capacity is None else np.asarray(capacity, dtype=float)
    energy = target * float(np.sum(load))
    if np.isfinite(cap).all() and float(np.sum(cap)) * shape.shape[1] < energy:
        raise InvalidPenetration(f"farm capacity cannot reach penetration {target}")

    factor = energy / float(np.sum(shape))
    for _ in range(max_rounds):
        wind = np.minimum(shape * factor, cap[:, None])
        measured = wind_penetration(wind, load)
        if abs(measured - target) <= PENETRATION_TOL * target:
            return wind
        free = shape * factor < cap[:, None]
        free_energy = float(np.sum(wind[free]))
        if free_energy <= 0:
            break
        saturated = float(np.sum(wind[~free]))
        factor *= (energy - saturated) / free_energy
    raise InvalidPenetration(f"penetration {target} not reachable within tolerance")


def synthetic_streams(
    n_hours: int,
    n_farms: int,
    target: float,
    seed: int,
    capacity: Optional[Sequence[float]] = None,
    load_mean: float = 180.0,
    load_swing: float = 50.0
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Serie di carico [ore] ed eolico [farm x ore] con penetrazione target.

    Returns:
        tuple: (carico, eolico)
    """
    rng = make_rng(seed)
    load = synthetic_load(n_hours, rng, load_mean, load_swing)
    shape = synthetic_wind_shape(n_hours, n_farms, rng)
    wind = scale_to_penetration(shape, load, target, capacity)
    return load, wind


def generate_synthetic_streams(config, seed: Optional[int] = None, n_farms: int = 1,
                               capacity: Optional[Sequence[float]] = None) -> Tuple[Path, Path]:
    """
    Scrive load_file e wind_file per n_days + warmup_days giorni.

    Args:
        config: Settings
        seed: Seed (default config.seed)
        n_farms: Numero di parchi eolici
        capacity: Capacita' per farm

    Returns:
        tuple: (percorso carico, percorso eolico)
    """
    seed = config.seed if seed is None else seed
    n_hours = (config.n_days + config.warmup_days) * 24
    load, wind = synthetic_streams(
        n_hours, n_farms, config.target_penetration, seed, capacity,
        config.load_mean_mw, config.load_swing_mw
    )
    load_path = write_series(config.load_file, load, prefix="", columns=["load"])
    wind_path = write_series(config.wind_file, wind, prefix="w")
    logger.info(
        "synthetic_streams_written",
        hours=n_hours,
        farms=n_farms,
        penetration=round(wind_penetration(wind, load), 6),
        seed=seed
    )
    return load_path, wind_path


def generate_synthetic_system(n_buses: int, n_units: int, n_farms: int, seed: int, out_dir: str) -> Dict[str, Path]:
    """
    Rete casuale connessa con unita' e parchi per studi in scala ridotta.

    Un albero ricoprente garantisce la connessione; circa n_buses/2 linee in
    piu' chiudono maglie.

    Returns:
        dict: Percorsi di buses, units, lines, farms
    """
    if n_buses < 2 or n_units < 1 or n_farms < 1:
        raise ValueError("need at least 2 buses, 1 unit and 1 farm")
    rng = make_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    shares = rng.dirichlet(np.ones(n_buses))
    shares = np.round(shares, 6)
    shares[-1] = round(1.0 - shares[:-1].sum(), 6)
    buses = pd.DataFrame({"id": np.arange(1, n_buses + 1), "load_share": shares})

    edges = [(int(rng.integers(0, k)), k) for k in range(1, n_buses)]
    existing = {tuple(sorted(e)) for e in edges}
    for _ in range(n_buses // 2):
        a, b = (int(v) for v in rng.choice(n_buses, size=2, replace=False))
        if tuple(sorted((a, b))) not in existing:
            existing.add(tuple(sorted((a, b))))
            edges.append((a, b))
    lines = pd.DataFrame({
        "id": np.arange(1, len(edges) + 1),
        "from_bus": [a + 1 for a, _ in edges],
        "to_bus": [b + 1 for _, b in edges],
        "reactance": np.round(rng.uniform(0.02, 0.3, len(edges)), 4),
        "flow_limit": np.round(rng.uniform(150.0, 300.0, len(edges)), 1),
    })

    p_min = np.round(rng.uniform(10.0, 60.0, n_units), 1)
    min_on = rng.integers(1, 5, n_units)
    min_off = rng.integers(1, 5, n_units)
    init = rng.integers(1, 5, n_units) * rng.choice([-1, 1], n_units)
    units = pd.DataFrame({
        "id": np.arange(1, n_units + 1),
        "bus": rng.integers(1, n_buses + 1, n_units),
        "p_min": p_min,
        "p_max": np.round(p_min + rng.uniform(40.0, 200.0, n_units), 1),
        "min_on": min_on,
        "min_off": -min_off,
        "init_state": init,
        "fuel_a": np.round(rng.uniform(100.0, 180.0, n_units), 1),
        "fuel_b": np.round(rng.uniform(10.0, 35.0, n_units), 2),
        "fuel_c": np.round(rng.uniform(0.0004, 0.005, n_units), 5),
        "startup_fuel": np.round(rng.uniform(0.0, 360.0, n_units)),
        "shutdown_fuel": np.round(rng.uniform(0.0, 50.0, n_units)),
        "fuel_price": np.round(rng.uniform(1.2, 1.3, n_units), 4),
    })

    farms = pd.DataFrame({
        "id": np.arange(1, n_farms + 1),
        "bus": rng.integers(1, n_buses + 1, n_farms),
        "capacity": np.round(rng.uniform(100.0, 300.0, n_farms), 1),
    })

    paths = {name: out / f"{name}.csv" for name in ("buses", "units", "lines", "farms")}
    for name, frame in (("buses", buses), ("units", units), ("lines", lines), ("farms", farms)):
        frame.to_csv(paths[name], index=False, lineterminator="\n")
    logger.info("synthetic_system_written", buses=n_buses, units=n_units, farms=n_farms,
                lines=len(edges), out_dir=str(out))
    return paths
