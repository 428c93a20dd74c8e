"""Modello dati del sistema elettrico e ingestione CSV."""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import (
    DimensionMismatch, DisconnectedNetwork, DuplicateId, InvalidValue,
    MissingColumn, ZeroDemand
)
from grid.fuel import FuelLinearization, linearize_fuel, quadratic_fuel
from grid.ptdf import compute_ptdf, is_connected
from utils.logging_config import get_logger

logger = get_logger(__name__)


BUS_COLUMNS = ["id", "load_share"]
UNIT_COLUMNS = [
    "id", "bus", "p_min", "p_max", "min_on", "min_off", "init_state",
    "fuel_a", "fuel_b", "fuel_c", "startup_fuel", "shutdown_fuel", "fuel_price"
]
LINE_COLUMNS = ["id", "from_bus", "to_bus", "reactance", "flow_limit"]
FARM_COLUMNS = ["id", "bus"]


@dataclass(frozen=True)
class Bus:
    id: int
    load_share: float


@dataclass(frozen=True)
class ThermalUnit:
    """Unita' termica con curva di combustibile quadratica"""
    id: int
    bus: int
    p_min: float
    p_max: float
    min_on: int
    min_off: int
    init_state: int  # >0 acceso da h ore, <0 spento da h ore
    fuel_a: float
    fuel_b: float
    fuel_c: float
    startup_fuel: float
    shutdown_fuel: float
    fuel_price: float

    @property
    def initially_on(self) -> bool:
        return self.init_state > 0

    @property
    def startup_cost(self) -> float:
        return self.fuel_price * self.startup_fuel

    @property
    def shutdown_cost(self) -> float:
        return self.fuel_price * self.shutdown_fuel

    def forced_initial_hours(self) -> int:
        """Ore iniziali in cui lo stato iniziale va mantenuto (chiusura min-up/down)"""
        if self.init_state > 0:
            return max(0, self.min_on - self.init_state)
        return max(0, self.min_off + self.init_state)


@dataclass(frozen=True)
class WindFarm:
    id: int
    bus: int
    capacity: float = math.inf


@dataclass(frozen=True)
class TransmissionLine:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    flow_limit: float


@dataclass(frozen=True, eq=False)
class PowerSystem:
    """Istanza fisica immutabile: bus, unita', parchi eolici, linee e PTDF"""
    buses: Tuple[Bus, ...]
    units: Tuple[ThermalUnit, ...]
    farms: Tuple[WindFarm, ...]
    lines: Tuple[TransmissionLine, ...]
    slack_bus: int
    ptdf: np.ndarray
    fuel: Tuple[FuelLinearization, ...] = field(default=())

    def __post_init__(self):
        if not self.fuel:
            object.__setattr__(self, "fuel", tuple(linearize_fuel(u) for u in self.units))
        self.ptdf.setflags(write=False)

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_farms(self) -> int:
        return len(self.farms)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def load_shares(self) -> np.ndarray:
        return np.array([b.load_share for b in self.buses])

    @property
    def farm_capacity(self) -> np.ndarray:
        return np.array([f.capacity for f in self.farms], dtype=float)

    @property
    def unit_ptdf(self) -> np.ndarray:
        """Colonne PTDF dei bus che ospitano le unita' [linee x unita']"""
        return self.ptdf[:, [u.bus - 1 for u in self.units]]

    @property
    def farm_ptdf(self) -> np.ndarray:
        return self.ptdf[:, [f.bus - 1 for f in self.farms]]

    @property
    def flow_limits(self) -> np.ndarray:
        return np.array([line.flow_limit for line in self.lines])

    def bus_loads(self, load_series) -> np.ndarray:
        """
        Carico per bus P^D [bus x ore].

        Accetta una serie di sistema (1-D), ripartita con le load share, oppure
        una matrice gia' per bus.
        """
        loads = np.asarray(load_series, dtype=float)
        if loads.ndim == 1:
            return np.outer(self.load_shares, loads)
        if loads.ndim == 2 and loads.shape[0] == self.n_buses:
            return loads
        raise DimensionMismatch(
            f"load series shape {loads.shape} incompatible with {self.n_buses} buses"
        )

    def with_initial_states(self, u: np.ndarray) -> "PowerSystem":
        """
        Nuovo sistema con stati iniziali aggiornati alla fine della schedule u.

        Lo stato iniziale diventa la durata della striscia finale on/off,
        sommata a quella precedente se la schedule non cambia mai stato.
        """
        u = np.asarray(u)
        units = []
        for i, unit in enumerate(self.units):
            row = u[i]
            last = int(row[-1])
            streak = 0
            for value in row[::-1]:
                if int(value) != last:
                    break
                streak += 1
            if streak == len(row) and (unit.init_state > 0) == bool(last):
                streak += abs(unit.init_state)
            units.append(replace(unit, init_state=streak if last else -streak))
        return replace(self, units=tuple(units), fuel=self.fuel)

    def with_farm_capacity(self, capacity: Sequence[float]) -> "PowerSystem":
        farms = tuple(replace(f, capacity=float(c)) for f, c in zip(self.farms, capacity))
        return replace(self, farms=farms, fuel=self.fuel)


# ---------------------------------------------------------------- CSV

def _read_table(path: str, columns: List[str]) -> pd.DataFrame:
    """Legge un CSV con header e verifica le colonne obbligatorie"""
    try:
        df = pd.read_csv(path, encoding="utf-8", skipinitialspace=True)
    except FileNotFoundError as e:
        raise InvalidValue("file not found", file=path) from e
    df.columns = [str(c).strip() for c in df.columns]
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise MissingColumn(f"missing column(s) {', '.join(missing)}", file=path)
    for col in df.columns:
        converted = pd.to_numeric(df[col], errors="coerce")
        bad = converted.isna() & df[col].notna()
        if bad.any():
            row = int(bad.idxmax()) + 2  # header = riga 1
            raise InvalidValue(f"non-numeric value in column {col!r}", file=path, row=row)
        df[col] = converted
    if df[columns].isna().any().any():
        row = int(df[columns].isna().any(axis=1).idxmax()) + 2
        raise InvalidValue("empty field", file=path, row=row)
    return df


def _check_unique(df: pd.DataFrame, path: str) -> None:
    dup = df["id"].duplicated()
    if dup.any():
        row = int(dup.idxmax()) + 2
        raise DuplicateId(f"duplicate id {int(df['id'][dup.idxmax()])}", file=path, row=row)


def _load_buses(path: str) -> Tuple[Bus, ...]:
    df = _read_table(path, BUS_COLUMNS)
    _check_unique(df, path)
    df = df.sort_values("id")
    ids = [int(v) for v in df["id"]]
    if ids != list(range(1, len(ids) + 1)):
        raise InvalidValue("bus ids must be contiguous starting at 1", file=path)
    buses = []
    for idx, row in df.iterrows():
        share = float(row["load_share"])
        if not 0.0 <= share <= 1.0:
            raise InvalidValue(f"load_share {share} outside [0,1]", file=path, row=idx + 2)
        buses.append(Bus(id=int(row["id"]), load_share=share))
    total = sum(b.load_share for b in buses)
    if abs(total - 1.0) > 1e-9:
        raise InvalidValue(f"load shares sum to {total}, expected 1", file=path)
    return tuple(buses)


def _load_units(path: str, n_buses: int) -> Tuple[ThermalUnit, ...]:
    df = _read_table(path, UNIT_COLUMNS)
    _check_unique(df, path)
    units = []
    for idx, row in df.sort_values("id").iterrows():
        line_no = idx + 2
        unit = ThermalUnit(
            id=int(row["id"]),
            bus=int(row["bus"]),
            p_min=float(row["p_min"]),
            p_max=float(row["p_max"]),
            # Min On/Off negativi indicano la direzione, non la durata
            min_on=abs(int(row["min_on"])),
            min_off=abs(int(row["min_off"])),
            init_state=int(row["init_state"]),
            fuel_a=float(row["fuel_a"]),
            fuel_b=float(row["fuel_b"]),
            fuel_c=float(row["fuel_c"]),
            startup_fuel=float(row["startup_fuel"]),
            shutdown_fuel=float(row["shutdown_fuel"]),
            fuel_price=float(row["fuel_price"]),
        )
        if not 1 <= unit.bus <= n_buses:
            raise InvalidValue(f"unit bus {unit.bus} does not exist", file=path, row=line_no)
        if not 0.0 <= unit.p_min <= unit.p_max:
            raise InvalidValue("require 0 <= p_min <= p_max", file=path, row=line_no)
        if unit.min_on < 1 or unit.min_off < 1:
            raise InvalidValue("min_on and min_off must be >= 1", file=path, row=line_no)
        if unit.init_state == 0:
            raise InvalidValue("init_state must be nonzero", file=path, row=line_no)
        if min(unit.fuel_price, unit.startup_fuel, unit.shutdown_fuel) < 0:
            raise InvalidValue("fuel price and start/stop fuel must be >= 0", file=path, row=line_no)
        points = [unit.p_min, unit.p_max]
        if unit.fuel_c != 0:
            vertex = -unit.fuel_b / (2.0 * unit.fuel_c)
            if unit.p_min < vertex < unit.p_max:
                points.append(vertex)
        if min(quadratic_fuel(unit, p) for p in points) < 0:
            raise InvalidValue("fuel curve negative on [p_min, p_max]", file=path, row=line_no)
        units.append(unit)
    return tuple(units)


def _load_lines(path: str, n_buses: int) -> Tuple[TransmissionLine, ...]:
    df = _read_table(path, LINE_COLUMNS)
    _check_unique(df, path)
    lines = []
    for idx, row in df.sort_values("id").iterrows():
        line_no = idx + 2
        line = TransmissionLine(
            id=int(row["id"]),
            from_bus=int(row["from_bus"]),
            to_bus=int(row["to_bus"]),
            reactance=float(row["reactance"]),
            flow_limit=float(row["flow_limit"]),
        )
        if not (1 <= line.from_bus <= n_buses and 1 <= line.to_bus <= n_buses):
            raise InvalidValue("line endpoint does not exist", file=path, row=line_no)
        if line.from_bus == line.to_bus:
            raise InvalidValue("from_bus equals to_bus", file=path, row=line_no)
        if line.reactance <= 0 or line.flow_limit <= 0:
            raise InvalidValue("reactance and flow_limit must be > 0", file=path, row=line_no)
        lines.append(line)
    return tuple(lines)


def _load_farms(path: Optional[str], n_buses: int) -> Tuple[WindFarm, ...]:
    if path is None:
        return ()
    df = _read_table(path, FARM_COLUMNS)
    _check_unique(df, path)
    farms = []
    for idx, row in df.sort_values("id").iterrows():
        capacity = float(row["capacity"]) if "capacity" in df.columns else math.inf
        farm = WindFarm(id=int(row["id"]), bus=int(row["bus"]), capacity=capacity)
        if not 1 <= farm.bus <= n_buses:
            raise InvalidValue(f"farm bus {farm.bus} does not exist", file=path, row=idx + 2)
        if capacity <= 0:
            raise InvalidValue("farm capacity must be > 0", file=path, row=idx + 2)
        farms.append(farm)
    return tuple(farms)


def load_system(
    bus_file: str,
    unit_file: str,
    line_file: str,
    slack_bus: Optional[int] = None,
    farm_file: Optional[str] = None
) -> PowerSystem:
    """
    Carica e valida un PowerSystem dai CSV di bus, unita', linee e parchi.

    Args:
        bus_file: buses.csv (id,load_share)
        unit_file: units.csv
        line_file: lines.csv
        slack_bus: Bus di riferimento (default: id minimo)
        farm_file: farms.csv (id,bus[,capacity])

    Returns:
        PowerSystem: Sistema con PTDF calcolata
    """
    buses = _load_buses(bus_file)
    units = _load_units(unit_file, len(buses))
    lines = _load_lines(line_file, len(buses))
    farms = _load_farms(farm_file, len(buses))

    slack = slack_bus if slack_bus is not None else min(b.id for b in buses)
    if not 1 <= slack <= len(buses):
        raise InvalidValue(f"slack bus {slack} does not exist", file=bus_file)
    if not is_connected(len(buses), lines):
        raise DisconnectedNetwork("network has more than one connected component", file=line_file)

    system = PowerSystem(
        buses=buses,
        units=units,
        farms=farms,
        lines=lines,
        slack_bus=slack,
        ptdf=compute_ptdf(buses, lines, slack),
    )
    logger.info(
        "system_loaded",
        buses=system.n_buses,
        units=system.n_units,
        farms=system.n_farms,
        lines=system.n_lines,
        slack_bus=slack
    )
    return system


def wind_penetration(wind_capacity_series, load_series) -> float:
    """
    Penetrazione eolica R = sum(P^c) / sum(P^D).

    Args:
        wind_capacity_series: Produzione eolica disponibile [..., ore]
        load_series: Carico [..., ore]

    Returns:
        float: Rapporto R
    """
    wind = np.asarray(wind_capacity_series, dtype=float)
    load = np.asarray(load_series, dtype=float)
    if wind.shape[-1] != load.shape[-1]:
        raise DimensionMismatch(f"horizons differ: {wind.shape[-1]} vs {load.shape[-1]}")
    if (wind < 0).any() or (load < 0).any():
        raise ValueError("series must be nonnegative")
    total_load = load.sum()
    if total_load == 0:
        raise ZeroDemand("total demand is zero")
    return float(wind.sum() / total_load)
