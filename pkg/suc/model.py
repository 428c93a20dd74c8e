"""
Costruzione dei modelli di unit commitment a due stadi.

Primo stadio (per unita' i e ora t): u binaria, su, sd >= 0 con
su >= SU_i (u_t - u_{t-1}) e sd >= SD_i (u_{t-1} - u_t), vincoli di
min-up/min-down e chiusura dello stato iniziale.

Secondo stadio (per scenario e ora): p, ens_b in [0, D_b], ovg_b >= 0,
wc_w in [0, W_w], bilancio di sistema e flussi PTDF entro i limiti.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DimensionMismatch
from core.states import RowSense
from forecast.scenarios import ScenarioSet
from grid.system import PowerSystem
from solver.lp import LpInstance
from solver.lshaped import RecourseLp
from solver.milp import MilpInstance
from suc.schedule import CommitmentSchedule, transitions


@dataclass(frozen=True)
class Prices:
    """Prezzi di penalita' ($/MWh)"""
    c_ens: float = 3500.0
    c_wc: float = 50.0

    def __post_init__(self):
        if self.c_ens < 0 or self.c_wc < 0:
            raise ValueError("penalty prices must be nonnegative")


class UcLayout:
    """Indici delle variabili di primo e secondo stadio"""

    def __init__(self, system: PowerSystem, horizon: int):
        self.I = system.n_units
        self.B = system.n_buses
        self.W = system.n_farms
        self.L = system.n_lines
        self.T = horizon
        self.n_first = 3 * self.I * self.T
        self.hour_block = self.I + 2 * self.B + self.W
        self.n_second = self.T * self.hour_block

    # primo stadio
    def u(self, i: int, t: int) -> int:
        return i * self.T + t

    def su(self, i: int, t: int) -> int:
        return self.I * self.T + i * self.T + t

    def sd(self, i: int, t: int) -> int:
        return 2 * self.I * self.T + i * self.T + t

    @property
    def u_slice(self) -> slice:
        return slice(0, self.I * self.T)

    # secondo stadio, relativo al blocco di scenario
    def p(self, i: int, t: int) -> int:
        return t * self.hour_block + i

    def ens(self, b: int, t: int) -> int:
        return t * self.hour_block + self.I + b

    def ovg(self, b: int, t: int) -> int:
        return t * self.hour_block + self.I + self.B + b

    def wc(self, w: int, t: int) -> int:
        return t * self.hour_block + self.I + 2 * self.B + w

    def scenario_offset(self, s: int) -> int:
        return self.n_first + s * self.n_second

    def schedule(self, x: np.ndarray) -> CommitmentSchedule:
        u = np.round(np.asarray(x)[self.u_slice]).astype(int)
        return CommitmentSchedule(u.reshape(self.I, self.T))

    def first_stage_vector(self, schedule: CommitmentSchedule, system: PowerSystem) -> np.ndarray:
        """Vettore x di primo stadio (u, su, sd) coerente con la schedule"""
        u = np.asarray(schedule.u, dtype=float)
        startups, shutdowns = transitions(system, schedule.u)
        su = np.array([unit.startup_cost for unit in system.units])[:, None] * startups
        sd = np.array([unit.shutdown_cost for unit in system.units])[:, None] * shutdowns
        return np.concatenate([u.ravel(), su.ravel(), sd.ravel()])

    def split_dispatch(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(p, ens, ovg, wc) come matrici [.. x ore] da un blocco di secondo stadio"""
        block = np.asarray(y).reshape(self.T, self.hour_block)
        p = block[:, :self.I].T
        ens = block[:, self.I:self.I + self.B].T
        ovg = block[:, self.I + self.B:self.I + 2 * self.B].T
        wc = block[:, self.I + 2 * self.B:].T
        return p, ens, ovg, wc


class _Rows:
    """Accumula righe sparse e produce la matrice densa"""

    def __init__(self, n_cols: int):
        self.n_cols = n_cols
        self.entries: List[Tuple[Sequence[int], Sequence[float]]] = []
        self.senses: List[RowSense] = []
        self.rhs: List[float] = []

    def add(self, cols: Sequence[int], vals: Sequence[float], sense: RowSense, rhs: float) -> None:
        self.entries.append((cols, vals))
        self.senses.append(sense)
        self.rhs.append(float(rhs))

    def __len__(self) -> int:
        return len(self.rhs)

    def dense(self) -> np.ndarray:
        A = np.zeros((len(self.rhs), self.n_cols))
        for r, (cols, vals) in enumerate(self.entries):
            for j, v in zip(cols, vals):
                A[r, j] += v
        return A


def _check_loads(system: PowerSystem, loads, horizon: int) -> np.ndarray:
    bus_loads = system.bus_loads(loads)
    if bus_loads.shape[1] != horizon:
        raise DimensionMismatch(f"loads cover {bus_loads.shape[1]} hours, horizon is {horizon}")
    if (bus_loads < 0).any():
        raise ValueError("loads must be nonnegative")
    return bus_loads


def _check_wind(system: PowerSystem, wind: np.ndarray, horizon: int) -> np.ndarray:
    wind = np.atleast_2d(np.asarray(wind, dtype=float))
    if wind.shape != (system.n_farms, horizon):
        raise DimensionMismatch(
            f"wind trajectory shape {wind.shape}, expected {(system.n_farms, horizon)}"
        )
    return wind


# ---------------------------------------------------------------- primo stadio

def _first_stage(system: PowerSystem, layout: UcLayout):
    """(c, righe, lo, hi, nomi) del problema di primo stadio"""
    T = layout.T
    n1 = layout.n_first
    c = np.zeros(n1)
    lo = np.zeros(n1)
    hi = np.concatenate([np.ones(layout.I * T), np.full(2 * layout.I * T, np.inf)])
    rows = _Rows(n1)
    names: List[str] = [""] * n1

    for i, unit in enumerate(system.units):
        u0 = 1.0 if unit.initially_on else 0.0
        c_min = unit.fuel_price * system.fuel[i].f_min
        SU, SD = unit.startup_cost, unit.shutdown_cost
        for t in range(T):
            u_it, su_it, sd_it = layout.u(i, t), layout.su(i, t), layout.sd(i, t)
            names[u_it] = f"u_{unit.id}_{t + 1}"
            names[su_it] = f"su_{unit.id}_{t + 1}"
            names[sd_it] = f"sd_{unit.id}_{t + 1}"
            c[u_it] = c_min
            c[su_it] = 1.0
            c[sd_it] = 1.0

            if t == 0:
                rows.add([su_it, u_it], [1.0, -SU], RowSense.GE, -SU * u0)
                rows.add([sd_it, u_it], [1.0, SD], RowSense.GE, SD * u0)
            else:
                prev = layout.u(i, t - 1)
                rows.add([su_it, u_it, prev], [1.0, -SU, SU], RowSense.GE, 0.0)
                rows.add([sd_it, u_it, prev], [1.0, SD, -SD], RowSense.GE, 0.0)

            # accensione in t => acceso fino a t + min_on - 1
            for tau in range(t + 1, min(T, t + unit.min_on)):
                if t == 0:
                    rows.add([layout.u(i, tau), u_it], [1.0, -1.0], RowSense.GE, -u0)
                else:
                    rows.add([layout.u(i, tau), u_it, layout.u(i, t - 1)], [1.0, -1.0, 1.0],
                             RowSense.GE, 0.0)
            # spegnimento in t => spento fino a t + min_off - 1
            for tau in range(t + 1, min(T, t + unit.min_off)):
                if t == 0:
                    rows.add([layout.u(i, tau), u_it], [-1.0, 1.0], RowSense.GE, u0 - 1.0)
                else:
                    rows.add([layout.u(i, tau), u_it, layout.u(i, t - 1)], [-1.0, 1.0, -1.0],
                             RowSense.GE, -1.0)

        for t in range(min(unit.forced_initial_hours(), T)):
            lo[layout.u(i, t)] = hi[layout.u(i, t)] = u0

    return c, rows, lo, hi, names


def build_master(system: PowerSystem, horizon: int) -> MilpInstance:
    """MILP di primo stadio (senza ricorso), master dell'L-shaped"""
    layout = UcLayout(system, horizon)
    c, rows, lo, hi, names = _first_stage(system, layout)
    lp = LpInstance(c, rows.dense(), rows.senses, rows.rhs, lo, hi, names)
    return MilpInstance(lp, tuple(range(layout.I * horizon)))


# ---------------------------------------------------------------- secondo stadio

class _SecondStage:
    """Struttura comune del blocco di dispatch (matrice, costi, bound)"""

    def __init__(self, system: PowerSystem, bus_loads: np.ndarray, prices: Prices, layout: UcLayout):
        self.system = system
        self.layout = layout
        self.loads = bus_loads
        T, I, B, W = layout.T, layout.I, layout.B, layout.W
        n2 = layout.n_second

        self.cost = np.zeros(n2)
        self.lo = np.zeros(n2)
        self.hi = np.full(n2, np.inf)
        self.names: List[str] = [""] * n2
        marginal = np.array([u.fuel_price * f.f_avg for u, f in zip(system.units, system.fuel)])
        p_max = np.array([u.p_max for u in system.units])

        unit_ptdf = system.unit_ptdf
        farm_ptdf = system.farm_ptdf
        limits = system.flow_limits
        rows = _Rows(n2)
        self.flow_const_bus = system.ptdf @ bus_loads  # [linee x ore]
        # indici delle righe per ricostruire il rhs
        self.balance_rows: List[int] = []
        self.flow_rows: List[Tuple[int, int, int, int]] = []  # (riga <=, riga >=, linea, ora)

        for t in range(T):
            for i, unit in enumerate(system.units):
                j = layout.p(i, t)
                self.cost[j] = marginal[i]
                self.hi[j] = p_max[i]
                self.names[j] = f"p_{unit.id}_{t + 1}"
            for b, bus in enumerate(system.buses):
                j_e, j_o = layout.ens(b, t), layout.ovg(b, t)
                self.cost[j_e] = prices.c_ens
                self.cost[j_o] = prices.c_ens
                self.hi[j_e] = bus_loads[b, t]
                self.names[j_e] = f"ens_{bus.id}_{t + 1}"
                self.names[j_o] = f"ovg_{bus.id}_{t + 1}"
            for w, farm in enumerate(system.farms):
                j = layout.wc(w, t)
                self.cost[j] = prices.c_wc
                self.names[j] = f"wc_{farm.id}_{t + 1}"

            cols = [layout.p(i, t) for i in range(I)]
            cols += [layout.ens(b, t) for b in range(B)]
            cols += [layout.ovg(b, t) for b in range(B)]
            cols += [layout.wc(w, t) for w in range(W)]
            self.balance_rows.append(len(rows))
            rows.add(cols, [1.0] * I + [1.0] * B + [-1.0] * B + [-1.0] * W, RowSense.EQ, 0.0)

            for k in range(layout.L):
                coeffs = (
                    list(unit_ptdf[k]) + list(system.ptdf[k]) + list(-system.ptdf[k])
                    + list(-farm_ptdf[k])
                )
                le = len(rows)
                rows.add(cols, coeffs, RowSense.LE, limits[k])
                rows.add(cols, coeffs, RowSense.GE, -limits[k])
                self.flow_rows.append((le, le + 1, k, t))

        self.A = rows.dense()
        self.senses = tuple(rows.senses)

    def rhs(self, wind: np.ndarray) -> np.ndarray:
        """rhs per una traiettoria eolica [farm x ore]"""
        b = np.zeros(len(self.senses))
        total_load = self.loads.sum(axis=0)
        total_wind = wind.sum(axis=0)
        wind_flow = self.system.farm_ptdf @ wind  # [linee x ore]
        limits = self.system.flow_limits
        for t, r in enumerate(self.balance_rows):
            b[r] = total_load[t] - total_wind[t]
        for le, ge, k, t in self.flow_rows:
            const = wind_flow[k, t] - self.flow_const_bus[k, t]
            b[le] = limits[k] - const
            b[ge] = -limits[k] - const
        return b

    def upper_bounds(self, wind: np.ndarray) -> np.ndarray:
        hi = self.hi.copy()
        for t in range(self.layout.T):
            for w in range(self.layout.W):
                hi[self.layout.wc(w, t)] = wind[w, t]
        return hi


class UcRecourse:
    """
    Costruttore del ricorso (x, scenario) -> RecourseLp.

    I bound di p valgono [p_min u, p_max u]; le mappe T_lo e T_hi portano
    p_min e p_max sulle colonne u corrispondenti.
    """

    def __init__(self, system: PowerSystem, loads, prices: Prices, horizon: int):
        self.layout = UcLayout(system, horizon)
        self.stage = _SecondStage(system, _check_loads(system, loads, horizon), prices, self.layout)
        n1, n2 = self.layout.n_first, self.layout.n_second
        self.T_lo = np.zeros((n2, n1))
        self.T_hi = np.zeros((n2, n1))
        for i, unit in enumerate(system.units):
            for t in range(horizon):
                self.T_lo[self.layout.p(i, t), self.layout.u(i, t)] = unit.p_min
                self.T_hi[self.layout.p(i, t), self.layout.u(i, t)] = unit.p_max
        self.p_cols = np.array([self.layout.p(i, t) for i in range(self.layout.I)
                                for t in range(horizon)], dtype=int)

    def __call__(self, x: np.ndarray, scenario: np.ndarray) -> RecourseLp:
        wind = _check_wind(self.stage.system, scenario, self.layout.T)
        lo = self.stage.lo + self.T_lo @ x
        hi = self.stage.upper_bounds(wind)
        hi[self.p_cols] = 0.0
        hi = hi + self.T_hi @ x
        lp = LpInstance(self.stage.cost, self.stage.A, self.stage.senses, self.stage.rhs(wind),
                        lo, hi, self.stage.names)
        return RecourseLp(lp=lp, T_lo=self.T_lo, T_hi=self.T_hi)

    def for_schedule(self, schedule: CommitmentSchedule, wind: np.ndarray) -> RecourseLp:
        x = self.layout.first_stage_vector(schedule, self.stage.system)
        return self(x, wind)


# ---------------------------------------------------------------- forma estesa

def build_extensive_form(
    system: PowerSystem,
    loads,
    scenarios: ScenarioSet,
    prices: Prices,
    horizon: Optional[int] = None
) -> MilpInstance:
    """
    Forma estesa SAA: primo stadio + (1/S) sum_s secondo stadio.

    Args:
        system: Sistema elettrico
        loads: Carico di sistema [ore] o per bus [bus x ore]
        scenarios: Traiettorie eoliche
        prices: Prezzi ENS e curtailment
        horizon: Ore (default: quelle degli scenari)

    Returns:
        MilpInstance: MILP con le u binarie
    """
    T = scenarios.horizon if horizon is None else horizon
    if scenarios.horizon != T:
        raise DimensionMismatch(f"scenarios cover {scenarios.horizon} hours, horizon is {T}")
    if scenarios.n_farms != system.n_farms:
        raise DimensionMismatch(
            f"scenarios have {scenarios.n_farms} farms, system has {system.n_farms}"
        )
    layout = UcLayout(system, T)
    bus_loads = _check_loads(system, loads, T)
    stage = _SecondStage(system, bus_loads, prices, layout)
    S = len(scenarios)

    c1, first_rows, lo1, hi1, names1 = _first_stage(system, layout)
    A1 = first_rows.dense()
    n1, n2 = layout.n_first, layout.n_second
    n = n1 + S * n2
    m2 = stage.A.shape[0]
    n_gate = 2 * layout.I * T
    m = A1.shape[0] + S * (m2 + n_gate)

    A = np.zeros((m, n))
    A[:A1.shape[0], :n1] = A1
    b = np.zeros(m)
    b[:A1.shape[0]] = first_rows.rhs
    senses: List[RowSense] = list(first_rows.senses)
    c = np.concatenate([c1, np.zeros(S * n2)])
    lo = np.concatenate([lo1, np.zeros(S * n2)])
    hi = np.concatenate([hi1, np.zeros(S * n2)])
    names = list(names1)

    row = A1.shape[0]
    for s in range(S):
        wind = _check_wind(system, scenarios[s], T)
        off = layout.scenario_offset(s)
        block = slice(off, off + n2)
        A[row:row + m2, block] = stage.A
        b[row:row + m2] = stage.rhs(wind)
        senses.extend(stage.senses)
        row += m2

        c[block] = stage.cost / S
        lo[block] = stage.lo
        hi[block] = stage.upper_bounds(wind)
        names.extend(f"{name}_s{s + 1}" for name in stage.names)

        # p <= p_max u, p >= p_min u
        for i, unit in enumerate(system.units):
            for t in range(T):
                jp, ju = off + layout.p(i, t), layout.u(i, t)
                A[row, jp], A[row, ju] = 1.0, -unit.p_max
                senses.append(RowSense.LE)
                row += 1
                A[row, jp], A[row, ju] = 1.0, -unit.p_min
                senses.append(RowSense.GE)
                row += 1

    lp = LpInstance(c, A, senses, b, lo, hi, names)
    return MilpInstance(lp, tuple(range(layout.I * T)))


def build_deterministic_uc(
    system: PowerSystem,
    loads,
    point_forecast,
    prices: Prices,
    horizon: Optional[int] = None
) -> MilpInstance:
    """UC deterministica: forma estesa con l'unico scenario della previsione puntuale"""
    scenarios = ScenarioSet.single(point_forecast, source={"variant": "point"})
    return build_extensive_form(system, loads, scenarios, prices, horizon)
