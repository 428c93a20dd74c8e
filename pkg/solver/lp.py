"""
Simplesso rivisto a variabili limitate.

Il problema min c'x s.t. A x (<=,=,>=) b, lo <= x <= hi viene portato in
forma A x + s = b con slack limitate (s >= 0 per <=, s <= 0 per >=). La
fase I parte da una base di slack dove possibile e da variabili
artificiali altrove; alla fine della fase I le artificiali vengono fissate
a zero e la fase II riprende dalla stessa base.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from core.errors import DimensionMismatch, NumericalFailure
from core.states import LpStatus, RowSense
from utils.logging_config import get_logger

logger = get_logger(__name__)

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50

# stato delle variabili non di base
_AT_LO, _AT_HI, _FREE, _BASIC = 0, 1, 2, 3


def _sense(value: Union[str, RowSense]) -> RowSense:
    return value if isinstance(value, RowSense) else RowSense(value)


@dataclass(frozen=True, eq=False)
class LpInstance:
    """min c'x s.t. A x (senses) b, lo <= x <= hi"""
    c: np.ndarray
    A: np.ndarray
    senses: Sequence[RowSense]
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        n = c.shape[0]
        A = np.asarray(self.A, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        senses = tuple(_sense(s) for s in self.senses)
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)

        if A.ndim != 2 or A.shape[1] != n:
            raise DimensionMismatch(f"A has shape {A.shape}, expected (m, {n})")
        if b.shape[0] != A.shape[0] or len(senses) != A.shape[0]:
            raise DimensionMismatch("rows of A, b and senses differ")
        if lo.shape[0] != n or hi.shape[0] != n:
            raise DimensionMismatch("bounds do not match the number of variables")
        if self.names is not None and len(self.names) != n:
            raise DimensionMismatch("names do not match the number of variables")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("objective, matrix and rhs must be finite")
        if np.any(lo > hi) or np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise ValueError("every variable needs lo <= hi")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("infinite bound on the wrong side")

        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n_vars(self) -> int:
        return self.c.shape[0]

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def with_bounds(self, lo: np.ndarray, hi: np.ndarray) -> "LpInstance":
        return LpInstance(self.c, self.A, self.senses, self.b, lo, hi, self.names)

    def with_rows(self, A_extra: np.ndarray, senses: Sequence, b_extra: np.ndarray) -> "LpInstance":
        """Nuova istanza con righe aggiuntive in coda"""
        A_extra = np.asarray(A_extra, dtype=float).reshape(-1, self.n_vars)
        return LpInstance(
            self.c,
            np.vstack([self.A, A_extra]),
            tuple(self.senses) + tuple(senses),
            np.concatenate([self.b, np.asarray(b_extra, dtype=float).reshape(-1)]),
            self.lo,
            self.hi,
            self.names,
        )

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def max_violation(self, x: np.ndarray) -> float:
        """Massima violazione di righe e bound in x"""
        act = self.row_activity(x)
        viol = [0.0]
        for sense in (RowSense.LE, RowSense.GE, RowSense.EQ):
            mask = np.array([s == sense for s in self.senses], dtype=bool)
            if not mask.any():
                continue
            diff = act[mask] - self.b[mask]
            if sense == RowSense.LE:
                viol.append(float(np.max(diff)))
            elif sense == RowSense.GE:
                viol.append(float(np.max(-diff)))
            else:
                viol.append(float(np.max(np.abs(diff))))
        viol.append(float(np.max(self.lo - x, initial=0.0)))
        viol.append(float(np.max(x - self.hi, initial=0.0)))
        return max(viol)


@dataclass(frozen=True, eq=False)
class LpSolution:
    """
    Soluzione LP.

    duals[i] = d obj / d b_i; reduced_costs d = c - A'y. Sul bound inferiore
    agisce lambda = max(d, 0), su quello superiore mu = max(-d, 0).
    """
    status: LpStatus
    x: Optional[np.ndarray] = None
    duals: Optional[np.ndarray] = None
    reduced_costs: Optional[np.ndarray] = None
    objective: float = float("nan")
    iterations: int = 0
    dual_objective: float = float("nan")
    lower_multipliers: Optional[np.ndarray] = field(default=None)
    upper_multipliers: Optional[np.ndarray] = field(default=None)

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL


class _RevisedSimplex:
    """Stato di una singola risoluzione (non condiviso tra chiamate)"""

    def __init__(self, instance: LpInstance, max_pivots: Optional[int], bland_after: Optional[int]):
        self.inst = instance
        m, n = instance.n_rows, instance.n_vars
        self.m, self.n = m, n

        slack_cols, slack_lo, slack_hi, self.slack_of_row = [], [], [], {}
        for i, sense in enumerate(instance.senses):
            if sense == RowSense.EQ:
                continue
            self.slack_of_row[i] = n + len(slack_cols)
            slack_cols.append(i)
            slack_lo.append(0.0 if sense == RowSense.LE else -np.inf)
            slack_hi.append(np.inf if sense == RowSense.LE else 0.0)
        self.n_slack = len(slack_cols)

        S = np.zeros((m, self.n_slack))
        S[slack_cols, np.arange(self.n_slack)] = 1.0

        self.M = np.hstack([instance.A, S, np.zeros((m, m))])
        self.lo = np.concatenate([instance.lo, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([instance.hi, slack_hi, np.full(m, np.inf)])
        self.art0 = n + self.n_slack
        self.N = self.art0 + m

        size = m + self.N
        self.max_pivots = max_pivots if max_pivots is not None else 50 * size + 5000
        self.bland_after = bland_after if bland_after is not None else 10 * size + 1000
        self.pivots = 0
        self.since_refactor = 0

    # ------------------------------------------------------------ setup

    def _initial_point(self) -> None:
        x = np.zeros(self.N)
        state = np.full(self.N, _AT_LO, dtype=np.int8)
        for j in range(self.art0):
            lo, hi = self.lo[j], self.hi[j]
            if np.isfinite(lo):
                x[j], state[j] = lo, _AT_LO
            elif np.isfinite(hi):
                x[j], state[j] = hi, _AT_HI
            else:
                x[j], state[j] = 0.0, _FREE

        basis = np.empty(self.m, dtype=int)
        residual = self.inst.b - self.M[:, :self.art0] @ x[:self.art0]
        for i in range(self.m):
            j = self.slack_of_row.get(i)
            if j is not None:
                # la slack e' ancora a zero: puo' assorbire il residuo se ha il segno giusto
                if self.lo[j] - FEAS_TOL <= residual[i] <= self.hi[j] + FEAS_TOL:
                    basis[i] = j
                    x[j] = residual[i]
                    state[j] = _BASIC
                    continue
            a = self.art0 + i
            self.M[i, a] = 1.0 if residual[i] >= 0 else -1.0
            basis[i] = a
            x[a] = abs(residual[i])
            state[a] = _BASIC

        # artificiali non usate restano fisse a zero
        for i in range(self.m):
            a = self.art0 + i
            if state[a] != _BASIC:
                self.hi[a] = 0.0
                self.M[i, a] = 1.0

        self.x, self.state, self.basis = x, state, basis
        self._refactor()

    def _refactor(self) -> None:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as e:
            raise NumericalFailure(f"singular basis: {e}", self.pivots) from e
        self.since_refactor = 0
        self._recompute_basics()

    def _recompute_basics(self) -> None:
        nonbasic = self.state != _BASIC
        rhs = self.inst.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    # ------------------------------------------------------------ core

    def _run(self, cost: np.ndarray) -> LpStatus:
        while True:
            if self.pivots >= self.max_pivots:
                raise NumericalFailure("simplex pivot limit reached", self.pivots)
            bland = self.pivots >= self.bland_after

            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M

            # candidati entranti
            movable = (self.hi - self.lo) > FEAS_TOL
            at_lo = (self.state == _AT_LO) & movable & (d < -OPT_TOL)
            at_hi = (self.state == _AT_HI) & movable & (d > OPT_TOL)
            free = (self.state == _FREE) & (np.abs(d) > OPT_TOL)
            eligible = at_lo | at_hi | free
            if not eligible.any():
                return LpStatus.OPTIMAL

            candidates = np.flatnonzero(eligible)
            if bland:
                j = int(candidates[0])
            else:
                j = int(candidates[np.argmax(np.abs(d[candidates]))])
            direction = 1.0 if d[j] < 0 else -1.0

            w = self.Binv @ self.M[:, j]
            step, leave_row, leave_to_hi = self._ratio_test(w, direction, bland)
            span = self.hi[j] - self.lo[j]

            if step == np.inf and span == np.inf:
                return LpStatus.UNBOUNDED

            if span <= step:
                # bound flip, la base non cambia
                self.x[j] = self.hi[j] if direction > 0 else self.lo[j]
                self.state[j] = _AT_HI if direction > 0 else _AT_LO
                self.pivots += 1
                self._recompute_basics()
                continue

            self._pivot(j, w, leave_row, leave_to_hi, direction * step)

    def _ratio_test(self, w: np.ndarray, direction: float, bland: bool):
        xb = self.x[self.basis]
        lob = self.lo[self.basis]
        hib = self.hi[self.basis]
        delta = direction * w  # x_B cambia di -t * delta

        ratios = np.full(self.m, np.inf)
        to_hi = np.zeros(self.m, dtype=bool)
        dec = delta > PIVOT_TOL
        inc = delta < -PIVOT_TOL
        with np.errstate(invalid="ignore", divide="ignore"):
            ratios[dec] = np.maximum(xb[dec] - lob[dec], 0.0) / delta[dec]
            ratios[inc] = np.maximum(hib[inc] - xb[inc], 0.0) / -delta[inc]
        to_hi[inc] = True

        step = float(np.min(ratios)) if self.m else np.inf
        if not np.isfinite(step):
            return np.inf, -1, False
        ties = np.flatnonzero(ratios <= step + FEAS_TOL)
        if bland:
            r = int(ties[np.argmin(self.basis[ties])])
        else:
            r = int(ties[np.argmax(np.abs(delta[ties]))])
        return step, r, bool(to_hi[r])

    def _pivot(self, j: int, w: np.ndarray, r: int, leave_to_hi: bool, t: float) -> None:
        leaving = self.basis[r]
        self.x[self.basis] -= t * w
        self.x[j] += t
        self.x[leaving] = self.hi[leaving] if leave_to_hi else self.lo[leaving]
        self.state[leaving] = _AT_HI if leave_to_hi else _AT_LO
        if leaving >= self.art0:
            # un'artificiale uscita dalla base non rientra piu'
            self.hi[leaving] = 0.0
            self.x[leaving] = 0.0

        self.basis[r] = j
        self.state[j] = _BASIC
        self.pivots += 1
        self.since_refactor += 1

        if self.since_refactor >= REFACTOR_EVERY:
            self._refactor()
            return

        pivot = w[r]
        row = self.Binv[r] / pivot
        self.Binv -= np.outer(w, row)
        self.Binv[r] = row
        self._recompute_basics()

    # ------------------------------------------------------------ phases

    def solve(self) -> LpSolution:
        self._initial_point()
        inst = self.inst

        art = slice(self.art0, self.N)
        if np.any(self.x[art] > FEAS_TOL):
            phase1 = np.zeros(self.N)
            phase1[art] = 1.0
            self._run(phase1)
            infeasibility = float(self.x[art].sum())
            if infeasibility > 1e-7 * max(1.0, float(np.max(np.abs(inst.b), initial=0.0))):
                logger.debug("lp_infeasible", infeasibility=infeasibility, pivots=self.pivots)
                return LpSolution(status=LpStatus.INFEASIBLE, iterations=self.pivots)
        self.hi[art] = 0.0

        cost = np.concatenate([inst.c, np.zeros(self.N - self.n)])
        status = self._run(cost)
        if status == LpStatus.UNBOUNDED:
            logger.debug("lp_unbounded", pivots=self.pivots)
            return LpSolution(status=LpStatus.UNBOUNDED, iterations=self.pivots)

        self._refactor()
        y = cost[self.basis] @ self.Binv
        x = np.clip(self.x[:self.n], inst.lo, inst.hi)
        d = inst.c - y @ inst.A

        lam = np.where(np.isfinite(inst.lo), np.maximum(d, 0.0), 0.0)
        mu = np.where(np.isfinite(inst.hi), np.maximum(-d, 0.0), 0.0)
        objective = float(inst.c @ x)
        dual_obj = float(
            inst.b @ y
            + np.sum(lam * np.where(np.isfinite(inst.lo), inst.lo, 0.0))
            - np.sum(mu * np.where(np.isfinite(inst.hi), inst.hi, 0.0))
        )
        return LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            duals=y,
            reduced_costs=d,
            objective=objective,
            iterations=self.pivots,
            dual_objective=dual_obj,
            lower_multipliers=lam,
            upper_multipliers=mu,
        )


def solve_lp(
    instance: LpInstance,
    max_pivots: Optional[int] = None,
    bland_after: Optional[int] = None
) -> LpSolution:
    """
    Risolve un LP con il simplesso rivisto.

    Args:
        instance: Problema di minimo
        max_pivots: Pivot massimi prima di NumericalFailure
        bland_after: Pivot dopo i quali si passa alla regola di Bland

    Returns:
        LpSolution: Stato, primale, duali e costi ridotti
    """
    solution = _RevisedSimplex(instance, max_pivots, bland_after).solve()
    logger.debug(
        "lp_solved",
        status=solution.status.value,
        rows=instance.n_rows,
        vars=instance.n_vars,
        pivots=solution.iterations,
        objective=solution.objective
    )
    return solution
