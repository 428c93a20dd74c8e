import numpy as np
import pytest

from core.errors import IterationLimitReached, SubproblemInfeasible
from core.states import RowSense
from solver.lp import LpInstance, solve_lp
from solver.lshaped import RecourseLp, benders_cut, solve_recourse, solve_two_stage_lshaped
from solver.milp import MilpInstance

# primo stadio: x = [b (capacita' fissa 8, binaria, costo 5), q (acquisto, costo 1, in [0, 10])]
FIRST_STAGE_COST = np.array([5.0, 1.0])
SHORTAGE_PRICE = 4.0


def _master():
    lp = LpInstance(FIRST_STAGE_COST, np.zeros((0, 2)), [], [], [0.0, 0.0], [1.0, 10.0])
    return MilpInstance(lp, (0,))


def _recourse(x, demand):
    """Q(x, d) = 4 max(0, d - q - 8 b): riga y >= d - q - 8 b"""
    lp = LpInstance([SHORTAGE_PRICE], [[1.0]], [RowSense.GE], [demand - x[1] - 8.0 * x[0]], [0.0], [np.inf])
    return RecourseLp(lp=lp, T_b=np.array([[-8.0, -1.0]]))


def _expected_cost(x, demands):
    shortage = np.maximum(0.0, np.asarray(demands) - x[1] - 8.0 * x[0])
    return float(FIRST_STAGE_COST @ x + SHORTAGE_PRICE * shortage.mean())


def _oracle(demands):
    """Ottimo per enumerazione: il costo e' convesso e lineare a tratti in q"""
    best = np.inf
    for b in (0.0, 1.0):
        breakpoints = [0.0, 10.0] + [float(np.clip(d - 8.0 * b, 0.0, 10.0)) for d in demands]
        best = min(best, min(_expected_cost(np.array([b, q]), demands) for q in breakpoints))
    return best


@pytest.mark.parametrize("multicut", [False, True])
def test_lshaped_matches_enumeration(multicut):
    """Test L-shaped contro l'ottimo enumerato"""
    rng = np.random.default_rng(8)
    demands = list(rng.uniform(0.0, 16.0, 12))
    result = solve_two_stage_lshaped(_master(), _recourse, demands, tol=1e-9, multicut=multicut,
                                     debug_cuts=True)
    assert result.objective == pytest.approx(_oracle(demands), rel=1e-7)
    assert result.lower_bound <= result.upper_bound + 1e-9
    assert result.objective == pytest.approx(_expected_cost(result.x, demands), rel=1e-9)


def test_benders_cut_supports_recourse():
    """Test il taglio e' esatto nel punto e sottostima altrove"""
    x_hat = np.array([0.0, 2.0])
    recourse = _recourse(x_hat, 7.0)
    cut = benders_cut(recourse, solve_lp(recourse.lp), x_hat)
    assert cut.value(x_hat) == pytest.approx(20.0)
    for x in ([1.0, 0.0], [0.0, 10.0], [0.0, 5.0]):
        x = np.array(x)
        assert cut.value(x) <= SHORTAGE_PRICE * max(0.0, 7.0 - x[1] - 8.0 * x[0]) + 1e-9


def test_iteration_limit():
    """Test limite di iterazioni con incumbent e bound nell'eccezione"""
    with pytest.raises(IterationLimitReached) as exc:
        solve_two_stage_lshaped(_master(), _recourse, [12.0, 14.0], max_iter=1)
    assert exc.value.lower_bound <= exc.value.upper_bound
    assert exc.value.incumbent is not None


def test_infeasible_recourse():
    """Test ricorso non completo"""
    lp = LpInstance([1.0], [[1.0]], ["<="], [-1.0], [0.0], [np.inf])
    with pytest.raises(SubproblemInfeasible):
        solve_recourse(RecourseLp(lp=lp), 0)


def test_lp_dump_dir(tmp_path):
    """Test dump di master e ricorsi"""
    solve_two_stage_lshaped(_master(), _recourse, [3.0, 5.0], dump_dir=str(tmp_path))
    assert (tmp_path / "master_001.lp").exists()
    assert (tmp_path / "recourse_000.lp").exists()
    assert (tmp_path / "recourse_001.lp").exists()


@pytest.mark.parametrize("multicut", [False, True])
def test_bounds_are_monotone(multicut):
    """Test LB non decrescente e UB non crescente a ogni iterazione"""
    rng = np.random.default_rng(21)
    demands = list(rng.uniform(0.0, 20.0, 15))
    result = solve_two_stage_lshaped(_master(), _recourse, demands, tol=1e-9, multicut=multicut)
    assert len(result.bounds) == result.iterations
    for (lb_prev, ub_prev), (lb, ub) in zip(result.bounds, result.bounds[1:]):
        assert lb >= lb_prev
        assert ub <= ub_prev
    assert result.bounds[-1] == (result.lower_bound, result.upper_bound)
