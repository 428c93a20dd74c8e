from dataclasses import replace

import numpy as np
import pytest

from core.errors import (
    DimensionMismatch, DisconnectedNetwork, DuplicateId, InvalidValue, MissingColumn, ZeroDemand
)
from grid.fuel import linearize_fuel, quadratic_fuel
from grid.ptdf import compute_ptdf, dc_flows
from grid.system import Bus, TransmissionLine, load_system, wind_penetration

BUSES = """
id,load_share
1,0.5
2,0.5
"""
UNITS = """
id,bus,p_min,p_max,min_on,min_off,init_state,fuel_a,fuel_b,fuel_c,startup_fuel,shutdown_fuel,fuel_price
1,1,10,100,2,-2,3,100,10,0.001,50,10,1.2
"""
LINES = """
id,from_bus,to_bus,reactance,flow_limit
1,1,2,0.1,100
"""


def test_six_bus_loaded(six_bus):
    """Test caricamento del sistema a sei bus"""
    assert six_bus.n_buses == 6
    assert six_bus.n_units == 3
    assert six_bus.n_lines == 7
    assert six_bus.n_farms == 1
    assert six_bus.slack_bus == 1
    # Min Off negativo nei dati: si usa la durata assoluta
    assert six_bus.units[0].min_off == 4
    assert six_bus.farm_capacity.tolist() == [150.0]


def test_ptdf_matches_direct_dc_solve(six_bus):
    """Test PTDF contro la soluzione diretta Bbus theta = P"""
    rng = np.random.default_rng(7)
    for _ in range(20):
        injection = rng.normal(0.0, 50.0, six_bus.n_buses)
        direct = dc_flows(six_bus.buses, six_bus.lines, six_bus.slack_bus, injection)
        np.testing.assert_allclose(six_bus.ptdf @ injection, direct, atol=1e-9)


def test_ptdf_slack_column_is_zero(six_bus):
    """Test colonna dello slack nulla"""
    assert np.all(six_bus.ptdf[:, six_bus.slack_bus - 1] == 0.0)


def test_ptdf_two_bus_is_unit():
    """Test rete a due bus: tutta l'iniezione passa sulla linea"""
    buses = (Bus(1, 0.5), Bus(2, 0.5))
    lines = (TransmissionLine(1, 1, 2, 0.1, 100.0),)
    ptdf = compute_ptdf(buses, lines, slack_bus=1)
    np.testing.assert_allclose(ptdf, [[0.0, -1.0]])


def _random_network(rng, n_buses):
    """Albero casuale piu' qualche linea extra, reattanze casuali"""
    buses = tuple(Bus(k, 1.0 / n_buses) for k in range(1, n_buses + 1))
    edges = [(int(rng.integers(1, k)), k) for k in range(2, n_buses + 1)]
    for _ in range(int(rng.integers(0, n_buses))):
        a, b = rng.choice(np.arange(1, n_buses + 1), size=2, replace=False)
        edges.append((int(a), int(b)))
    lines = tuple(
        TransmissionLine(k, a, b, float(rng.uniform(0.05, 0.5)), 100.0)
        for k, (a, b) in enumerate(edges, start=1)
    )
    return buses, lines


def test_ptdf_random_networks_match_dc_solve():
    """Test PTDF contro la soluzione diretta su reti casuali fino a 12 bus"""
    rng = np.random.default_rng(40)
    for _ in range(30):
        n = int(rng.integers(2, 13))
        buses, lines = _random_network(rng, n)
        slack = int(rng.integers(1, n + 1))
        ptdf = compute_ptdf(buses, lines, slack)
        assert ptdf.shape == (len(lines), n)
        assert np.all(ptdf[:, slack - 1] == 0.0)
        for _ in range(3):
            injection = rng.normal(0.0, 40.0, n)
            np.testing.assert_allclose(ptdf @ injection, dc_flows(buses, lines, slack, injection), atol=1e-9)


def test_ptdf_superposition():
    """Test linearita': ptdf(a p + b q) = a ptdf(p) + b ptdf(q)"""
    rng = np.random.default_rng(41)
    buses, lines = _random_network(rng, 9)
    ptdf = compute_ptdf(buses, lines, 1)
    p, q = rng.normal(size=9), rng.normal(size=9)
    alpha, beta = 2.5, -0.75
    np.testing.assert_allclose(ptdf @ (alpha * p + beta * q), alpha * (ptdf @ p) + beta * (ptdf @ q), atol=1e-9)


def test_ptdf_triangle():
    """Test triangolo a reattanze uguali: 2/3 sul lato diretto, 1/3 sul percorso lungo"""
    buses = (Bus(1, 0.4), Bus(2, 0.3), Bus(3, 0.3))
    lines = (
        TransmissionLine(1, 1, 2, 0.1, 100.0),
        TransmissionLine(2, 1, 3, 0.1, 100.0),
        TransmissionLine(3, 2, 3, 0.1, 100.0),
    )
    ptdf = compute_ptdf(buses, lines, slack_bus=1)
    # 1 MW iniettato al bus 2 e prelevato allo slack
    np.testing.assert_allclose(np.abs(ptdf[:, 1]), [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], atol=1e-12)
    np.testing.assert_allclose(ptdf[:, 1], [-2.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0], atol=1e-12)


def test_ptdf_single_bus_without_lines():
    """Test un solo bus senza linee: matrice 0 x 1"""
    ptdf = compute_ptdf((Bus(1, 1.0),), (), slack_bus=1)
    assert ptdf.shape == (0, 1)


def test_fuel_linearization_g3(six_bus):
    """Test corda della curva di G3 (f_avg = 17.8, f_min = 135.9)"""
    lin = six_bus.fuel[2]
    assert lin.f_avg == pytest.approx(17.8)
    assert lin.f_min == pytest.approx(135.9)


def test_fuel_chord_matches_endpoints(six_bus):
    """Test la retta coincide con la quadratica agli estremi"""
    for unit in six_bus.units:
        lin = linearize_fuel(unit)
        assert lin.fuel(unit.p_min) == pytest.approx(quadratic_fuel(unit, unit.p_min))
        assert lin.fuel(unit.p_max) == pytest.approx(quadratic_fuel(unit, unit.p_max))


def test_fuel_chord_never_underestimates(six_bus):
    """Test la corda sta sopra la quadratica convessa su [p_min, p_max]"""
    for unit in six_bus.units:
        lin = linearize_fuel(unit)
        for p in np.linspace(unit.p_min, unit.p_max, 201):
            assert lin.fuel(p) >= quadratic_fuel(unit, p) - 1e-9


def test_fuel_degenerate_range(six_bus):
    """Test p_min = p_max: tangente nel punto, valore esatto"""
    unit = replace(six_bus.units[0], p_min=150.0, p_max=150.0)
    lin = linearize_fuel(unit)
    assert lin.f_avg == pytest.approx(unit.fuel_b + 2.0 * unit.fuel_c * 150.0)
    assert lin.fuel(150.0) == pytest.approx(quadratic_fuel(unit, 150.0))


def test_bus_loads_split_by_share(six_bus):
    """Test ripartizione del carico con le load share"""
    loads = six_bus.bus_loads(np.array([100.0, 200.0]))
    assert loads.shape == (6, 2)
    np.testing.assert_allclose(loads[:, 0], [0, 0, 20, 40, 40, 0])
    np.testing.assert_allclose(loads.sum(axis=0), [100.0, 200.0])


def test_forced_initial_hours(six_bus):
    """Test ore forzate dagli stati iniziali"""
    assert [u.forced_initial_hours() for u in six_bus.units] == [0, 0, 0]
    u = np.array([[1, 1, 1], [0, 0, 1], [1, 0, 0]])
    updated = six_bus.with_initial_states(u)
    # G1 sempre acceso: la striscia si somma allo stato iniziale
    assert updated.units[0].init_state == 7
    assert updated.units[1].init_state == 1
    assert updated.units[2].init_state == -2
    assert updated.units[1].forced_initial_hours() == 1
    assert updated.units[2].forced_initial_hours() == 0


def test_missing_column(write_csv):
    """Test colonna mancante"""
    bus_file = write_csv("buses.csv", "id\n1\n2")
    with pytest.raises(MissingColumn):
        load_system(bus_file, write_csv("units.csv", UNITS), write_csv("lines.csv", LINES))


def test_duplicate_id(write_csv):
    """Test id duplicato"""
    bus_file = write_csv("buses.csv", "id,load_share\n1,0.5\n1,0.5")
    with pytest.raises(DuplicateId) as exc:
        load_system(bus_file, write_csv("units.csv", UNITS), write_csv("lines.csv", LINES))
    assert exc.value.row == 3


def test_invalid_p_bounds(write_csv):
    """Test p_min > p_max"""
    units = UNITS.replace("1,1,10,100", "1,1,120,100")
    with pytest.raises(InvalidValue) as exc:
        load_system(write_csv("buses.csv", BUSES), write_csv("units.csv", units), write_csv("lines.csv", LINES))
    assert exc.value.row == 2


def test_disconnected_network(write_csv):
    """Test rete non connessa"""
    buses = "id,load_share\n1,0.5\n2,0.25\n3,0.25"
    with pytest.raises(DisconnectedNetwork):
        load_system(write_csv("buses.csv", buses), write_csv("units.csv", UNITS), write_csv("lines.csv", LINES))


def test_validation_errors_are_value_errors(write_csv):
    """Test gli errori di validazione sono anche ValueError"""
    bus_file = write_csv("buses.csv", "id,load_share\n1,0.7\n2,0.7")
    with pytest.raises(ValueError):
        load_system(bus_file, write_csv("units.csv", UNITS), write_csv("lines.csv", LINES))


def test_wind_penetration():
    """Test rapporto tra energia eolica e domanda"""
    assert wind_penetration([[50.0, 50.0]], [100.0, 100.0]) == pytest.approx(0.5)
    with pytest.raises(ZeroDemand):
        wind_penetration([[1.0]], [0.0])
    with pytest.raises(DimensionMismatch):
        wind_penetration([[1.0, 2.0]], [1.0])
