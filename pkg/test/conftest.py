import asyncio
import math
from pathlib import Path

import numpy as np
import pytest

from grid.system import load_system
from suc.model import Prices
from utils.logging_config import setup_logging

ROOT = Path(__file__).resolve().parent.parent
SIX_BUS = ROOT / "data" / "six_bus"


@pytest.fixture(scope="session")
def event_loop():
    """Crea event loop per tutta la sessione di test"""
    loop = asyncio.get_event_loop_policy().new_event_loop()
    yield loop
    loop.close()


@pytest.fixture(scope="session", autouse=True)
def setup_test_logging():
    """Configura logging per i test"""
    setup_logging(log_level="WARNING")


@pytest.fixture(scope="session")
def six_bus():
    """Sistema a sei bus delle tabelle di riferimento"""
    return load_system(
        str(SIX_BUS / "buses.csv"),
        str(SIX_BUS / "units.csv"),
        str(SIX_BUS / "lines.csv"),
        farm_file=str(SIX_BUS / "farms.csv"),
    )


@pytest.fixture
def six_bus_loads():
    """Carico di sistema (MW) per 4 ore"""
    return np.array([150.0, 170.0, 200.0, 180.0])


@pytest.fixture
def prices():
    return Prices(c_ens=3500.0, c_wc=50.0)


@pytest.fixture
def write_csv(tmp_path):
    """Scrive un CSV temporaneo e ne restituisce il percorso"""
    def _write(name: str, text: str) -> str:
        path = tmp_path / name
        path.write_text(text.strip() + "\n", encoding="utf-8")
        return str(path)
    return _write


def tableau_simplex(c, A, b):
    """
    Oracolo: simplesso a tableau denso con regola di Bland.

    Risolve min c'x s.t. A x <= b, x >= 0 con b >= 0 (base di slack
    ammissibile). Restituisce l'ottimo oppure -inf se illimitato.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = A
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :n] = c
    basis = list(range(n, n + m))
    for _ in range(10000):
        entering = next((j for j in range(n + m) if tab[m, j] < -1e-12), None)
        if entering is None:
            return -tab[m, -1]
        ratios = [
            (tab[i, -1] / tab[i, entering], basis[i], i)
            for i in range(m) if tab[i, entering] > 1e-12
        ]
        if not ratios:
            return -math.inf
        _, _, row = min(ratios)
        tab[row] /= tab[row, entering]
        for i in range(m + 1):
            if i != row:
                tab[i] -= tab[i, entering] * tab[row]
        basis[row] = entering
    raise RuntimeError("oracle did not terminate")
