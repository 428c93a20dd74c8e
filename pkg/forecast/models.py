"""
Modelli di previsione della produzione eolica.

Tutte le traiettorie sono matrici [farm x ore]. I modelli sono immutabili
dopo il fit e il campionamento e' una funzione pura del generatore passato.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import DimensionMismatch, InsufficientHistory
from core.states import ForecastVariant

ArrayLike = Union[float, Sequence[float], np.ndarray]


def _as_capacity(capacity: Optional[ArrayLike], n_farms: int) -> np.ndarray:
    if capacity is None:
        return np.full(n_farms, np.inf)
    cap = np.broadcast_to(np.asarray(capacity, dtype=float), (n_farms,)).copy()
    if (cap <= 0).any():
        raise ValueError("farm capacity must be positive")
    return cap


def _as_matrix(values: ArrayLike) -> np.ndarray:
    """Porta un profilo a forma [farm x ore] (1-D = singolo parco)"""
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


@dataclass(frozen=True, eq=False)
class WindHistory:
    """
    Osservazioni storiche di produzione eolica.

    observations ha l'asse 0 temporale: giorni ([giorni x farm x ore]) per il
    caso day-ahead, ore ([ore x farm]) per il caso intra-day.
    """
    observations: np.ndarray
    window: int = 1

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim == 0:
            raise InsufficientHistory("history must have a time axis")
        if self.window < 1:
            raise InsufficientHistory(f"window must be >= 1, got {self.window}")
        if obs.shape[0] < self.window:
            raise InsufficientHistory(
                f"history has {obs.shape[0]} points, window needs {self.window}"
            )
        if (obs < 0).any():
            raise ValueError("wind observations must be nonnegative")
        object.__setattr__(self, "observations", obs)

    def __len__(self) -> int:
        return self.observations.shape[0]

    def recent(self, m: Optional[int] = None) -> np.ndarray:
        m = self.window if m is None else m
        if m < 1 or m > len(self):
            raise InsufficientHistory(f"need {m} observations, have {len(self)}")
        return self.observations[-m:]


def _history(history: Union[WindHistory, ArrayLike], m: int = 1) -> WindHistory:
    if isinstance(history, WindHistory):
        if len(history) < m:
            raise InsufficientHistory(f"need {m} observations, have {len(history)}")
        return history
    return WindHistory(np.asarray(history, dtype=float), window=m)


class ForecastModel(ABC):
    """Distribuzione sulle traiettorie eoliche di un orizzonte"""

    variant: ForecastVariant
    capacity: np.ndarray

    @property
    @abstractmethod
    def shape(self) -> Tuple[int, int]:
        """(farm, ore)"""

    @property
    def n_farms(self) -> int:
        return self.shape[0]

    @property
    def horizon(self) -> int:
        return self.shape[1]

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n traiettorie [n x farm x ore], gia' riportate in [0, capacity]"""

    @abstractmethod
    def point_forecast(self) -> np.ndarray:
        """Previsione puntuale [farm x ore] usata dalla UC deterministica"""

    @abstractmethod
    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        """(media, deviazione standard) per farm e ora, prima del clipping"""

    def clamp(self, values: np.ndarray) -> np.ndarray:
        return np.clip(values, 0.0, self.capacity[:, None])

    def descriptor(self, seed: Optional[int] = None) -> Dict[str, Any]:
        """Descrittore serializzabile nel report JSON"""
        mean, sd = self.moments()
        return {
            "variant": self.variant.value,
            "mean": np.round(mean, 12).tolist(),
            "sd": np.round(sd, 12).tolist(),
            "m": self._m_descriptor(),
            "seed": seed,
        }

    def _m_descriptor(self) -> Any:
        return None


@dataclass(frozen=True, eq=False)
class _NormalModel(ForecastModel):
    mean: np.ndarray
    phi: np.ndarray
    capacity: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = _as_matrix(self.mean)
        phi = np.broadcast_to(np.asarray(self.phi, dtype=float), mean.shape).copy()
        if (phi < 0).any():
            raise ValueError("standard deviations must be >= 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "capacity", _as_capacity(self.capacity, mean.shape[0]))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mean.shape

    @property
    def sd(self) -> np.ndarray:
        return self.phi

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        draws = rng.standard_normal((n,) + self.shape)
        return self.clamp(self.mean + self.sd * draws)

    def point_forecast(self) -> np.ndarray:
        return self.clamp(self.mean)

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.mean, self.sd


@dataclass(frozen=True, eq=False)
class NormalPlugIn(_NormalModel):
    """N(xi_bar, phi^2) con la media campionaria come stima plug-in"""
    variant = ForecastVariant.NORMAL_PLUG_IN


@dataclass(frozen=True, eq=False)
class NormalPosteriorPredictive(_NormalModel):
    """
    Predittiva a posteriori N(xi_bar, (1 + 1/m) phi^2).

    m puo' essere scalare oppure una matrice [farm x ore] (numero di
    osservazioni per lead nel caso intra-day).
    """
    m: Union[int, np.ndarray] = 1
    variant = ForecastVariant.POSTERIOR_PREDICTIVE

    def __post_init__(self):
        super().__post_init__()
        m = np.asarray(self.m)
        if (m < 1).any():
            raise InsufficientHistory("posterior predictive needs m >= 1")

    @property
    def sd(self) -> np.ndarray:
        return self.phi * np.sqrt(1.0 + 1.0 / np.asarray(self.m, dtype=float))

    @property
    def variance(self) -> np.ndarray:
        return self.sd ** 2

    def _m_descriptor(self) -> Any:
        m = np.asarray(self.m)
        return int(m) if m.ndim == 0 else m.tolist()


@dataclass(frozen=True, eq=False)
class PersistencePoint(ForecastModel):
    """Persistenza deterministica: l'ultima osservazione per ogni lead"""
    value: np.ndarray
    capacity: np.ndarray = field(default=None)
    variant = ForecastVariant.PERSISTENCE_POINT

    def __post_init__(self):
        object.__setattr__(self, "value", _as_matrix(self.value))
        object.__setattr__(self, "capacity", _as_capacity(self.capacity, self.value.shape[0]))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.broadcast_to(self.point_forecast(), (n,) + self.shape).copy()

    def point_forecast(self) -> np.ndarray:
        return self.clamp(self.value)

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.value, np.zeros(self.shape)


@dataclass(frozen=True, eq=False)
class PersistenceEmpirical(ForecastModel):
    """
    Persistenza probabilistica.

    supports[i] e' il multiset dei vettori [k x farm] per il lead i+1; ogni ora
    si estrae un elemento uniforme, indipendentemente dalle altre ore.
    """
    supports: Tuple[np.ndarray, ...]
    capacity: np.ndarray = field(default=None)
    variant = ForecastVariant.PERSISTENCE_EMPIRICAL

    def __post_init__(self):
        if not self.supports:
            raise InsufficientHistory("empirical persistence needs at least one lead")
        supports = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.supports)
        n_farms = supports[0].shape[1]
        if any(s.shape[1] != n_farms or s.shape[0] == 0 for s in supports):
            raise DimensionMismatch("support vectors must share the farm dimension")
        capacity = _as_capacity(self.capacity, n_farms)
        supports = tuple(np.clip(s, 0.0, capacity) for s in supports)
        object.__setattr__(self, "capacity", capacity)
        object.__setattr__(self, "supports", supports)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.supports[0].shape[1], len(self.supports)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        out = np.empty((n,) + self.shape)
        for lead, support in enumerate(self.supports):
            picks = rng.integers(0, support.shape[0], size=n)
            out[:, :, lead] = support[picks]
        return out

    def point_forecast(self) -> np.ndarray:
        return self.moments()[0]

    def moments(self) -> Tuple[np.ndarray, np.ndarray]:
        mean = np.stack([s.mean(axis=0) for s in self.supports], axis=1)
        sd = np.stack([s.std(axis=0) for s in self.supports], axis=1)
        return mean, sd

    def _m_descriptor(self) -> Any:
        return [int(s.shape[0]) for s in self.supports]


# ---------------------------------------------------------------- fit

def fit_plug_in(history, m: int, phi: ArrayLike, capacity: Optional[ArrayLike] = None) -> NormalPlugIn:
    """
    Stima plug-in normale dalle ultime m osservazioni.

    Args:
        history: WindHistory o array [giorni x farm x ore]
        m: Numero di giorni usati per la media
        phi: Deviazione standard (scalare o [farm x ore])
        capacity: Capacita' installata per farm

    Returns:
        NormalPlugIn: N(xi_bar, phi^2)
    """
    hist = _history(history, m)
    mean = _as_matrix(hist.recent(m).mean(axis=0))
    return NormalPlugIn(mean=mean, phi=phi, capacity=capacity)


def fit_posterior_predictive(
    history, m: int, phi: ArrayLike, capacity: Optional[ArrayLike] = None
) -> NormalPosteriorPredictive:
    """
    Predittiva a posteriori con prior non informativo sulla media e phi noto.

    La media coincide con la stima plug-in, la varianza e' gonfiata di (1 + 1/m).
    """
    hist = _history(history, m)
    mean = _as_matrix(hist.recent(m).mean(axis=0))
    return NormalPosteriorPredictive(mean=mean, phi=phi, m=m, capacity=capacity)


def fit_persistence_point(
    history, horizon: int = 1, capacity: Optional[ArrayLike] = None
) -> PersistencePoint:
    """Ripete l'ultima osservazione oraria [ore x farm] per tutti i lead"""
    hist = _history(history, 1)
    last = np.atleast_1d(hist.observations[-1])
    return PersistencePoint(value=np.repeat(last[:, None], horizon, axis=1), capacity=capacity)


def fit_persistence_empirical(
    history,
    lead: int,
    now: Optional[int] = None,
    window: Optional[int] = None,
    capacity: Optional[ArrayLike] = None
) -> np.ndarray:
    """
    Supporto della persistenza empirica per il lead i.

    Elementi xi[h] - xi[h-j] + xi[h-j-i] per j = 0..h-i-1, limitati alla
    finestra delle ultime `window` osservazioni (indice minimo h-window+1).

    Args:
        history: WindHistory o array orario [ore x farm] (1-D = singolo parco)
        lead: Lead time i >= 1
        now: Indice dell'ultima osservazione h (default: ultima)
        window: Lunghezza della finestra m (default: tutta la storia)
        capacity: Capacita' per il clipping

    Returns:
        np.ndarray: Supporto [k x farm], gia' in [0, capacity]
    """
    obs = _history(history, 1).observations
    if obs.ndim == 1:
        obs = obs[:, None]
    h = len(obs) - 1 if now is None else now
    if not 0 <= h < len(obs):
        raise InsufficientHistory(f"now={h} outside history of length {len(obs)}")
    if lead < 1:
        raise ValueError("lead must be >= 1")

    j_max = h - lead - 1
    if window is not None:
        j_max = min(j_max, window - lead - 1)
    if j_max < 0:
        raise InsufficientHistory(f"no persistence increments for lead {lead} at hour {h}")

    j = np.arange(j_max + 1)
    support = obs[h] - obs[h - j] + obs[h - j - lead]
    return np.clip(support, 0.0, _as_capacity(capacity, obs.shape[1]))


def persistence_empirical_model(
    history,
    horizon: int,
    now: Optional[int] = None,
    window: Optional[int] = None,
    capacity: Optional[ArrayLike] = None
) -> PersistenceEmpirical:
    """Modello di persistenza probabilistica per i lead 1..horizon"""
    supports = tuple(
        fit_persistence_empirical(history, lead, now, window, capacity)
        for lead in range(1, horizon + 1)
    )
    return PersistenceEmpirical(supports=supports, capacity=capacity)


def fit_intraday_posterior_predictive(
    history,
    horizon: int,
    now: Optional[int] = None,
    window: Optional[int] = None,
    capacity: Optional[ArrayLike] = None
) -> NormalPosteriorPredictive:
    """
    Modello data-driven intra-day.

    Per ogni lead i gli elementi del supporto di persistenza fanno da m
    osservazioni: media e deviazione campionaria alimentano la predittiva
    N(mean, (1 + 1/m) sd^2).
    """
    means, sds, counts = [], [], []
    for lead in range(1, horizon + 1):
        support = fit_persistence_empirical(history, lead, now, window, capacity)
        k = support.shape[0]
        means.append(support.mean(axis=0))
        sds.append(support.std(axis=0, ddof=1) if k > 1 else np.zeros(support.shape[1]))
        counts.append(np.full(support.shape[1], k))
    return NormalPosteriorPredictive(
        mean=np.stack(means, axis=1),
        phi=np.stack(sds, axis=1),
        m=np.stack(counts, axis=1),
        capacity=capacity,
    )
