"""Lettura e scrittura delle serie orarie di carico ed eolico (CSV wide)."""

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from core.errors import DimensionMismatch, InvalidValue, MissingColumn


def write_series(path: str, values, prefix: str, columns: Optional[Sequence[str]] = None) -> Path:
    """
    Scrive una serie [colonne x ore] come CSV `hour,<prefix>1,<prefix>2,...`.

    Args:
        path: File di destinazione
        values: Serie 1-D o matrice [colonne x ore]
        prefix: Prefisso dei nomi di colonna (b per bus, w per farm)
        columns: Nomi espliciti delle colonne

    Returns:
        Path: Percorso scritto
    """
    matrix = np.atleast_2d(np.asarray(values, dtype=float))
    names = list(columns) if columns is not None else [f"{prefix}{k + 1}" for k in range(matrix.shape[0])]
    if len(names) != matrix.shape[0]:
        raise DimensionMismatch(f"{len(names)} column names for {matrix.shape[0]} series")
    frame = pd.DataFrame(matrix.T, columns=names)
    frame.insert(0, "hour", np.arange(matrix.shape[1]))
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False, float_format="%.6f", lineterminator="\n")
    return out


def read_series(path: str) -> np.ndarray:
    """
    Legge un CSV `hour,value` o wide `hour,c1,c2,...`.

    Returns:
        np.ndarray: Matrice [colonne x ore], righe ordinate per hour
    """
    frame = pd.read_csv(path)
    frame.columns = [str(c).strip() for c in frame.columns]
    if "hour" not in frame.columns:
        raise MissingColumn("column 'hour' missing", file=str(path))
    if len(frame.columns) < 2:
        raise MissingColumn("no value columns", file=str(path))
    frame = frame.sort_values("hour", kind="stable")
    hours = frame["hour"].to_numpy()
    if len(hours) and not np.array_equal(hours, np.arange(hours[0], hours[0] + len(hours))):
        raise InvalidValue("hours must be consecutive", file=str(path))
    values = frame.drop(columns=["hour"]).apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise InvalidValue("non-numeric value", file=str(path), row=row)
    matrix = values.to_numpy(dtype=float).T
    if (matrix < 0).any():
        raise InvalidValue("series values must be nonnegative", file=str(path))
    return matrix


def read_load_series(path: str) -> np.ndarray:
    """Carico di sistema [ore] (una colonna) o per bus [bus x ore]"""
    matrix = read_series(path)
    return matrix[0] if matrix.shape[0] == 1 else matrix


def read_wind_series(path: str) -> np.ndarray:
    """Produzione eolica disponibile [farm x ore]"""
    return read_series(path)


def day_slice(series: np.ndarray, day: int, horizon: int = 24) -> np.ndarray:
    """Ore del giorno day (0-based) sull'ultimo asse"""
    start = day * horizon
    if start + horizon > series.shape[-1]:
        raise DimensionMismatch(f"day {day} beyond series of {series.shape[-1]} hours")
    return series[..., start:start + horizon]


def daily_matrix(series: np.ndarray, horizon: int = 24) -> np.ndarray:
    """Serie [farm x ore] riorganizzata in [giorni x farm x ore]"""
    series = np.atleast_2d(series)
    n_days = series.shape[-1] // horizon
    trimmed = series[:, :n_days * horizon]
    return trimmed.reshape(series.shape[0], n_days, horizon).transpose(1, 0, 2)
