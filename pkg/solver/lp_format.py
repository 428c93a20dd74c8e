"""Dump di istanze in formato testo CPLEX LP, per confronti con solver esterni."""

from pathlib import Path
from typing import Iterable, List, Optional

import numpy as np

from core.states import RowSense
from utils.logging_config import get_logger

logger = get_logger(__name__)

_LINE_WIDTH = 250


def _name(instance, j: int) -> str:
    if instance.names is not None:
        return str(instance.names[j]).replace(" ", "_")
    return f"x{j}"


def _terms(instance, coeffs: np.ndarray) -> str:
    parts: List[str] = []
    for j in np.flatnonzero(coeffs):
        value = float(coeffs[j])
        sign = "-" if value < 0 else "+"
        parts.append(f"{sign} {abs(value):.17g} {_name(instance, j)}")
    if not parts:
        return "0 x0" if instance.names is None else f"0 {_name(instance, 0)}"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def _wrap(text: str) -> str:
    """Spezza righe lunghe (i lettori LP hanno un limite per riga)"""
    out, line = [], ""
    for token in text.split(" "):
        if len(line) + len(token) + 1 > _LINE_WIDTH:
            out.append(line)
            line = "   " + token
        else:
            line = f"{line} {token}" if line else token
    out.append(line)
    return "\n".join(out)


def format_lp(instance, binaries: Iterable[int] = ()) -> str:
    """Testo LP (Minimize / Subject To / Bounds / Binary / End)"""
    ops = {RowSense.LE: "<=", RowSense.GE: ">=", RowSense.EQ: "="}
    lines = ["\\ stochastic unit commitment instance", "Minimize"]
    lines.append(_wrap(f" obj: {_terms(instance, instance.c)}"))
    lines.append("Subject To")
    for i in range(instance.n_rows):
        body = _terms(instance, instance.A[i])
        lines.append(_wrap(f" r{i}: {body} {ops[instance.senses[i]]} {instance.b[i]:.17g}"))

    lines.append("Bounds")
    binary_set = set(binaries)
    for j in range(instance.n_vars):
        lo, hi, name = instance.lo[j], instance.hi[j], _name(instance, j)
        if j in binary_set and lo <= 0.0 and hi >= 1.0:
            continue
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {name} free")
        elif lo == -np.inf:
            lines.append(f" -inf <= {name} <= {hi:.17g}")
        elif hi == np.inf:
            lines.append(f" {lo:.17g} <= {name} <= +inf")
        else:
            lines.append(f" {lo:.17g} <= {name} <= {hi:.17g}")

    if binary_set:
        lines.append("Binary")
        lines.extend(f" {_name(instance, j)}" for j in sorted(binary_set))
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp_file(instance, path: str, binaries: Optional[Iterable[int]] = None) -> Path:
    """
    Scrive l'istanza in formato LP.

    Args:
        instance: LpInstance
        path: File di destinazione (le cartelle vengono create)
        binaries: Indici delle variabili binarie

    Returns:
        Path: File scritto
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(format_lp(instance, binaries or ()), encoding="utf-8")
    logger.debug("lp_file_written", path=str(target), rows=instance.n_rows, vars=instance.n_vars)
    return target
