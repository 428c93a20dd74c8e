"""Scrittura dei risultati di uno studio: report.json, totals.csv, scatter.csv, timing.json."""

import json
from pathlib import Path
from typing import Dict

import pandas as pd

from core.report_models import StudyReport
from harness.studies import StudyResult
from utils.logging_config import get_logger

logger = get_logger(__name__)

TOTALS_COLUMNS = ["policy", "total_cost", "penalty_cost", "penalty_ratio", "r_delta_g"]


def totals_frame(report: StudyReport) -> pd.DataFrame:
    """Una riga per policy con i totali e il risparmio relativo"""
    rows = [
        {
            "policy": entry.policy.value,
            "total_cost": entry.total_cost,
            "penalty_cost": entry.penalty_cost,
            "penalty_ratio": entry.penalty_ratio,
            "r_delta_g": entry.r_delta_g,
        }
        for entry in report.policies
    ]
    return pd.DataFrame(rows, columns=TOTALS_COLUMNS)


def write_study(result: StudyResult, out_dir: str) -> Dict[str, Path]:
    """
    Scrive gli artefatti di uno studio in out_dir.

    report.json non contiene tempi di calcolo, quindi rieseguire lo stesso
    studio con lo stesso seed produce un file identico byte per byte.

    Returns:
        dict: Nome artefatto -> percorso
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}

    paths["report"] = out / "report.json"
    paths["report"].write_text(result.report.model_dump_json(indent=2) + "\n", encoding="utf-8")

    paths["totals"] = out / "totals.csv"
    totals_frame(result.report).to_csv(paths["totals"], index=False, float_format="%.17g",
                                       lineterminator="\n")

    if result.scatter is not None:
        paths["scatter"] = out / "scatter.csv"
        result.scatter.to_csv(paths["scatter"], index=False, columns=["worker", "realized_cost"],
                              float_format="%.17g", lineterminator="\n")

    if result.timing:
        paths["timing"] = out / "timing.json"
        paths["timing"].write_text(json.dumps(result.timing, indent=2) + "\n", encoding="utf-8")

    logger.info("study_written", study=result.report.study, out_dir=str(out),
                files=sorted(p.name for p in paths.values()))
    return paths


def load_report(path: str) -> StudyReport:
    return StudyReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
