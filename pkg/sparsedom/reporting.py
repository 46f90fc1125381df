"""
Report files written by the experiment runner.

Three formats share one payload: ``json`` is the lossless document,
``csv`` flattens the per-point data (slope experiments) or one row per
audited inequality, and ``gnuplot-data`` is the same table whitespace
separated under ``#`` header comments that name the columns.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Union

import pandas as pd

from .reports import DominationReport
from .serializers import dump_json, load_json, points_frame, write_csv

logger = logging.getLogger(__name__)

#Constants to be applied
JSON = "json"
CSV = "csv"
GNUPLOT = "gnuplot-data"
FORMATS = (JSON, CSV, GNUPLOT)

REQUIRED_KEYS = ("experiment", "config", "seeds", "runs", "summary", "passed", "environment", "generated_at")
REPORT_KEYS = ("inequality_id", "best_constant", "witness_leaf", "proof_constant", "passed", "measured")
SUMMARY_COLUMNS = ["seed", "inequality_id", "best_constant", "proof_constant", "passed", "witness_leaf"]

PathLike = Union[str, Path]


def _iter_reports(payload: Dict[str, Any]):
    for run in payload.get("runs", []):
        for report in run.get("reports", []):
            yield run.get("seed"), report


def report_frame(payload: Dict[str, Any]) -> pd.DataFrame:
    """Per-point rows when any report carries slope points, else one row per report."""
    points: List[Dict[str, Any]] = []
    for seed, report in _iter_reports(payload):
        for point in report.get("measured", {}).get("points", []) or []:
            points.append({**point, "seed": seed, "inequality_id": report["inequality_id"]})
    if points:
        return points_frame(points)
    rows = [
        {column: (seed if column == "seed" else report.get(column)) for column in SUMMARY_COLUMNS}
        for seed, report in _iter_reports(payload)
    ]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def _gnuplot_header(payload: Dict[str, Any], frame: pd.DataFrame) -> str:
    config = payload.get("config", {})
    lines = [
        f"# experiment: {payload.get('experiment')}",
        f"# depth: {config.get('depth')}  r: {config.get('r')}  seeds: {len(payload.get('seeds', []))}",
        f"# passed: {payload.get('passed')}",
        "# columns:",
    ]
    lines.extend(f"#   {index}: {column}" for index, column in enumerate(frame.columns, start=1))
    return "\n".join(lines) + "\n"


def write_gnuplot(payload: Dict[str, Any], frame: pd.DataFrame, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = frame.to_csv(sep=" ", index=False, header=False, na_rep="nan", float_format="%.17g")
    path.write_text(_gnuplot_header(payload, frame) + body)
    return path


def emit_report(payload: Dict[str, Any], fmt: str, path: PathLike) -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; choose from {', '.join(FORMATS)}")
    if fmt == JSON:
        written = dump_json(payload, path)
    elif fmt == CSV:
        written = write_csv(report_frame(payload), path)
    else:
        written = write_gnuplot(payload, report_frame(payload), path)
    logger.info("Wrote %s report to %s", fmt, written)
    return written


def validate_report(payload: Any) -> List[DominationReport]:
    """
    Schema check for a JSON report. Returns the embedded reports in seed
    order, or raises ValueError naming every problem found.
    """
    if not isinstance(payload, dict):
        raise ValueError("a report must be a JSON object")
    problems = [f"missing key {key!r}" for key in REQUIRED_KEYS if key not in payload]
    if not isinstance(payload.get("passed"), bool):
        problems.append("'passed' must be a boolean")
    seeds = payload.get("seeds", [])
    runs = payload.get("runs", [])
    if [run.get("seed") for run in runs] != list(seeds):
        problems.append("runs are not listed in seed order")

    reports = []
    for seed, item in _iter_reports(payload):
        missing = [key for key in REPORT_KEYS if key not in item]
        if missing:
            problems.append(f"seed {seed}: report lacks {missing}")
            continue
        reports.append(DominationReport.from_dict(item))
    if reports and payload.get("passed") is not None and payload["passed"] != all(r.passed for r in reports):
        problems.append("'passed' disagrees with the embedded reports")
    for inequality_id, entry in payload.get("summary", {}).items():
        if entry.get("inequality_id") != inequality_id:
            problems.append(f"summary entry {inequality_id!r} is mislabelled")

    if problems:
        raise ValueError("malformed report: " + "; ".join(problems))
    return reports


def load_report(path: PathLike) -> Dict[str, Any]:
    payload = load_json(path)
    validate_report(payload)
    return payload
