"""
Persistence of experiment runs and the summaries built on top of them.

Recording is best effort: a database failure is logged and the experiment's
outcome stands. Summaries aggregate the persisted runs per experiment over a
window of days: run count, pass rate and the worst measured constant.
"""
import logging
import math
from datetime import timedelta
from typing import Optional

from django.db import transaction
from django.db.models import Count, Q
from django.utils import timezone

from .models import DominationRecord, ExperimentRun

logger = logging.getLogger(__name__)

#Constants to be applied
ERROR_MESSAGE_MAX_LENGTH = 500
DEFAULT_SUMMARY_DAYS = 7


def _run_fields(config) -> dict:
    return {
        "experiment": config.experiment,
        "seed": config.seed,
        "depth": config.resolved_depth,
        "reps": config.reps,
        "ratio": "" if config.r is None else str(config.r),
        "parameters": {key: str(value) for key, value in sorted(config.params.items())},
    }


def _record_row(run: ExperimentRun, seed: int, report) -> DominationRecord:
    constant = report.best_constant
    unbounded = not math.isfinite(constant)
    return DominationRecord(
        run=run,
        seed=seed,
        inequality_id=report.inequality_id,
        best_constant=None if unbounded else constant,
        unbounded=unbounded,
        proof_constant=report.proof_constant,
        witness_leaf=report.witness_leaf,
        passed=report.passed,
        measured=report.to_dict()["measured"],
    )


def record_experiment_run(result) -> Optional[ExperimentRun]:
    """
    Saves a completed ExperimentResult with one DominationRecord per embedded report.
    Returns the saved run, or None if the database refused it.
    """
    config = result.config
    try:
        with transaction.atomic():
            run = ExperimentRun.objects.create(
                **_run_fields(config),
                passed=result.passed,
                report_count=len(result.reports),
                failed_count=len(result.failures),
                report_path="" if result.path is None else str(result.path),
                report=result.payload,
                is_complete=True,
            )
            #result.reports is the seed-ordered concatenation of the runs' batches
            rows = []
            offset = 0
            for seed, entry in zip(result.payload["seeds"], result.payload["runs"]):
                count = len(entry["reports"])
                rows.extend(_record_row(run, seed, report) for report in result.reports[offset:offset + count])
                offset += count
            DominationRecord.objects.bulk_create(rows)
        logger.debug("Recorded run %s of %s with %d records", run.pk, config.experiment, len(rows))
        return run

    except Exception as exc:
        logger.error(
            "Error recording run of %s (seed %s): %s",
            config.experiment,
            config.seed,
            exc,
            exc_info=True,
        )
        return None


def record_failed_run(config, message: str) -> Optional[ExperimentRun]:
    try:
        return ExperimentRun.objects.create(
            **_run_fields(config),
            passed=False,
            error_occurred=True,
            error_message=message[:ERROR_MESSAGE_MAX_LENGTH],
        )
    except Exception as exc:
        logger.error("Could not save the failed run of %s: %s", config.experiment, exc, exc_info=True)
        return None


#Summaries

def summarize_runs(days: int = DEFAULT_SUMMARY_DAYS, end=None) -> Optional[dict]:
    """
    Aggregates the runs created in the ``days`` days before ``end`` (default now).

    Returns a dict keyed by experiment id with the run count, passes, errors,
    pass rate and the worst bounded constant per inequality, or None when no
    run falls in the window.
    """
    if days < 1:
        raise ValueError(f"the summary window needs at least one day, got {days}")
    end = timezone.now() if end is None else end
    start = end - timedelta(days=days)
    runs = ExperimentRun.objects.filter(created_at__gte=start, created_at__lt=end)

    counts = runs.values("experiment").annotate(
        total=Count("id"),
        passes=Count("id", filter=Q(passed=True)),
        errors=Count("id", filter=Q(error_occurred=True)),
    ).order_by("experiment")
    if not counts:
        logger.warning("summarize_runs: no runs between %s and %s", start, end)
        return None

    summary = {}
    for row in counts:
        summary[row["experiment"]] = {
            "runs": row["total"],
            "passed": row["passes"],
            "errors": row["errors"],
            "pass_rate": round(row["passes"] / row["total"], 4),
            "worst_constants": {},
            "unbounded": [],
        }

    records = DominationRecord.objects.filter(run__in=runs).values_list(
        "run__experiment", "inequality_id", "best_constant", "unbounded",
    )
    for experiment, inequality_id, constant, unbounded in records.iterator():
        entry = summary[experiment]
        if unbounded:
            if inequality_id not in entry["unbounded"]:
                entry["unbounded"].append(inequality_id)
            continue
        worst = entry["worst_constants"].get(inequality_id)
        if worst is None or constant > worst:
            entry["worst_constants"][inequality_id] = constant

    for entry in summary.values():
        entry["unbounded"].sort()
    logger.info("Run summary over %d day(s): %d experiment(s)", days, len(summary))
    return summary
