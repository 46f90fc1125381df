"""
DominationReport: the single result type every audit in the lab returns.

A report compares a left-hand side against a right-hand side leaf by leaf
(or as two scalars for norm inequalities) and records the best constant,
the leaf where it is attained and every auxiliary quantity the audit
measured along the way, so a stored report can be re-checked without the
inputs that produced it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Any, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)

#JSON spelling of an unbounded constant
INFINITY_TOKEN = "inf"


def plain(value: Any) -> Any:
    #Converts numpy and Fraction scalars into JSON-friendly builtins
    if isinstance(value, dict):
        return {str(key): plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [plain(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating, Fraction)):
        number = float(value)
        if math.isinf(number):
            return INFINITY_TOKEN if number > 0 else "-" + INFINITY_TOKEN
        return number
    return value


def _from_plain(value: Any) -> Any:
    if value == INFINITY_TOKEN:
        return math.inf
    return value


@dataclass
class DominationReport:
    """
    Outcome of one audited inequality lhs <= C * rhs.

    ``proof_constant`` of None means the constant is reported only; the
    report then passes whenever the measured constant is finite.
    """

    inequality_id: str
    best_constant: float
    witness_leaf: Optional[int]
    proof_constant: Optional[float]
    passed: bool
    measured: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return plain(asdict(self))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DominationReport":
        return cls(
            inequality_id=data["inequality_id"],
            best_constant=_from_plain(data["best_constant"]),
            witness_leaf=data.get("witness_leaf"),
            proof_constant=data.get("proof_constant"),
            passed=bool(data["passed"]),
            measured=dict(data.get("measured") or {}),
        )

    @property
    def reported_only(self) -> bool:
        return self.proof_constant is None


def _verdict(best: float, proof_constant: Optional[float]) -> bool:
    if proof_constant is None:
        return bool(np.isfinite(best))
    return bool(best <= proof_constant)


def _flat(values: Any) -> np.ndarray:
    values = getattr(values, "values", values)
    return np.asarray(values, dtype=float).ravel()


def check_domination(
    lhs: Any,
    rhs: Any,
    proof_constant: Optional[float] = None,
    inequality_id: str = "domination",
    measured: Optional[Dict[str, Any]] = None,
) -> DominationReport:
    """
    Best constant C with lhs <= C * rhs at every leaf.

    Accepts GridFunctions or plain arrays of the same shape. 0/0 counts as 0
    and positive/0 as infinity; the witness is the first leaf attaining the max.
    """
    left = _flat(lhs)
    right = _flat(rhs)
    if left.shape != right.shape:
        raise ValueError(f"lhs has {left.size} entries but rhs has {right.size}")

    if left.size == 0:
        best, witness = 0.0, None
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(left == 0, 0.0, np.where(right == 0, np.inf, left / right))
        witness = int(np.argmax(ratios))
        best = float(ratios[witness])

    report = DominationReport(
        inequality_id=inequality_id,
        best_constant=best,
        witness_leaf=witness,
        proof_constant=None if proof_constant is None else float(proof_constant),
        passed=_verdict(best, proof_constant),
        measured=plain(measured or {}),
    )
    _log_outcome(report)
    return report


def check_ratio(
    lhs: float,
    rhs: float,
    proof_constant: Optional[float] = None,
    inequality_id: str = "norm-ratio",
    measured: Optional[Dict[str, Any]] = None,
) -> DominationReport:
    #Scalar version for norm inequalities; the witness is meaningless there
    report = check_domination(
        np.array([float(lhs)]), np.array([float(rhs)]), proof_constant, inequality_id, measured,
    )
    report.witness_leaf = None
    report.measured.setdefault("lhs", float(lhs))
    report.measured.setdefault("rhs", float(rhs))
    return report


def merge_reports(inequality_id: str, reports, proof_constant: Optional[float] = None) -> DominationReport:
    """Worst case over several reports of the same inequality."""
    reports = list(reports)
    if not reports:
        return DominationReport(inequality_id, 0.0, None, proof_constant, True, {"merged": 0})
    worst = max(reports, key=lambda report: report.best_constant)
    return DominationReport(
        inequality_id=inequality_id,
        best_constant=worst.best_constant,
        witness_leaf=worst.witness_leaf,
        proof_constant=proof_constant if proof_constant is not None else worst.proof_constant,
        passed=all(report.passed for report in reports),
        measured={**worst.measured, "merged": len(reports)},
    )


def _log_outcome(report: DominationReport) -> None:
    if report.passed:
        logger.debug(
            "%s: constant %.6g (proof %s)",
            report.inequality_id, report.best_constant, report.proof_constant,
        )
    else:
        logger.warning(
            "%s failed: constant %.6g exceeds %s at leaf %s",
            report.inequality_id, report.best_constant, report.proof_constant, report.witness_leaf,
        )
