"""Least-squares exponents on log-log data for the sharpness experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.linear_model import LinearRegression

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float
    points: int

    def within(self, target: float, tolerance: float) -> bool:
        return abs(self.slope - target) <= tolerance


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Fit log y = slope * log x + intercept."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError(f"need at least two paired points, got {x.size} and {y.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fits need positive data")

    features = np.log(x).reshape(-1, 1)
    targets = np.log(y)
    model = LinearRegression().fit(features, targets)
    fit = SlopeFit(
        slope=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r2=float(model.score(features, targets)) if x.size > 2 else 1.0,
        points=int(x.size),
    )
    logger.debug("Log-log fit over %d points: slope %.4f (r2 %.4f)", fit.points, fit.slope, fit.r2)
    return fit
