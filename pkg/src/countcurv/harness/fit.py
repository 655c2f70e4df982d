"""Rate fits: the two-term model ``C1 a/r + C2 r`` and log-log slopes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import nnls


@dataclass(frozen=True)
class RateFit:
    """Summary of an error-vs-(a, r) study.

    ``levels`` lists the mesh scales; ``min_error[i]`` and ``argmin_r[i]``
    are the smallest median error over the radius sweep at level ``i`` and
    the count radius where it occurs.  ``policy_error`` is the median error
    at the radius chosen by the ``r ~ sqrt(a)`` rule.  ``slope`` is the
    log-log slope of ``policy_error`` against ``a`` (``min_slope`` uses
    ``min_error``).  ``C1, C2`` come from a nonnegative least-squares fit of
    per-record errors to ``C1 a/R + C2 R`` with ``R`` the physical radius.
    """

    levels: tuple
    min_error: tuple
    argmin_r: tuple
    policy_r: tuple
    policy_error: tuple
    slope: float
    min_slope: float
    C1: float
    C2: float
    residuals: tuple
    fit_level: float
    extra: dict = field(default_factory=dict)

    def envelope(self, a, R, inflate: float = 1.0):
        a = np.asarray(a, dtype=float)
        R = np.asarray(R, dtype=float)
        return inflate * (self.C1 * a / R + self.C2 * R)

    def to_json(self) -> dict:
        return {
            "levels": list(self.levels),
            "min_error": list(self.min_error),
            "argmin_r": list(self.argmin_r),
            "policy_r": list(self.policy_r),
            "policy_error": list(self.policy_error),
            "slope": self.slope,
            "min_slope": self.min_slope,
            "C1": self.C1,
            "C2": self.C2,
            "residuals": list(self.residuals),
            "fit_level": self.fit_level,
            "extra": self.extra,
        }


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` on ``log x``; ``nan`` if undefined."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def fit_two_term(a, R, err) -> tuple:
    """Nonnegative least squares for ``err ~ C1 a/R + C2 R``.

    Returns ``(C1, C2, residuals)`` with residuals ``err - model``.
    """
    a = np.asarray(a, dtype=float)
    R = np.asarray(R, dtype=float)
    err = np.asarray(err, dtype=float)
    ok = np.isfinite(err) & (R > 0)
    if not ok.any():
        return float("nan"), float("nan"), np.array([])
    A = np.stack([a[ok] / R[ok], R[ok]], 1)
    (c1, c2), _ = nnls(A, err[ok])
    return float(c1), float(c2), err[ok] - A @ np.array([c1, c2])


def envelope_constant(a, R, err, quantile: float = 1.0) -> float:
    """Smallest ``C`` with ``err <= C (a/R + R)`` for the given quantile of records."""
    a = np.asarray(a, dtype=float)
    R = np.asarray(R, dtype=float)
    err = np.abs(np.asarray(err, dtype=float))
    ok = np.isfinite(err) & (R > 0)
    if not ok.any():
        return float("nan")
    ratio = err[ok] / (a[ok] / R[ok] + R[ok])
    return float(np.quantile(ratio, quantile)) if quantile < 1 else float(ratio.max())
