"""Power-law exponent fitting in log-log coordinates with bootstrap intervals."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RateFit:
    exponent: float
    intercept: float
    ci_low: float
    ci_high: float
    r_squared: float
    n_points: int
    transformed: bool  # fitted against log(nu/|log nu|) instead of log(nu)


def _abscissa(nus: np.ndarray, transformed: bool) -> np.ndarray:
    if transformed:
        return np.log(nus / np.abs(np.log(nus)))
    return np.log(nus)


def fit_rate(
    nus,
    errors,
    transformed: bool = False,
    n_bootstrap: int = 2000,
    rng_seed: int = 0,
) -> RateFit:
    """OLS slope of log(err) against log(nu), or log(nu/|log nu|) when
    ``transformed``; 95% CI by pairwise bootstrap.

    Rows with zero error are dropped with a warning (log undefined).
    """
    nus = np.asarray(list(nus), float)
    errors = np.asarray(list(errors), float)
    keep = errors > 0
    if not np.all(keep):
        warnings.warn(f"dropping {int((~keep).sum())} zero-error rows from rate fit")
        nus, errors = nus[keep], errors[keep]
    if len(nus) < 4:
        raise ValueError("need at least 4 positive-error rows to fit a rate")
    span = nus.max() / nus.min()
    if span < 10.0:
        warnings.warn(f"nu ladder spans only {span:.2f}x (< 1 decade); fit is fragile")
    x = _abscissa(nus, transformed)
    y = np.log(errors)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0

    rng = np.random.default_rng(rng_seed)
    slopes = np.empty(n_bootstrap)
    m = len(x)
    for b in range(n_bootstrap):
        idx = rng.integers(0, m, size=m)
        if np.ptp(x[idx]) == 0:
            slopes[b] = slope
            continue
        slopes[b] = np.polyfit(x[idx], y[idx], 1)[0]
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return RateFit(
        exponent=float(slope),
        intercept=float(intercept),
        ci_low=float(lo),
        ci_high=float(hi),
        r_squared=r2,
        n_points=m,
        transformed=transformed,
    )


def fit_double_exponential_form(nus, values) -> RateFit:
    """Fit value = K (nu/|log nu|)^p, the fixed-time envelope form."""
    return fit_rate(nus, values, transformed=True, n_bootstrap=500)


def prefactor(fit: RateFit) -> float:
    return math.exp(fit.intercept)
