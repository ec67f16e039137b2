"""Bounded scalar minimization for the inner protocol-parameter searches."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable

from scipy.optimize import minimize_scalar

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-4
MAX_ITER = 100
STARTS = 3


def brent_minimize(
    f: Callable[[float], float],
    bracket: tuple[float, float],
    tol: float = DEFAULT_TOL,
    starts: int = STARTS,
    max_iter: int = MAX_ITER,
) -> tuple[float, float]:
    """Minimize ``f`` on ``[lo, hi]`` with bounded Brent searches.

    One search runs per seed at the interior quantiles of the bracket. With a
    single start the seed is the midpoint and its window is the whole
    bracket; with ``starts > 1`` each window is half the bracket width,
    centred on its seed and clipped to the bracket. The best point wins.
    Returns ``(x_star, f_star)``.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or not lo < hi:
        raise ValueError(f"Not a bracketing interval: [{lo}, {hi}]")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if starts < 1:
        raise ValueError(f"starts must be >= 1, got {starts}")

    width = hi - lo
    half = width / 4.0 if starts > 1 else width / 2.0
    best_x, best_f = math.nan, math.inf
    for i in range(starts):
        seed = lo + width * (i + 1) / (starts + 1)
        a, b = max(lo, seed - half), min(hi, seed + half)
        res = minimize_scalar(
            f, bounds=(a, b), method="bounded", options={"xatol": tol, "maxiter": max_iter}
        )
        logger.debug(
            "brent start %d on [%.6g, %.6g]: x=%.8g f=%.8g (%d evaluations)",
            i, a, b, res.x, res.fun, res.nfev,
        )
        if res.fun < best_f:
            best_x, best_f = float(res.x), float(res.fun)
    if math.isnan(best_x):
        raise ValueError(f"Objective was not finite anywhere on [{lo}, {hi}]")
    return best_x, best_f
