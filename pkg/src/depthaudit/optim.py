"""Levenberg-Marquardt on normal equations, shared by pose and focal refinement.

Damping schedule: ``lambda_0 = 1e-3 * mean(diag(J^T J))``, multiplied by 10
on a rejected step and divided by 10 on an accepted one.  Each trial solves
``(J^T J + lambda I) delta = -J^T r`` by Cholesky.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import NoConvergence, NumericalFailure

FTOL = 1e-12
GTOL = 1e-10
XTOL = 1e-15
MAX_ITER = 100
MAX_REJECTS = 10


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    iterations: int
    status: str
    jtj: np.ndarray
    cost_history: list = field(default_factory=list)


def levenberg_marquardt(
    linearize: Callable,
    cost: Callable,
    x0,
    *,
    max_iter: int = MAX_ITER,
    ftol: float = FTOL,
    gtol: float = GTOL,
    xtol: float = XTOL,
    max_rejects: int = MAX_REJECTS,
    normalize: Callable | None = None,
) -> LMResult:
    """Minimise a sum of squared residuals.

    ``linearize(x)`` returns ``(cost, J^T r, J^T J)`` and ``cost(x)`` the
    sum of squares alone.  ``normalize`` may re-chart an accepted iterate
    without changing its cost (e.g. wrapping an axis-angle vector).
    """
    x = np.array(x0, dtype=np.float64)
    c, g, h = linearize(x)
    if not (np.isfinite(c) and np.all(np.isfinite(g)) and np.all(np.isfinite(h))):
        raise NumericalFailure("non-finite residuals at the initial point")
    diag_mean = float(np.mean(np.diag(h)))
    lam = 1e-3 * diag_mean if diag_mean > 0 else 1e-3
    history = [c]
    eye = np.eye(x.size)
    status = "max_iter"
    it = 0
    while it < max_iter:
        if c == 0.0:
            status = "zero_cost"
            break
        if np.max(np.abs(g)) < gtol:
            status = "gtol"
            break
        it += 1
        rejects = 0
        while True:
            try:
                factor = cho_factor(h + lam * eye)
            except LinAlgError:
                lam *= 10.0
                rejects += 1
                if rejects >= max_rejects:
                    raise NoConvergence("damped normal equations stayed indefinite") from None
                continue
            delta = -cho_solve(factor, g)
            if np.linalg.norm(delta) <= xtol * (np.linalg.norm(x) + xtol):
                status = "xtol"
                break
            # model-predicted decrease below round-off: already at the minimum
            predicted = -(g @ delta + 0.5 * delta @ h @ delta)
            if predicted <= ftol * c:
                status = "ftol"
                break
            x_new = x + delta
            c_new = cost(x_new)
            if np.isfinite(c_new) and c_new < c:
                break
            lam *= 10.0
            rejects += 1
            if rejects >= max_rejects:
                raise NoConvergence(
                    f"cost failed to decrease in {max_rejects} consecutive damped steps"
                )
        if status in ("xtol", "ftol"):
            break
        rel = (c - c_new) / c
        if normalize is not None:
            x_new = normalize(x_new)
        x = x_new
        lam /= 10.0
        c, g, h = linearize(x)
        history.append(c)
        if rel < ftol:
            status = "ftol"
            break
    return LMResult(x=x, cost=c, iterations=it, status=status, jtj=h, cost_history=history)
