"""Gradient descent with backtracking (Armijo) line search."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceError


@dataclass
class DescentResult:
    x: np.ndarray
    fun: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)


def gradient_descent(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    tol: float = 1e-8,
    max_iter: int = 5000,
    step: float = 1.0,
    armijo: float = 1e-4,
    shrink: float = 0.5,
    max_backtracks: int = 60,
) -> DescentResult:
    """Minimize ``fun`` (returning value and gradient) from ``x0``.

    Stops once the relative objective decrease falls below ``tol``. The
    accepted step grows by 2x after each success, so the objective is
    non-increasing across iterations by construction.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    if not np.isfinite(f):
        raise ConvergenceError("objective is not finite at the initial point", residual=f)
    history = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        gg = float(g @ g)
        if gg == 0.0:
            converged = True
            break
        t = step
        for _ in range(max_backtracks):
            x_new = x - t * g
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f - armijo * t * gg:
                break
            t *= shrink
        else:
            # no decrease possible at machine precision
            converged = True
            break
        rel = (f - f_new) / max(abs(f), 1e-12)
        x, f, g = x_new, f_new, g_new
        history.append(f)
        step = t * 2.0
        if rel < tol:
            converged = True
            break
    return DescentResult(x=x, fun=f, n_iter=it, converged=converged, history=history)
