"""L-BFGS with a strong-Wolfe line search (bracketing + zoom with cubic interpolation)."""
from __future__ import annotations

import csv
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class LbfgsState:
    memory: int = 50
    gtol: float = 1e-9
    ftol: float = 0.0          # stop when the relative decrease falls below this (0 disables)
    c1: float = 1e-4
    c2: float = 0.9
    max_evals_per_search: int = 25
    iteration: int = 0
    pairs: deque = field(default_factory=deque)

    def __post_init__(self):
        if not 0 < self.c1 < self.c2 < 1:
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.memory < 1:
            raise ValueError("memory must be positive")

    def push(self, s: np.ndarray, y: np.ndarray) -> bool:
        """Store a correction pair if it satisfies the curvature condition."""
        sy = float(s @ y)
        if not sy > 1e-16 * float(np.sqrt((s @ s) * (y @ y))):
            return False
        self.pairs.append((s, y, 1.0 / sy))
        while len(self.pairs) > self.memory:
            self.pairs.popleft()
        return True

    def direction(self, g: np.ndarray) -> np.ndarray:
        """Two-loop recursion: -H g with the scaled-identity initial Hessian."""
        q = g.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * (s @ q)
            q -= a * y
            alphas.append(a)
        if self.pairs:
            s, y, _ = self.pairs[-1]
            q *= (s @ y) / (y @ y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * (y @ q)
            q += (a - b) * s
        return -q


@dataclass
class OptimizeResult:
    theta: np.ndarray
    loss: float
    history: list[float]
    iterations: int
    evaluations: int
    reason: str
    initial_loss: float = float("nan")


class LineSearchFailure(RuntimeError):
    pass


class NonFiniteLoss(RuntimeError):
    pass


def _cubic_min(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic through two points with slopes, or None."""
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def strong_wolfe(phi: Callable, f0: float, g0: float, step: float, c1: float, c2: float,
                 max_evals: int):
    """Find a step satisfying the strong Wolfe conditions.

    ``phi(a)`` returns ``(f, slope, payload)`` along the search ray.  Returns
    ``(a, f, slope, payload, evals)``; raises :class:`LineSearchFailure`.
    """
    evals = 0
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = step
    best = None
    while evals < max_evals:
        f, g, payload = phi(a)
        evals += 1
        if not np.isfinite(f):
            # shrink into the finite region
            a = 0.5 * (a_prev + a)
            continue
        if best is None or f < best[1]:
            best = (a, f, g, payload)
        if f > f0 + c1 * a * g0 or (evals > 1 and f >= f_prev):
            return _zoom(phi, f0, g0, (a_prev, f_prev, g_prev), (a, f, g), c1, c2, max_evals - evals,
                         evals, best)
        if abs(g) <= -c2 * g0:
            return a, f, g, payload, evals
        if g >= 0:
            return _zoom(phi, f0, g0, (a, f, g), (a_prev, f_prev, g_prev), c1, c2, max_evals - evals,
                         evals, best, payload_lo=payload)
        a_prev, f_prev, g_prev = a, f, g
        a = 2.0 * a
    raise LineSearchFailure("no acceptable step in the bracketing phase")


def _zoom(phi, f0, g0, lo, hi, c1, c2, budget, evals, best, payload_lo=None):
    a_lo, f_lo, g_lo = lo
    a_hi, f_hi, g_hi = hi
    for _ in range(budget):
        trial = _cubic_min(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        lo_end, hi_end = min(a_lo, a_hi), max(a_lo, a_hi)
        width = hi_end - lo_end
        if trial is None or not (lo_end + 0.1 * width <= trial <= hi_end - 0.1 * width):
            trial = 0.5 * (a_lo + a_hi)
        f, g, payload = phi(trial)
        evals += 1
        if np.isfinite(f) and f < best[1]:
            best = (trial, f, g, payload)
        if not np.isfinite(f) or f > f0 + c1 * trial * g0 or f >= f_lo:
            a_hi, f_hi, g_hi = trial, f, g
        else:
            if abs(g) <= -c2 * g0:
                return trial, f, g, payload, evals
            if g * (a_hi - a_lo) >= 0:
                a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
            a_lo, f_lo, g_lo, payload_lo = trial, f, g, payload
        if abs(a_hi - a_lo) < 1e-16 * max(1.0, abs(a_lo)):
            break
    # accept the best sufficient-decrease point seen, if any
    a, f, g, payload = best
    if a > 0 and f <= f0 + c1 * a * g0:
        return a, f, g, payload, evals
    raise LineSearchFailure("zoom phase did not find a sufficient decrease")


def minimize(loss_and_grad: Callable, theta0, max_iters: int, state: LbfgsState | None = None,
             callback: Callable | None = None) -> OptimizeResult:
    """Minimise ``loss_and_grad(theta) -> (value, gradient)`` from ``theta0``.

    Returns the best parameters seen and the loss after every iteration
    (``len(history) == iterations``; the starting loss is ``initial_loss``).
    Stops at ``max_iters``, at gradient norm below ``state.gtol``, on a
    failed line search, or on a non-finite loss/gradient.
    """
    state = state or LbfgsState()
    theta = np.array(theta0, dtype=float, copy=True)
    f, g = loss_and_grad(theta)
    f, g = float(f), np.asarray(g, dtype=float)
    evals = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise NonFiniteLoss("loss or gradient is not finite at the initial point")
    history = []
    f_init = f
    best_theta, best_f = theta.copy(), f
    reason = "max_iters"
    it = 0
    while it < max_iters:
        gnorm = float(np.linalg.norm(g))
        if gnorm < state.gtol:
            reason = "gtol"
            break
        d = state.direction(g)
        slope = float(g @ d)
        if not slope < 0:
            # lost descent: restart from steepest descent
            state.pairs.clear()
            d = -g
            slope = -gnorm ** 2
        step = 1.0 if state.pairs else min(1.0, 1.0 / gnorm)

        def phi(a, theta=theta, d=d):
            fa, ga = loss_and_grad(theta + a * d)
            ga = np.asarray(ga, dtype=float)
            fa = float(fa)
            if not np.all(np.isfinite(ga)):
                fa = np.inf
            return fa, float(ga @ d), ga

        try:
            a, f_new, _, g_new, n = strong_wolfe(phi, f, slope, step, state.c1, state.c2,
                                                 state.max_evals_per_search)
        except LineSearchFailure as exc:
            log.info("stopping: %s", exc)
            reason = "line_search"
            break
        evals += n
        s = a * d
        theta_new = theta + s
        state.push(s, g_new - g)
        rel = (f - f_new) / max(abs(f), 1e-300)
        theta, f, g = theta_new, f_new, g_new
        it += 1
        state.iteration += 1
        history.append(f)
        if f < best_f:
            best_theta, best_f = theta.copy(), f
        if callback is not None:
            callback(it, f, theta)
        if state.ftol and rel < state.ftol:
            reason = "ftol"
            break
    return OptimizeResult(best_theta, best_f, history, it, evals, reason, f_init)


def write_history(history, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "loss"])
        for i, v in enumerate(history, start=1):
            w.writerow([i, repr(float(v))])
    return path
