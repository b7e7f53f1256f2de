"""Inner-loop solvers for the per-step optimization problems of the
implicit schemes: gradient descent with Barzilai-Borwein step size, and
AdaGrad.

Both are deterministic given (objective, start, config).  The BB solver is
non-monotone, so it returns the best iterate seen rather than the last one;
that policy is what guarantees the outer schemes' energy inequalities even
when the iteration cap cuts the solve short.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class InnerSolverConfig:
    max_iters: int = 20
    grad_tol: float = 1e-8          # sup-norm of the gradient
    lr: float = 0.1                 # AdaGrad learning rate
    bb_clamp: tuple[float, float] = (1e-10, 1e3)
    bb_fallback_step: float | None = None   # defaults to lr

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        lo, hi = self.bb_clamp
        if not lo < hi:
            raise ValueError("bb_clamp must satisfy alpha_min < alpha_max")

    @property
    def fallback_step(self) -> float:
        return self.lr if self.bb_fallback_step is None else self.bb_fallback_step


class Objective:
    """Value/gradient oracle over a flat vector."""

    def __init__(self, value, gradient):
        self.value = value
        self.gradient = gradient


def _check(val, z, label):
    if not np.isfinite(val) or not np.all(np.isfinite(z)):
        raise FloatingPointError(f"{label} produced a non-finite value")


def bb_descent(obj, z0: np.ndarray, cfg: InnerSolverConfig) -> np.ndarray:
    """Minimize obj from z0 with BB1 steps alpha = (s.s)/(s.y).

    Non-positive curvature (s.y <= 0) falls back to the fixed step; the step
    is clamped to cfg.bb_clamp.  Stops when the gradient sup-norm drops below
    grad_tol or after max_iters steps; returns the iterate with the lowest
    observed objective value (never worse than z0).
    """
    z = np.array(z0, dtype=np.float64)
    g = np.asarray(obj.gradient(z), dtype=np.float64)
    f = float(obj.value(z))
    _check(f, g, "inner objective")
    best_z, best_f = z.copy(), f

    z_prev = None
    g_prev = None
    lo, hi = cfg.bb_clamp
    for _ in range(cfg.max_iters):
        if np.max(np.abs(g)) < cfg.grad_tol:
            break
        if z_prev is None:
            alpha = cfg.fallback_step
        else:
            s = z - z_prev
            y = g - g_prev
            sy = float(np.dot(s, y))
            alpha = float(np.dot(s, s)) / sy if sy > 0 else cfg.fallback_step
            alpha = min(max(alpha, lo), hi)
        z_prev, g_prev = z, g
        z = z - alpha * g
        g = np.asarray(obj.gradient(z), dtype=np.float64)
        f = float(obj.value(z))
        _check(f, g, "inner objective")
        if f < best_f:
            best_z, best_f = z.copy(), f
    return best_z


def adagrad_descent(obj, z0: np.ndarray, cfg: InnerSolverConfig) -> np.ndarray:
    """Minimize obj from z0 with AdaGrad updates z -= lr * g / (sqrt(acc) + eps)."""
    eps = 1e-8
    z = np.array(z0, dtype=np.float64)
    acc = np.zeros_like(z)
    for _ in range(cfg.max_iters):
        g = np.asarray(obj.gradient(z), dtype=np.float64)
        _check(0.0, g, "inner gradient")
        if np.max(np.abs(g)) < cfg.grad_tol:
            break
        acc += g * g
        z = z - cfg.lr * g / (np.sqrt(acc) + eps)
        _check(0.0, z, "inner iterate")
    return z
