"""Small shared numerical helpers (finite differences, sampling, stepping)."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# Integrator substep policy: a (sub)step of size dt is acceptable at an
# active filter stage only if the commanded impulse dt * |u|_inf stays under
# BETA times the distance to the filter's degenerate set (the constraint-row
# norm |g^T dh|) or is negligible in absolute terms (THETA * (1 + |x|_inf)).
SUBSTEP_BETA = 0.25
SUBSTEP_THETA = 0.01


def substep_threshold(u_inf: float, denom: float, x_inf: float) -> float:
    """Largest integration step at which an active filter stage is tame.

    ``denom`` is [h,h]_{gg^T} at the stage; returns inf for zero input.
    """
    if u_inf == 0.0:
        return np.inf
    return max(SUBSTEP_BETA * (np.sqrt(denom) + 1e-9),
               SUBSTEP_THETA * (1.0 + x_inf)) / u_inf


def central_gradient(f: Callable[[np.ndarray], float], x: np.ndarray,
                     step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function at x."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        grad[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def gradient_rel_error(f: Callable[[np.ndarray], float],
                       grad_f: Callable[[np.ndarray], np.ndarray],
                       x: np.ndarray, step: float = 1e-6) -> float:
    """Relative error between an analytic gradient and central differences.

    The error is ||g_an - g_fd|| / max(1, ||g_fd||), so it degrades to an
    absolute check near critical points where the gradient vanishes.
    """
    g_an = np.asarray(grad_f(x), dtype=float)
    g_fd = central_gradient(f, x, step)
    scale = max(1.0, float(np.linalg.norm(g_fd)))
    return float(np.linalg.norm(g_an - g_fd)) / scale


def sample_states(n_dim: int, n_samples: int,
                  box: Sequence[tuple[float, float]] | tuple[float, float] = (-2.0, 2.0),
                  seed: int | None = 0) -> list[np.ndarray]:
    """Uniform random state samples inside a box.

    ``box`` is either one (lo, hi) pair applied to every coordinate or a
    sequence of per-coordinate pairs.
    """
    rng = np.random.default_rng(seed)
    if isinstance(box[0], (int, float)):
        lo = np.full(n_dim, float(box[0]))
        hi = np.full(n_dim, float(box[1]))
    else:
        if len(box) != n_dim:
            raise ValueError(f"box has {len(box)} entries for dimension {n_dim}")
        lo = np.array([b[0] for b in box], dtype=float)
        hi = np.array([b[1] for b in box], dtype=float)
    return [rng.uniform(lo, hi) for _ in range(n_samples)]
