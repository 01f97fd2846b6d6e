"""Closed-form CBF safety filter with explicit power accounting.

A control barrier function h defines the safe set C = {x : h(x) >= 0}.
With zero nominal input, the constraint margin at a state is

    psi = {h,H}_J - [h,H]_R + alpha(h),

and the minimum-norm input satisfying hdot >= -alpha(h) has the closed form

    u_safe = -1[psi < 0] * (g^T dh / [h,h]_{gg^T}) * psi.

The power this filter pushes through the port is

    p_inj = -1[psi < 0] * ([H,h]_{gg^T} / [h,h]_{gg^T}) * psi,

which coincides with y^T u_safe, so the closed-loop energy obeys
Hdot = -[H,H]_R + p_inj.  A nonpositive value of the monitored quantity
1[psi < 0] * [H,h]_{gg^T} certifies that the filter acts as a damper and
preserves stability of the uncontrolled energy minimum.

The closed form is undefined where the filter is active but the constraint
row g^T dh vanishes; that is reported as :class:`CbfDegeneracyError` rather
than silently regularised, because no admissible input exists there.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import PhSystem
from .tolerances import DEFAULT_TOLERANCES, Tolerances

Array = np.ndarray


class CbfDegeneracyError(RuntimeError):
    """Filter is active but the constraint row vanishes: [h,h]_{gg^T} ~ 0."""


class QpInfeasibleError(RuntimeError):
    """The filter QP has an empty feasible set at the queried state."""


@dataclass(frozen=True)
class ClassK:
    """Extended class-K function used to shape the barrier constraint.

    Only the linear family alpha(h) = gamma * h is implemented; the kind
    tag leaves room for other shapes without speculative code paths.
    """

    gamma: float = 1.0
    kind: str = "linear"

    def __post_init__(self):
        if self.kind != "linear":
            raise ValueError(f"unsupported class-K kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError(f"class-K gain must be positive, got {self.gamma}")

    def __call__(self, h: float) -> float:
        return self.gamma * h


@dataclass(frozen=True)
class Barrier:
    """Evaluable control barrier function.

    h:      map x -> barrier value; the safe set is {h >= 0}.
    gradh:  map x -> dh/dx.
    alpha:  class-K function shaping how fast the boundary may be approached.
    t_on:   activation time in seconds; before it the simulation loop applies
            zero input (the filter itself is a pure state map).
    mech_spec:  energy-shaped barrier description this object was compiled
            from, if any; lets the simulator pick its fused mechanical path.
    """

    h: Callable[[Array], float]
    gradh: Callable[[Array], Array]
    alpha: ClassK = field(default_factory=ClassK)
    t_on: float = 0.0
    mech_spec: object = None


@dataclass(frozen=True)
class FilterResult:
    """Everything the filter knows at one state.

    u_safe: filtered input (zero when inactive).
    psi:    constraint margin; the filter is active exactly when psi < 0.
    active: indicator 1[psi < 0].
    denom:  [h,h]_{gg^T} = |g^T dh|^2.
    p_inj:  instantaneous power injected by the filter, in watts.
    """

    u_safe: Array
    psi: float
    active: bool
    denom: float
    p_inj: float


def _filter_terms(x: Array, sys: PhSystem, bar: Barrier,
                  gradH: Array, Jx: Array, Rx: Array, gx: Array,
                  tol: Tolerances) -> tuple[Array, float, bool, float, float]:
    """Core filter evaluation with the system matrices already evaluated."""
    gradh = np.asarray(bar.gradh(x), dtype=float)
    h_val = float(bar.h(x))
    psi = float(gradh @ Jx @ gradH) - float(gradh @ Rx @ gradH) + bar.alpha(h_val)
    g_dh = gx.T @ gradh
    denom = float(g_dh @ g_dh)
    if psi >= 0.0:
        return np.zeros(sys.m), psi, False, denom, 0.0
    if denom <= tol.degeneracy:
        raise CbfDegeneracyError(
            f"[h,h]_ggT = {denom:.3e} <= {tol.degeneracy:.1e} with psi = {psi:.6e} "
            f"at x = {np.asarray(x, dtype=float).tolist()}")
    u = -(g_dh / denom) * psi
    g_dH = gx.T @ gradH
    p_inj = -float(g_dH @ g_dh) / denom * psi
    return u, psi, True, denom, p_inj


def constraint_margin(x: Array, sys: PhSystem, bar: Barrier) -> float:
    """Margin psi = {h,H}_J - [h,H]_R + alpha(h) of the barrier constraint.

    This is hdot under zero input plus the class-K term; negative values
    activate the filter.
    """
    x = np.asarray(x, dtype=float)
    gradh = np.asarray(bar.gradh(x), dtype=float)
    gradH = sys.gradH(x)
    return float(gradh @ sys.J(x) @ gradH) - float(gradh @ sys.R(x) @ gradH) \
        + bar.alpha(float(bar.h(x)))


def safety_filter(x: Array, sys: PhSystem, bar: Barrier,
                  tol: Tolerances = DEFAULT_TOLERANCES) -> FilterResult:
    """Evaluate the closed-form safety filter at a state.

    Returns the filtered input together with the margin, the activity flag,
    the constraint-row norm and the injected power.  Raises
    :class:`CbfDegeneracyError` when active with a vanishing constraint row.
    """
    x = np.asarray(x, dtype=float)
    u, psi, active, denom, p_inj = _filter_terms(
        x, sys, bar, sys.gradH(x), sys.J(x), sys.R(x), sys.g(x), tol)
    return FilterResult(u_safe=u, psi=psi, active=active, denom=denom, p_inj=p_inj)


def stability_condition(x: Array, sys: PhSystem, bar: Barrier) -> float:
    """Damping-injection monitor 1[psi < 0] * [H,h]_{gg^T}.

    A nonpositive value certifies that the active filter can only extract
    energy at this state, so stability of the uncontrolled energy minimum
    is preserved.  Inactive states return exactly zero.
    """
    x = np.asarray(x, dtype=float)
    if constraint_margin(x, sys, bar) >= 0.0:
        return 0.0
    gx = sys.g(x)
    return float((gx.T @ sys.gradH(x)) @ (gx.T @ np.asarray(bar.gradh(x), dtype=float)))


def energy_bound_barrier(sys: PhSystem, sign: int, c: float,
                         alpha: ClassK | None = None, t_on: float = 0.0) -> Barrier:
    """Barrier bounding the total energy by c.

    sign = -1 builds h = c - H (keep H <= c, the filter extracts energy);
    sign = +1 builds h = H - c (keep H >= c, the filter injects energy).
    Gradients delegate to the system's energy gradient.
    """
    if sign not in (-1, 1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    s = float(sign)
    return Barrier(h=lambda x: s * (sys.H(x) - c),
                   gradh=lambda x: s * sys.gradH(x),
                   alpha=alpha if alpha is not None else ClassK(),
                   t_on=t_on)


def _boundary_point_by_bisection(a: Array, b: float, u_nom: Array) -> Array:
    """Point on {a^T u = b} along the constraint normal, found by bisection.

    Expands a bracket from u_nom in the direction of a (along which
    f(t) = a^T (u_nom + t a) - b is strictly increasing), then bisects.
    """
    f0 = float(a @ u_nom) - b
    t_hi = 1.0
    while float(a @ (u_nom + t_hi * a)) - b < 0.0:
        t_hi *= 2.0
        if t_hi > 1e18:
            raise QpInfeasibleError("bisection bracket expansion failed")
    t_lo = 0.0
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        if float(a @ (u_nom + t_mid * a)) - b < 0.0:
            t_lo = t_mid
        else:
            t_hi = t_mid
        if t_hi - t_lo < 1e-15 * max(1.0, t_hi):
            break
    del f0
    return u_nom + 0.5 * (t_lo + t_hi) * a


def _refine_on_boundary(a: Array, u0: Array, u_nom: Array) -> Array:
    """Grid refinement of min |u - u_nom| over the plane {a^T u = b} through u0.

    Walks a shrinking grid in the tangent directions of the plane.  For a
    single input there is nothing tangent to search and u0 is returned.
    """
    m = a.size
    if m == 1:
        return u0
    # Orthonormal tangent basis from the SVD of the constraint row.
    _, _, vt = np.linalg.svd(a.reshape(1, -1))
    tangent = vt[1:].T                      # (m, m-1)
    span = 2.0 * float(np.linalg.norm(u0 - u_nom)) + 1.0
    z = np.zeros(m - 1)
    grid = np.linspace(-1.0, 1.0, 9)
    for _ in range(40):
        improved = False
        for j in range(m - 1):
            candidates = z[None, :].repeat(grid.size, axis=0)
            candidates[:, j] = z[j] + span * grid
            costs = np.linalg.norm(u0 + candidates @ tangent.T - u_nom, axis=1)
            best = int(np.argmin(costs))
            if costs[best] < np.linalg.norm(u0 + z @ tangent.T - u_nom):
                z = candidates[best]
                improved = True
        span *= 0.5
        if span < 1e-10 and not improved:
            break
    return u0 + z @ tangent.T


def solve_filter_qp(x: Array, sys: PhSystem, bar: Barrier, u_nom: Array,
                    tol: Tolerances = DEFAULT_TOLERANCES) -> Array:
    """Minimum-deviation input satisfying hdot(x,u) >= -alpha(h).

    Solves  min |u - u_nom|^2  s.t.  a^T u >= b  with a = g^T dh and
    b = -alpha(h) - {h,H}_J + [h,H]_R, by two independent routes:

    (a) analytic projection of u_nom onto the halfspace;
    (b) bisection along the constraint normal onto the boundary plane,
        followed by a shrinking grid search over the plane's tangent
        directions.

    Returns (a) after asserting both routes agree to 1e-6.  With a zero
    nominal input the result equals the closed-form filter.  Raises
    :class:`QpInfeasibleError` when the constraint row is zero but the
    constraint is violated at every input.
    """
    x = np.asarray(x, dtype=float)
    u_nom = np.atleast_1d(np.asarray(u_nom, dtype=float))
    if u_nom.shape != (sys.m,):
        raise ValueError(f"u_nom shape {u_nom.shape} does not match input dimension {sys.m}")

    gradh = np.asarray(bar.gradh(x), dtype=float)
    gradH = sys.gradH(x)
    a = sys.g(x).T @ gradh
    b = -bar.alpha(float(bar.h(x))) - float(gradh @ sys.J(x) @ gradH) \
        + float(gradh @ sys.R(x) @ gradH)

    if float(a @ u_nom) >= b:
        return u_nom.copy()
    norm2 = float(a @ a)
    if norm2 < tol.degeneracy:
        raise QpInfeasibleError(
            f"zero constraint row with violated constraint (residual {b - float(a @ u_nom):.3e}) "
            f"at x = {x.tolist()}")

    u_analytic = u_nom + a * (b - float(a @ u_nom)) / norm2
    u_numeric = _refine_on_boundary(a, _boundary_point_by_bisection(a, b, u_nom), u_nom)
    gap = float(np.linalg.norm(u_analytic - u_numeric))
    if gap > 1e-6:
        raise RuntimeError(
            f"QP cross-check failed: analytic and boundary-search solutions differ by {gap:.3e}")
    return u_analytic
