"""Input-state-output port-Hamiltonian systems and their bracket algebra.

A port-Hamiltonian (pH) system is

    xdot = (J(x) - R(x)) dH(x) + g(x) u,      y = g(x)^T dH(x),

with J(x) = -J(x)^T routing power losslessly, R(x) = R(x)^T >= 0 modelling
dissipation, and the Hamiltonian H(x) storing the total physical energy.
The instantaneous power balance along solutions is

    Hdot = {H,H}_J - [H,H]_R + y^T u,

where {A,B}_J = dA^T J dB is the skew bracket (identically zero on the
diagonal) and [A,B]_Y = dA^T Y dB is the symmetric bracket; with Y = R and
both slots filled by H it is the dissipated power.

All matrix evaluators are callables of the state so that systems with
configuration-dependent inertia fit the same contract; constant-matrix
systems simply capture cached arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .numerics import gradient_rel_error
from .tolerances import DEFAULT_TOLERANCES, Tolerances

Array = np.ndarray
MatrixFn = Callable[[Array], Array]
ScalarFn = Callable[[Array], float]
VectorFn = Callable[[Array], Array]


@dataclass(frozen=True)
class PhSystem:
    """Evaluable port-Hamiltonian structure.

    n, m:   state and input dimensions.
    J, R:   maps x -> (n, n) interconnection / dissipation matrices.
    g:      map x -> (n, m) input matrix.
    H:      map x -> total stored energy (joules).
    gradH:  map x -> dH/dx as an n-vector.
    """

    n: int
    m: int
    J: MatrixFn
    R: MatrixFn
    g: MatrixFn
    H: ScalarFn
    gradH: VectorFn

    @classmethod
    def from_matrices(cls, J: Array, R: Array, g: Array,
                      H: ScalarFn, gradH: VectorFn) -> "PhSystem":
        """Wrap constant J, R, g arrays into evaluator form."""
        J = np.asarray(J, dtype=float)
        R = np.asarray(R, dtype=float)
        g = np.atleast_2d(np.asarray(g, dtype=float))
        if g.shape[0] != J.shape[0]:
            g = g.T
        n, m = g.shape
        if J.shape != (n, n) or R.shape != (n, n):
            raise ValueError(f"inconsistent shapes: J {J.shape}, R {R.shape}, g {g.shape}")
        return cls(n=n, m=m, J=lambda x: J, R=lambda x: R, g=lambda x: g,
                   H=H, gradH=gradH)


@dataclass(frozen=True)
class PowerTerms:
    """The three channels of the power balance, in watts.

    routing:     {H,H}_J, identically zero up to roundoff.
    dissipation: [H,H]_R >= 0.
    supplied:    y^T u, power entering through the port.

    Hdot = routing - dissipation + supplied.
    """

    routing: float
    dissipation: float
    supplied: float

    @property
    def h_dot(self) -> float:
        return self.routing - self.dissipation + self.supplied


def bracket_j(grad_a: Array, grad_b: Array, x: Array, sys: PhSystem) -> float:
    """Skew bracket {A,B}_J = dA^T J(x) dB of two gradient vectors."""
    grad_a = np.asarray(grad_a, dtype=float)
    grad_b = np.asarray(grad_b, dtype=float)
    if grad_a.shape != (sys.n,) or grad_b.shape != (sys.n,):
        raise ValueError(
            f"gradient shapes {grad_a.shape}, {grad_b.shape} do not match state dimension {sys.n}")
    return float(grad_a @ sys.J(np.asarray(x, dtype=float)) @ grad_b)


def bracket_sym(grad_a: Array, grad_b: Array, y: Array,
                tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Symmetric bracket [A,B]_Y = dA^T Y dB for a symmetric matrix Y.

    With Y = R and both slots filled by the energy gradient this is the
    dissipated power and must be nonnegative. Raises ValueError if Y is
    not symmetric.
    """
    grad_a = np.asarray(grad_a, dtype=float)
    grad_b = np.asarray(grad_b, dtype=float)
    y = np.asarray(y, dtype=float)
    if y.shape != (grad_a.size, grad_a.size) or grad_a.shape != grad_b.shape:
        raise ValueError(f"shape mismatch: Y {y.shape}, gradients {grad_a.shape}, {grad_b.shape}")
    if np.abs(y - y.T).max() > tol.sym:
        raise ValueError(f"Y is not symmetric (defect {np.abs(y - y.T).max():.3e})")
    return float(grad_a @ y @ grad_b)


def drift(x: Array, sys: PhSystem) -> Array:
    """Autonomous vector field (J(x) - R(x)) dH(x)."""
    x = np.asarray(x, dtype=float)
    dH = sys.gradH(x)
    out = (sys.J(x) - sys.R(x)) @ dH
    if not np.all(np.isfinite(out)):
        bad = np.where(~np.isfinite(out))[0]
        raise FloatingPointError(f"non-finite drift component(s) {bad.tolist()} at x={x.tolist()}")
    return out


def output(x: Array, sys: PhSystem) -> Array:
    """Collocated port output y = g(x)^T dH(x)."""
    x = np.asarray(x, dtype=float)
    return sys.g(x).T @ sys.gradH(x)


def power_terms(x: Array, u: Array, sys: PhSystem) -> PowerTerms:
    """Evaluate every channel of the power balance at (x, u)."""
    x = np.asarray(x, dtype=float)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (sys.m,):
        raise ValueError(f"input shape {u.shape} does not match input dimension {sys.m}")
    dH = sys.gradH(x)
    routing = float(dH @ sys.J(x) @ dH)
    dissipation = float(dH @ sys.R(x) @ dH)
    supplied = float((sys.g(x).T @ dH) @ u)
    return PowerTerms(routing=routing, dissipation=dissipation, supplied=supplied)


@dataclass(frozen=True)
class StructureReport:
    """Result of sampling-based structural validation of a PhSystem."""

    n_samples: int
    max_skew_defect: float
    min_r_eigenvalue: float
    max_r_asymmetry: float
    max_grad_error: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_structure(sys: PhSystem,
                       samples: Sequence[Array],
                       tol: Tolerances = DEFAULT_TOLERANCES) -> StructureReport:
    """Check J skew-symmetry, R symmetric PSD and the H gradient on samples.

    The checks are sampling based, not symbolic: each invariant is evaluated
    at every provided state and the worst case is reported.  Raises
    ValueError on an empty sample list.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("validate_structure needs at least one sample state")

    max_skew = 0.0
    min_eig = np.inf
    max_asym = 0.0
    max_grad = 0.0
    for x in samples:
        x = np.asarray(x, dtype=float)
        Jx = sys.J(x)
        Rx = sys.R(x)
        max_skew = max(max_skew, float(np.abs(Jx + Jx.T).max()))
        max_asym = max(max_asym, float(np.abs(Rx - Rx.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (Rx + Rx.T)).min()))
        max_grad = max(max_grad, gradient_rel_error(sys.H, sys.gradH, x, tol.grad_step))

    failures = []
    if max_skew > tol.skew:
        failures.append(f"J not skew-symmetric: max defect {max_skew:.3e} > {tol.skew:.1e}")
    if max_asym > tol.sym:
        failures.append(f"R not symmetric: max defect {max_asym:.3e} > {tol.sym:.1e}")
    if min_eig < -tol.psd:
        failures.append(f"R not PSD: min eigenvalue {min_eig:.3e} < -{tol.psd:.1e}")
    if max_grad > tol.grad_rel:
        failures.append(f"gradH mismatch: max relative error {max_grad:.3e} > {tol.grad_rel:.1e}")

    return StructureReport(n_samples=len(samples), max_skew_defect=max_skew,
                           min_r_eigenvalue=min_eig, max_r_asymmetry=max_asym,
                           max_grad_error=max_grad, failures=tuple(failures))
