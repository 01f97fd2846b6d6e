"""Fully actuated mechanical systems in port-Hamiltonian form.

With state x = (q, p), inertia M(q) = M(q)^T > 0, damping D and full-rank
input matrix B, the equations of motion are the pH system

    [qdot]   [ 0   I ] [dH/dq]   [0]
    [pdot] = [-I  -D ] [dH/dp] + [B] u,     y = B^T qdot,

with H(q, p) = K(q, p) + V(q) and kinetic energy K = p^T M(q)^{-1} p / 2.

Energy-shaped barriers of the form

    h(q, p) = sign * K(q, p) + w(q) + c

specialise the filter quantities: the margin becomes

    psi = {h,H} - (dh/dp)^T D qdot + alpha(h)
        = -sign * Vdot + wdot - sign * qdot^T D qdot + alpha(h),

where the second expression follows from bilinearity of the Poisson
bracket (Vdot and wdot are rates along qdot).  For sign = -1 the injected
power reduces to 1[psi<0] * psi <= 0: the filter can only act as a damper.
Both expressions are implemented separately and serve as mutual oracles.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .barrier import Barrier, CbfDegeneracyError, ClassK
from .core import PhSystem
from .numerics import gradient_rel_error, substep_threshold
from .tolerances import DEFAULT_TOLERANCES, Tolerances

Array = np.ndarray


@dataclass(frozen=True)
class MechanicalSystem:
    """Mechanical structure (M, V, D, B) with analytic derivatives.

    mass:            map q -> (dof, dof) SPD inertia matrix.
    dmass:           map q -> (dof, dof, dof) stack of dM/dq_i.
    potential:       map q -> V(q) in joules.
    grad_potential:  map q -> dV/dq.
    damping:         constant symmetric PSD matrix D.
    input_matrix:    constant full-rank matrix B.
    """

    dof: int
    mass: Callable[[Array], Array]
    dmass: Callable[[Array], Array]
    potential: Callable[[Array], float]
    grad_potential: Callable[[Array], Array]
    damping: Array
    input_matrix: Array


def _solve_mass(M: Array, p: Array, q: Array) -> Array:
    """M^{-1} p with closed forms for the 1- and 2-dof cases (hot path)."""
    n = p.shape[0]
    if n == 1:
        m00 = M[0, 0]
        if m00 <= 0.0:
            raise FloatingPointError(f"singular mass matrix at q = {np.asarray(q).tolist()}")
        return p / m00
    if n == 2:
        a, b = M[0, 0], M[0, 1]
        c, d = M[1, 0], M[1, 1]
        det = a * d - b * c
        if abs(det) < 1e-300:
            raise FloatingPointError(f"singular mass matrix at q = {np.asarray(q).tolist()}")
        return np.array([(d * p[0] - b * p[1]) / det, (a * p[1] - c * p[0]) / det])
    try:
        return np.linalg.solve(M, p)
    except np.linalg.LinAlgError as exc:
        raise FloatingPointError(f"singular mass matrix at q = {np.asarray(q).tolist()}") from exc


def velocity(ms: MechanicalSystem, q: Array, p: Array) -> Array:
    """Generalised velocity qdot = M(q)^{-1} p."""
    return _solve_mass(ms.mass(q), np.asarray(p, dtype=float), q)


def kinetic_energy(ms: MechanicalSystem, q: Array, p: Array) -> float:
    return 0.5 * float(p @ velocity(ms, q, p))


def _dkinetic_from_qd(ms: MechanicalSystem, q: Array, qd: Array) -> Array:
    dm = ms.dmass(q)
    if not dm.any():
        return np.zeros(ms.dof)
    return np.array([-0.5 * float(qd @ dm[i] @ qd) for i in range(ms.dof)])


def dkinetic_dq(ms: MechanicalSystem, q: Array, p: Array) -> Array:
    """dK/dq_i = -qdot^T (dM/dq_i) qdot / 2, using dM^{-1} = -M^{-1} dM M^{-1}."""
    return _dkinetic_from_qd(ms, q, velocity(ms, q, p))


def to_ph(ms: MechanicalSystem) -> PhSystem:
    """Compile the mechanical structure into a pH system on x = (q, p)."""
    n = ms.dof
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    R = np.zeros((2 * n, 2 * n))
    R[n:, n:] = ms.damping
    g = np.vstack([np.zeros((n, n)), ms.input_matrix])

    def hamiltonian(x: Array) -> float:
        q, p = x[:n], x[n:]
        return 0.5 * float(p @ velocity(ms, q, p)) + float(ms.potential(q))

    def grad_hamiltonian(x: Array) -> Array:
        q, p = x[:n], x[n:]
        qd = velocity(ms, q, p)
        return np.concatenate([_dkinetic_from_qd(ms, q, qd) + ms.grad_potential(q), qd])

    return PhSystem(n=2 * n, m=n, J=lambda x: J, R=lambda x: R, g=lambda x: g,
                    H=hamiltonian, gradH=grad_hamiltonian)


@dataclass(frozen=True)
class EnergyCbfSpec:
    """Energy-shaped barrier h = sign * K + position_term(q) + c.

    sign:                +1 or -1, coefficient of the kinetic energy.
    position_term:       map q -> scalar configuration-dependent term.
    grad_position_term:  map q -> its gradient.
    c:                   constant offset, joules.
    alpha:               class-K gain of the constraint.
    t_on:                activation time handed to the compiled barrier.
    """

    sign: int
    position_term: Callable[[Array], float] = lambda q: 0.0
    grad_position_term: Callable[[Array], Array] = None  # type: ignore[assignment]
    c: float = 0.0
    alpha: ClassK = field(default_factory=ClassK)
    t_on: float = 0.0

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.grad_position_term is None:
            object.__setattr__(self, "grad_position_term",
                               lambda q: np.zeros(np.atleast_1d(q).size))

    def h(self, ms: MechanicalSystem, q: Array, p: Array) -> float:
        return self.sign * kinetic_energy(ms, q, p) + float(self.position_term(q)) + self.c


def barrier_from_spec(ms: MechanicalSystem, spec: EnergyCbfSpec) -> Barrier:
    """Compile an energy-shaped barrier into the generic Barrier contract.

    The compiled object is consumed by the generic filter; the specialised
    expressions below are an independent route to the same quantities.
    """
    n = ms.dof
    s = float(spec.sign)

    def h(x: Array) -> float:
        return spec.h(ms, x[:n], x[n:])

    def gradh(x: Array) -> Array:
        q, p = x[:n], x[n:]
        qd = velocity(ms, q, p)
        return np.concatenate([s * _dkinetic_from_qd(ms, q, qd)
                               + np.asarray(spec.grad_position_term(q), dtype=float),
                               s * qd])

    return Barrier(h=h, gradh=gradh, alpha=spec.alpha, t_on=spec.t_on, mech_spec=spec)


def constraint_margin_mech(q: Array, p: Array, ms: MechanicalSystem,
                           spec: EnergyCbfSpec) -> float:
    """Margin via the Poisson bracket and the damping correction.

    psi = {h,H} - (dh/dp)^T D qdot + alpha(h), with the canonical bracket
    {h,H} = (dh/dq)^T dH/dp - (dh/dp)^T dH/dq.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    s = float(spec.sign)
    qd = velocity(ms, q, p)
    dK_dq = dkinetic_dq(ms, q, p)
    h_q = s * dK_dq + np.asarray(spec.grad_position_term(q), dtype=float)
    h_p = s * qd
    H_q = dK_dq + ms.grad_potential(q)
    poisson = float(h_q @ qd) - float(h_p @ H_q)
    damping = float(h_p @ ms.damping @ qd)
    return poisson - damping + spec.alpha(spec.h(ms, q, p))


def constraint_margin_split(q: Array, p: Array, ms: MechanicalSystem,
                            spec: EnergyCbfSpec) -> float:
    """Margin via rates of the potential and the configuration term.

    psi = -sign * Vdot + wdot - sign * qdot^T D qdot + alpha(h), an identity
    obtained by expanding the Poisson bracket with bilinearity; it is the
    cross-check oracle for :func:`constraint_margin_mech`.  (The damping
    term carries the kinetic sign because dh/dp = sign * qdot.)
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    s = float(spec.sign)
    qd = velocity(ms, q, p)
    v_dot = float(np.asarray(ms.grad_potential(q)) @ qd)
    w_dot = float(np.asarray(spec.grad_position_term(q)) @ qd)
    damp = float(qd @ ms.damping @ qd)
    return -s * v_dot + w_dot - s * damp + spec.alpha(spec.h(ms, q, p))


def filter_power(q: Array, p: Array, ms: MechanicalSystem, spec: EnergyCbfSpec,
                 tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Injected power of the active filter, specialised to mechanics.

    P = -1[psi<0] * (qdot^T B B^T dh/dp) / (dh/dp^T B B^T dh/dp) * psi.
    For sign = -1 this equals 1[psi<0] * psi <= 0 (pure damping).
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    psi = constraint_margin_mech(q, p, ms, spec)
    if psi >= 0.0:
        return 0.0
    qd = velocity(ms, q, p)
    h_p = float(spec.sign) * qd
    bbt = ms.input_matrix @ ms.input_matrix.T
    den = float(h_p @ bbt @ h_p)
    if den <= tol.degeneracy:
        raise CbfDegeneracyError(
            f"dh/dp^T BB^T dh/dp = {den:.3e} <= {tol.degeneracy:.1e} with psi = {psi:.6e} "
            f"at q = {q.tolist()}, p = {p.tolist()}")
    return -float(qd @ bbt @ h_p) / den * psi


def fused_stage_fn(ms: MechanicalSystem, spec: EnergyCbfSpec | None,
                   tol: Tolerances = DEFAULT_TOLERANCES):
    """Closed-loop stage evaluator sharing all mass-matrix work.

    Returns stage(x, t) -> (xdot, Hdot, stiffness) for the filtered
    mechanical dynamics, algebraically identical to driving the generic
    filter with the compiled system and barrier but evaluating M(q)^{-1} p
    and dK/dq once per call.  This is the simulator's hot path; the
    stiffness output (|u|_inf over the constraint-row norm, zero when
    inactive) drives the integrator's substepping.
    """
    n = ms.dof
    D = ms.damping
    B = ms.input_matrix
    damped = bool(D.any())
    s = float(spec.sign) if spec is not None else 0.0

    if n == 1:
        # Scalar arithmetic; numpy dispatch dominates at this size.
        d00 = float(D[0, 0])
        b00 = float(B[0, 0])
        m_const = not ms.dmass(np.zeros(1)).any()

        def stage1(x: Array, t: float) -> tuple[Array, float, float]:
            q, p = float(x[0]), float(x[1])
            qa = x[:1]
            m00 = float(ms.mass(qa)[0, 0])
            qd = p / m00
            dK = 0.0 if m_const else -0.5 * qd * float(ms.dmass(qa)[0][0, 0]) * qd
            H_q = dK + float(ms.grad_potential(qa)[0])
            p_dot = -H_q - d00 * qd
            h_dot = -qd * d00 * qd
            stiff = 0.0
            if spec is not None and t >= spec.t_on:
                h_p = s * qd
                h_val = s * 0.5 * p * qd + float(spec.position_term(qa)) + spec.c
                h_q = s * dK + float(np.asarray(spec.grad_position_term(qa)).reshape(-1)[0])
                psi = h_q * qd - h_p * H_q - h_p * d00 * qd + spec.alpha(h_val)
                if psi < 0.0:
                    a = b00 * h_p
                    denom = a * a
                    if denom <= tol.degeneracy:
                        raise CbfDegeneracyError(
                            f"dh/dp^T BB^T dh/dp = {denom:.3e} <= {tol.degeneracy:.1e} "
                            f"with psi = {psi:.6e} at q = [{q}], p = [{p}]")
                    u = -(a / denom) * psi
                    p_dot += b00 * u
                    h_dot += b00 * qd * u
                    stiff = abs(u) / (abs(a) + 1e-9)
            return np.array([qd, p_dot]), h_dot, stiff

        return stage1

    def stage(x: Array, t: float) -> tuple[Array, float, float]:
        q, p = x[:n], x[n:]
        qd = _solve_mass(ms.mass(q), p, q)
        dK = _dkinetic_from_qd(ms, q, qd)
        H_q = dK + ms.grad_potential(q)
        if damped:
            d_qd = D @ qd
            p_dot = -H_q - d_qd
            h_dot = -float(qd @ d_qd)
        else:
            d_qd = None
            p_dot = -H_q
            h_dot = 0.0
        stiff = 0.0
        if spec is not None and t >= spec.t_on:
            h_p = s * qd
            h_val = s * 0.5 * float(p @ qd) + float(spec.position_term(q)) + spec.c
            h_q = s * dK + np.asarray(spec.grad_position_term(q), dtype=float)
            psi = float(h_q @ qd) - float(h_p @ H_q) + spec.alpha(h_val)
            if damped:
                psi -= float(h_p @ d_qd)
            if psi < 0.0:
                a = B.T @ h_p
                denom = float(a @ a)
                if denom <= tol.degeneracy:
                    raise CbfDegeneracyError(
                        f"dh/dp^T BB^T dh/dp = {denom:.3e} <= {tol.degeneracy:.1e} "
                        f"with psi = {psi:.6e} at q = {q.tolist()}, p = {p.tolist()}")
                u = -(a / denom) * psi
                p_dot = p_dot + B @ u
                h_dot += float((B.T @ qd) @ u)
                stiff = float(np.abs(u).max()) / (np.sqrt(denom) + 1e-9)
        return np.concatenate([qd, p_dot]), h_dot, stiff

    return stage


def fused_energy_fns(ms: MechanicalSystem):
    """(H, gradH) evaluators sharing the velocity solve, for projection."""
    n = ms.dof

    if n == 1:
        m_const = not ms.dmass(np.zeros(1)).any()

        def hamiltonian1(x: Array) -> float:
            qa, p = x[:1], float(x[1])
            return 0.5 * p * p / float(ms.mass(qa)[0, 0]) + float(ms.potential(qa))

        def grad1(x: Array) -> Array:
            qa, p = x[:1], float(x[1])
            qd = p / float(ms.mass(qa)[0, 0])
            dK = 0.0 if m_const else -0.5 * qd * float(ms.dmass(qa)[0][0, 0]) * qd
            return np.array([dK + float(ms.grad_potential(qa)[0]), qd])

        return hamiltonian1, grad1

    def hamiltonian(x: Array) -> float:
        q, p = x[:n], x[n:]
        return 0.5 * float(p @ _solve_mass(ms.mass(q), p, q)) + float(ms.potential(q))

    def grad(x: Array) -> Array:
        q, p = x[:n], x[n:]
        qd = _solve_mass(ms.mass(q), p, q)
        return np.concatenate([_dkinetic_from_qd(ms, q, qd) + ms.grad_potential(q), qd])

    return hamiltonian, grad


def make_mass_spring(m: float = 2.0, k: float = 0.5) -> MechanicalSystem:
    """Undamped unit-actuated mass-spring oscillator, H = p^2/2m + k q^2/2."""
    mass = np.array([[float(m)]])
    dmass = np.zeros((1, 1, 1))
    return MechanicalSystem(
        dof=1,
        mass=lambda q: mass,
        dmass=lambda q: dmass,
        potential=lambda q: 0.5 * k * float(q[0]) ** 2,
        grad_potential=lambda q: np.array([k * float(q[0])]),
        damping=np.zeros((1, 1)),
        input_matrix=np.eye(1),
    )


def make_double_pendulum(m1: float = 1.5, m2: float = 1.5,
                         l1: float = 1.0, l2: float = 1.0,
                         b: float = 0.3, gravity: float = 9.81) -> MechanicalSystem:
    """Planar double pendulum with point masses at the link tips.

    Coordinates are relative joint angles measured from the downward
    vertical, so the gravitational potential

        V(q) = -(m1 + m2) g l1 cos q1 - m2 g l2 cos(q1 + q2)

    is negative below the first joint and minimal at (0, 0).  Viscous
    damping b acts in both joints (D = b I) and both joints are directly
    actuated (B = I).
    """
    D = b * np.eye(2)
    B = np.eye(2)

    def mass(q: Array) -> Array:
        c2 = np.cos(q[1])
        m11 = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2.0 * m2 * l1 * l2 * c2
        m12 = m2 * l2 * l2 + m2 * l1 * l2 * c2
        m22 = m2 * l2 * l2
        return np.array([[m11, m12], [m12, m22]])

    def dmass(q: Array) -> Array:
        s2 = np.sin(q[1])
        d2 = np.array([[-2.0 * m2 * l1 * l2 * s2, -m2 * l1 * l2 * s2],
                       [-m2 * l1 * l2 * s2, 0.0]])
        return np.stack([np.zeros((2, 2)), d2])

    def potential(q: Array) -> float:
        return float(-(m1 + m2) * gravity * l1 * np.cos(q[0])
                     - m2 * gravity * l2 * np.cos(q[0] + q[1]))

    def grad_potential(q: Array) -> Array:
        s01 = np.sin(q[0] + q[1])
        return np.array([(m1 + m2) * gravity * l1 * np.sin(q[0]) + m2 * gravity * l2 * s01,
                         m2 * gravity * l2 * s01])

    return MechanicalSystem(dof=2, mass=mass, dmass=dmass, potential=potential,
                            grad_potential=grad_potential, damping=D, input_matrix=B)


@dataclass(frozen=True)
class MechanicalReport:
    """Result of sampling-based validation of a MechanicalSystem."""

    n_samples: int
    min_mass_eigenvalue: float
    max_mass_asymmetry: float
    max_dmass_error: float
    max_potential_grad_error: float
    min_damping_eigenvalue: float
    min_input_singular_value: float
    failures: tuple[str, ...]

    @property
    def passed(self) -> bool:
        return not self.failures


def validate_mechanical(ms: MechanicalSystem, samples: Sequence[Array],
                        tol: Tolerances = DEFAULT_TOLERANCES) -> MechanicalReport:
    """Check inertia SPD-ness, dM/dq and dV/dq against finite differences.

    ``samples`` are configuration vectors q.  Raises ValueError when empty.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("validate_mechanical needs at least one configuration sample")

    min_eig = np.inf
    max_asym = 0.0
    max_dm = 0.0
    max_dv = 0.0
    step = tol.grad_step
    for q in samples:
        q = np.asarray(q, dtype=float)
        M = ms.mass(q)
        max_asym = max(max_asym, float(np.abs(M - M.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (M + M.T)).min()))
        max_dv = max(max_dv, gradient_rel_error(ms.potential, ms.grad_potential, q, step))
        dm_an = ms.dmass(q)
        scale = max(1.0, float(np.abs(M).max()))
        for i in range(ms.dof):
            e = np.zeros(ms.dof)
            e[i] = step
            dm_fd = (ms.mass(q + e) - ms.mass(q - e)) / (2.0 * step)
            max_dm = max(max_dm, float(np.abs(dm_an[i] - dm_fd).max()) / scale)

    d_eigs = np.linalg.eigvalsh(0.5 * (ms.damping + ms.damping.T))
    min_sv = float(np.linalg.svd(ms.input_matrix, compute_uv=False).min())

    failures = []
    if min_eig < tol.spd_min_eig:
        failures.append(f"M(q) not SPD: min eigenvalue {min_eig:.3e} < {tol.spd_min_eig:.1e}")
    if max_asym > tol.sym:
        failures.append(f"M(q) not symmetric: max defect {max_asym:.3e}")
    if max_dm > tol.grad_rel:
        failures.append(f"dmass mismatch: max relative error {max_dm:.3e} > {tol.grad_rel:.1e}")
    if max_dv > tol.grad_rel:
        failures.append(f"grad_potential mismatch: max relative error {max_dv:.3e} > {tol.grad_rel:.1e}")
    if np.abs(ms.damping - ms.damping.T).max() > tol.sym or d_eigs.min() < -tol.psd:
        failures.append("damping matrix not symmetric PSD")
    if min_sv < tol.min_sv:
        failures.append(f"input matrix rank deficient: min singular value {min_sv:.3e}")

    return MechanicalReport(n_samples=len(samples), min_mass_eigenvalue=min_eig,
                            max_mass_asymmetry=max_asym, max_dmass_error=max_dm,
                            max_potential_grad_error=max_dv,
                            min_damping_eigenvalue=float(d_eigs.min()),
                            min_input_singular_value=min_sv, failures=tuple(failures))
