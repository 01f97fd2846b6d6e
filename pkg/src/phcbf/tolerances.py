"""Central numerical tolerances.

Every structural check in the library (skew-symmetry, positive
semi-definiteness, gradient verification, filter degeneracy) reads its
threshold from one :class:`Tolerances` record so the numerical claims made
by validation reports are auditable in a single place.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Default thresholds used by structure validation and the safety filter.

    skew:           entrywise bound for J(x) + J(x)^T.
    psd:            lower bound for eigenvalues of R(x) and D (>= -psd).
    sym:            entrywise bound for symmetry checks of R, D and Y matrices.
    grad_rel:       relative error bound for analytic vs central-difference
                    gradients.
    grad_step:      step used by the central-difference gradient check.
    spd_min_eig:    strict positive-definiteness floor for mass matrices.
    min_sv:         smallest admissible singular value of input matrices.
    degeneracy:     floor for the filter denominator [h,h]_{gg^T} while the
                    filter is active; below it the closed form is undefined.
    bracket_zero:   magnitude under which {H,H}_J is accepted as zero.
    """

    skew: float = 1e-12
    psd: float = 1e-10
    sym: float = 1e-12
    grad_rel: float = 1e-5
    grad_step: float = 1e-6
    spd_min_eig: float = 1e-9
    min_sv: float = 1e-9
    degeneracy: float = 1e-12
    bracket_zero: float = 1e-10


DEFAULT_TOLERANCES = Tolerances()
