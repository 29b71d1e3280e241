"""Eigen-angle seminorms of unitaries and the channel angle between unitary channels."""

from __future__ import annotations

import numpy as np

from .matlin import ValidationError, as_matrix, is_unitary, unitary_eig_angles

__all__ = ["norm_max", "norm_g", "c_of_u", "theta_qc_unitary", "HALF_PI"]

HALF_PI = 0.5 * np.pi


def norm_max(u, tol: float | None = None) -> float:
    """Largest absolute eigen-angle."""
    return float(np.max(np.abs(unitary_eig_angles(u, tol))))


def norm_g(u, tol: float | None = None) -> float:
    """Largest absolute eigen-angle after the best global phase.

    Equals the half-width of the shortest arc of the unit circle holding
    every eigenvalue. The shortest arc is the complement of the largest
    gap between cyclically consecutive eigen-angles.
    """
    theta = unitary_eig_angles(u, tol)
    if theta.size == 1:
        return 0.0
    # with spread <= pi the wrap-around gap is the largest, so this is (max - min)/2
    gaps = np.diff(np.concatenate([theta, [theta[0] + 2 * np.pi]]))
    arc = 2 * np.pi - float(np.max(gaps))
    return 0.5 * max(arc, 0.0)


def c_of_u(u, tol: float | None = None) -> float:
    """``min(norm_g(u), pi/2)``: the largest angle ``U`` can rotate a state away from itself."""
    return min(norm_g(u, tol), HALF_PI)


def theta_qc_unitary(u1, u2, tol: float | None = None) -> float:
    u1 = as_matrix(u1, square=True, name="u1")
    u2 = as_matrix(u2, square=True, name="u2")
    if u1.shape != u2.shape:
        raise ValidationError(f"unitaries have different shapes {u1.shape} and {u2.shape}")
    if not (is_unitary(u1, tol) and is_unitary(u2, tol)):
        raise ValidationError("theta_qc_unitary needs two unitary matrices")
    return c_of_u(u1.conj().T @ u2, tol)
