"""Dense complex linear-algebra kernels shared by the rest of the package.

Matrices are plain ``numpy`` arrays with ``complex128`` dtype.  The helpers
here only add validation and the handful of conventions the channel code
depends on (eigen-angle sign, Hermitian symmetrization, real embedding).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NumericalError",
    "ValidationError",
    "Tolerances",
    "DEFAULT_TOLERANCES",
    "as_matrix",
    "hermitian",
    "herm_eigvals",
    "herm_eigh",
    "unitary_eig_angles",
    "op_norm",
    "real_embed",
    "is_unitary",
    "psd_sqrt",
    "dagger",
]


class ValidationError(ValueError):
    """Input violates a documented precondition or type invariant."""


class NumericalError(ArithmeticError):
    """A numerical kernel failed to produce a trustworthy result."""


@dataclass(frozen=True)
class Tolerances:
    """Validation thresholds used across the package.

    ``unitary`` bounds ``||U^dag U - I||_F``; ``hermitian`` bounds the
    max-entry asymmetry accepted before symmetrization.
    """

    unitary: float = 1e-8
    hermitian: float = 1e-10
    trace_preserving: float = 1e-8


DEFAULT_TOLERANCES = Tolerances()


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def as_matrix(m, *, square: bool = False, name: str = "matrix") -> np.ndarray:
    """Coerce ``m`` into a finite 2-D complex array."""
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    return arr


def hermitian(m, tol: float | None = None) -> np.ndarray:
    """Validate near-Hermiticity and return the symmetrized ``(M + M^dag)/2``."""
    tol = DEFAULT_TOLERANCES.hermitian if tol is None else tol
    arr = as_matrix(m, square=True, name="hermitian matrix")
    asym = np.max(np.abs(arr - arr.conj().T))
    if asym > tol:
        raise ValidationError(f"matrix is not Hermitian (max asymmetry {asym:.3e} > {tol:.1e})")
    return 0.5 * (arr + arr.conj().T)


def herm_eigh(m) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors of a Hermitian matrix."""
    h = hermitian(m)
    try:
        vals, vecs = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return vals, vecs


def herm_eigvals(m) -> np.ndarray:
    """All eigenvalues of a Hermitian matrix, sorted ascending."""
    h = hermitian(m)
    try:
        return np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"Hermitian eigensolver did not converge: {exc}") from exc


def is_unitary(u, tol: float | None = None) -> bool:
    tol = DEFAULT_TOLERANCES.unitary if tol is None else tol
    arr = np.asarray(u, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    return bool(np.linalg.norm(arr.conj().T @ arr - np.eye(arr.shape[0])) <= tol)


def unitary_eig_angles(u, tol: float | None = None) -> np.ndarray:
    """Eigen-angles ``theta_j`` of a unitary whose eigenvalues are ``exp(-i theta_j)``.

    Angles lie in ``(-pi, pi]``; at the branch cut ``+pi`` is returned.
    The result is sorted ascending.
    """
    arr = as_matrix(u, square=True, name="unitary")
    if not is_unitary(arr, tol):
        res = np.linalg.norm(arr.conj().T @ arr - np.eye(arr.shape[0]))
        raise ValidationError(f"matrix is not unitary (||U^dag U - I||_F = {res:.3e})")
    # Schur form of a normal matrix is diagonal and numerically stabler than eig.
    try:
        lam = np.linalg.eigvals(arr)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigensolver did not converge: {exc}") from exc
    theta = -np.angle(lam)
    theta = np.where(theta <= -np.pi + 1e-15, np.pi, theta)
    return np.sort(theta)


def op_norm(m) -> float:
    """Largest singular value."""
    arr = as_matrix(m, name="matrix")
    try:
        return float(np.linalg.norm(arr, 2))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"SVD did not converge: {exc}") from exc


def real_embed(m) -> np.ndarray:
    """Real representation ``[[Re M, -Im M], [Im M, Re M]]`` of a square complex matrix.

    Hermitian PSD inputs map to symmetric PSD outputs, and every eigenvalue
    of ``M`` appears twice in the embedding.
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"real_embed needs a square matrix, got shape {arr.shape}")
    re, im = arr.real, arr.imag
    return np.block([[re, -im], [im, re]])


def psd_sqrt(m) -> np.ndarray:
    """Principal square root of a Hermitian PSD matrix (negative eigenvalues clipped)."""
    vals, vecs = herm_eigh(m)
    vals = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * vals) @ vecs.conj().T
