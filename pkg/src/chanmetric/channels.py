"""Kraus-operator channel model and channel algebra."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .matlin import DEFAULT_TOLERANCES, ValidationError, as_matrix, hermitian, is_unitary

__all__ = [
    "KrausChannel",
    "ChannelPair",
    "ResourceLimitError",
    "MAX_KRAUS",
    "MAX_DIM",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "validate",
    "tensor",
    "compose",
    "mix",
    "tensor_power",
    "choi",
    "choi_equal",
    "identity",
    "unitary_channel",
    "rotation_x",
    "dephasing",
    "depolarizing",
    "random_channel",
    "random_unitary",
    "hamiltonian_unitary",
]

MAX_KRAUS = 1024
MAX_DIM = 128

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


class ResourceLimitError(RuntimeError):
    """A construction would exceed the Kraus-count or dimension cap."""


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map ``rho -> sum_j F_j rho F_j^dag`` from ``dim_in`` to ``dim_out``.

    ``kraus`` is stored as a read-only array of shape ``(q, dim_out, dim_in)``.
    Two channels are equal as maps when their Choi matrices agree; use
    :func:`choi_equal` for that, never Kraus-list comparison.
    """

    kraus: np.ndarray

    def __post_init__(self):
        ops = np.array(self.kraus, dtype=np.complex128)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] == 0:
            raise ValidationError("a channel needs at least one Kraus operator of equal shape")
        ops.setflags(write=False)
        object.__setattr__(self, "kraus", ops)

    @classmethod
    def from_list(cls, ops: Sequence, *, check: bool = True) -> "KrausChannel":
        mats = [as_matrix(op, name="Kraus operator") for op in ops]
        if not mats:
            raise ValidationError("a channel needs at least one Kraus operator")
        shapes = {m.shape for m in mats}
        if len(shapes) != 1:
            raise ValidationError(f"Kraus operators have mismatched shapes {sorted(shapes)}")
        ch = cls(np.stack(mats))
        if check:
            validate(ch)
        return ch

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    @property
    def num_kraus(self) -> int:
        return self.kraus.shape[0]

    def tp_residual(self) -> float:
        gram = np.einsum("kij,kil->jl", self.kraus.conj(), self.kraus)
        return float(np.linalg.norm(gram - np.eye(self.dim_in)))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=np.complex128)
        return np.einsum("kij,jl,kml->im", self.kraus, rho, self.kraus.conj())

    def extend(self, ancilla_dim: int) -> "KrausChannel":
        """The channel ``K (x) Id_ancilla``."""
        return tensor(self, identity(ancilla_dim))

    def __repr__(self) -> str:
        return f"KrausChannel(dim_in={self.dim_in}, dim_out={self.dim_out}, num_kraus={self.num_kraus})"


@dataclass(frozen=True)
class ChannelPair:
    a: KrausChannel
    b: KrausChannel

    def __post_init__(self):
        if (self.a.dim_in, self.a.dim_out) != (self.b.dim_in, self.b.dim_out):
            raise ValidationError(
                f"channel dimensions differ: ({self.a.dim_in}->{self.a.dim_out}) vs "
                f"({self.b.dim_in}->{self.b.dim_out})"
            )

    def swapped(self) -> "ChannelPair":
        return ChannelPair(self.b, self.a)


def validate(k: KrausChannel, tol: float | None = None) -> None:
    """Raise :class:`ValidationError` unless ``k`` is trace preserving within ``tol``."""
    tol = DEFAULT_TOLERANCES.trace_preserving if tol is None else tol
    if not isinstance(k, KrausChannel):
        raise ValidationError(f"expected KrausChannel, got {type(k).__name__}")
    if not np.all(np.isfinite(k.kraus)):
        raise ValidationError("Kraus operators have non-finite entries")
    res = k.tp_residual()
    if res > tol:
        raise ValidationError(
            f"trace preservation violated: ||sum F^dag F - I||_F = {res:.3e} > {tol:.1e}"
        )


def _check_caps(num_kraus: int, dim: int, max_kraus: int, max_dim: int) -> None:
    if num_kraus > max_kraus:
        raise ResourceLimitError(f"Kraus count {num_kraus} exceeds cap {max_kraus}")
    if dim > max_dim:
        raise ResourceLimitError(f"dimension {dim} exceeds cap {max_dim}")


def tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    """Parallel composition with Kraus set ``{A_i (x) B_j}``."""
    ops = np.einsum("iab,jcd->ijacbd", a.kraus, b.kraus)
    q = a.num_kraus * b.num_kraus
    return KrausChannel(ops.reshape(q, a.dim_out * b.dim_out, a.dim_in * b.dim_in))


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """Sequential composition ``second o first`` with Kraus set ``{S_i F_j}``."""
    if first.dim_out != second.dim_in:
        raise ValidationError(
            f"cannot compose: first maps to dim {first.dim_out}, second expects {second.dim_in}"
        )
    ops = np.einsum("iab,jbc->ijac", second.kraus, first.kraus)
    return KrausChannel(ops.reshape(-1, second.dim_out, first.dim_in))


def mix(channels: Sequence[KrausChannel], weights: Sequence[float]) -> KrausChannel:
    """Convex mixture; Kraus set is the concatenation of ``sqrt(w_c) F^(c)_j``."""
    w = np.asarray(weights, dtype=float)
    if len(channels) == 0 or w.shape != (len(channels),):
        raise ValidationError("need one weight per channel")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError(f"weights must be a probability vector, got {w.tolist()}")
    dims = {(c.dim_in, c.dim_out) for c in channels}
    if len(dims) != 1:
        raise ValidationError(f"channels in a mixture must share dimensions, got {sorted(dims)}")
    ops = np.concatenate([np.sqrt(wc) * c.kraus for c, wc in zip(channels, w)])
    return KrausChannel(ops)


def tensor_power(
    k: KrausChannel, n: int, *, max_kraus: int = MAX_KRAUS, max_dim: int = MAX_DIM
) -> KrausChannel:
    """``n``-fold parallel use of ``k``; refuses instead of exceeding the caps."""
    if n < 1:
        raise ValidationError(f"tensor power needs n >= 1, got {n}")
    _check_caps(k.num_kraus**n, max(k.dim_out, k.dim_in) ** n, max_kraus, max_dim)
    out = k
    for _ in range(n - 1):
        out = tensor(out, k)
    return out


def choi(k: KrausChannel) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| (x) K(|i><j|)`` (input factor first)."""
    # vec_j of F_k columns: C[(i,a),(j,b)] = sum_k F_k[a,i] conj(F_k[b,j])
    c = np.einsum("kai,kbj->iajb", k.kraus, k.kraus.conj())
    d = k.dim_in * k.dim_out
    c = c.reshape(d, d)
    return 0.5 * (c + c.conj().T)


def choi_equal(a: KrausChannel, b: KrausChannel, tol: float = 1e-9) -> bool:
    if (a.dim_in, a.dim_out) != (b.dim_in, b.dim_out):
        return False
    return bool(np.max(np.abs(choi(a) - choi(b))) <= tol)


def identity(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d, dtype=np.complex128)[None])


def unitary_channel(u) -> KrausChannel:
    u = as_matrix(u, square=True, name="unitary")
    if not is_unitary(u):
        raise ValidationError("unitary_channel needs a unitary matrix")
    return KrausChannel(u[None])


def rotation_x(theta: float) -> KrausChannel:
    """Qubit channel ``rho -> e^{i theta X} rho e^{-i theta X}``."""
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValidationError("rotation angle must be finite")
    return KrausChannel(expm(1j * theta * PAULI_X)[None])


def dephasing(eta: float) -> KrausChannel:
    """``rho -> (1+eta)/2 rho + (1-eta)/2 Z rho Z`` with exactly two Kraus operators."""
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValidationError(f"dephasing parameter must lie in [0, 1], got {eta}")
    eye = np.eye(2, dtype=np.complex128)
    return KrausChannel(np.stack([np.sqrt((1 + eta) / 2) * eye, np.sqrt((1 - eta) / 2) * PAULI_Z]))


def depolarizing(p: float, d: int = 2) -> KrausChannel:
    """``rho -> (1-p) rho + p Tr(rho) I/d`` via the Weyl (clock-and-shift) basis."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"depolarizing probability must lie in [0, 1], got {p}")
    omega = np.exp(2j * np.pi / d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(omega ** np.arange(d))
    ops = []
    for a, b in itertools.product(range(d), repeat=2):
        weight = 1 - p + p / d**2 if (a, b) == (0, 0) else p / d**2
        ops.append(np.sqrt(weight) * np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return KrausChannel(np.stack(ops).astype(np.complex128))


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_channel(
    dim_in: int, dim_out: int | None = None, num_kraus: int = 2, *, rng: np.random.Generator
) -> KrausChannel:
    """Random channel from an isometry ``C^{dim_in} -> C^{num_kraus} (x) C^{dim_out}``."""
    dim_out = dim_in if dim_out is None else dim_out
    rows = num_kraus * dim_out
    if rows < dim_in:
        raise ValidationError("num_kraus * dim_out must be at least dim_in")
    z = rng.standard_normal((rows, dim_in)) + 1j * rng.standard_normal((rows, dim_in))
    q, _ = np.linalg.qr(z)
    return KrausChannel(q.reshape(num_kraus, dim_out, dim_in))


def hamiltonian_unitary(h, x: float) -> np.ndarray:
    """``exp(-i x H)`` for a Hermitian generator."""
    return expm(-1j * x * hermitian(h))
