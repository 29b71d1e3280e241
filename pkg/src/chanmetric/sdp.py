"""Semidefinite programs in standard LMI form and a certified solver front end.

A problem is a real decision vector ``y``, a linear objective, and a list
of Hermitian pencils ``A0 + sum_k y_k A_k`` that must be PSD.  Complex
decision variables are carried as pairs of real scalars.  Complex blocks
are real-embedded before they reach the conic solver: CVXOPT's
primal-dual interior-point SDP solver, with Clarabel as a fallback.
:func:`solve` re-checks the returned point itself and only reports
``optimal`` when the duality gap and the block feasibility pass that check.
"""

from __future__ import annotations

import contextlib
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .matlin import ValidationError, real_embed

__all__ = [
    "Affine",
    "LmiBlock",
    "SdpProblem",
    "SdpSolution",
    "SdpError",
    "ProblemBuilder",
    "solve",
    "lmi_contraction",
    "lmi_spectral_lb",
    "lmi_opnorm_ub",
    "lmi_quad_epigraph",
    "dump_problem",
    "dump_to",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERIC_FAILURE = "numeric-failure"


class SdpError(RuntimeError):
    """Raised when a solve does not end with a certified optimum."""

    def __init__(self, message: str, solution: "SdpSolution | None" = None):
        super().__init__(message)
        self.solution = solution


class Affine:
    """Complex matrix affine in the real decision vector: ``C + sum_k y[idx_k] M_k``.

    Supports the few operations the program builders need: addition,
    scaling, multiplication by constant matrices, adjoint and block
    assembly.  Coefficient matrices are kept dense, stacked along axis 0.
    """

    __slots__ = ("const", "idx", "mats")
    # make ``ndarray - Affine`` dispatch to the reflected methods below
    __array_ufunc__ = None

    def __init__(self, const, idx=None, mats=None):
        self.const = np.asarray(const, dtype=np.complex128)
        if self.const.ndim != 2:
            raise ValidationError("Affine expressions are matrices")
        r, c = self.const.shape
        if idx is None:
            self.idx = np.zeros(0, dtype=np.int64)
            self.mats = np.zeros((0, r, c), dtype=np.complex128)
        else:
            self.idx = np.asarray(idx, dtype=np.int64)
            self.mats = np.asarray(mats, dtype=np.complex128).reshape(len(self.idx), r, c)

    @classmethod
    def constant(cls, m) -> "Affine":
        return cls(m)

    @classmethod
    def scalar_var(cls, index: int) -> "Affine":
        return cls(np.zeros((1, 1)), [index], np.ones((1, 1, 1)))

    @classmethod
    def from_basis(cls, re_idx, im_idx, basis, const=None) -> "Affine":
        """``sum_k (y[re_k] + i y[im_k]) B_k`` for complex coefficients split in two reals."""
        basis = np.asarray(basis, dtype=np.complex128)
        const = np.zeros(basis.shape[1:], dtype=np.complex128) if const is None else const
        idx = np.concatenate([np.asarray(re_idx), np.asarray(im_idx)])
        mats = np.concatenate([basis, 1j * basis])
        return cls(const, idx, mats)

    @property
    def shape(self) -> tuple[int, int]:
        return self.const.shape

    def _combine(self) -> "Affine":
        if len(self.idx) == len(np.unique(self.idx)):
            return self
        uniq, inv = np.unique(self.idx, return_inverse=True)
        mats = np.zeros((len(uniq),) + self.const.shape, dtype=np.complex128)
        np.add.at(mats, inv, self.mats)
        return Affine(self.const, uniq, mats)

    def __add__(self, other) -> "Affine":
        if not isinstance(other, Affine):
            return Affine(self.const + np.asarray(other), self.idx, self.mats)
        if other.shape != self.shape:
            raise ValidationError(f"shape mismatch {self.shape} + {other.shape}")
        return Affine(
            self.const + other.const,
            np.concatenate([self.idx, other.idx]),
            np.concatenate([self.mats, other.mats]),
        )._combine()

    __radd__ = __add__

    def __neg__(self) -> "Affine":
        return Affine(-self.const, self.idx, -self.mats)

    def __sub__(self, other) -> "Affine":
        return self + (-other if isinstance(other, Affine) else -np.asarray(other))

    def __rsub__(self, other) -> "Affine":
        return (-self) + other

    def __mul__(self, scalar) -> "Affine":
        return Affine(scalar * self.const, self.idx, scalar * self.mats)

    __rmul__ = __mul__

    def __matmul__(self, m) -> "Affine":
        m = np.asarray(m, dtype=np.complex128)
        return Affine(self.const @ m, self.idx, self.mats @ m)

    def __rmatmul__(self, m) -> "Affine":
        m = np.asarray(m, dtype=np.complex128)
        return Affine(m @ self.const, self.idx, m @ self.mats)

    @property
    def H(self) -> "Affine":
        return Affine(self.const.conj().T, self.idx, np.conj(np.swapaxes(self.mats, 1, 2)))

    def value(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.const + np.tensordot(y[self.idx], self.mats, axes=1)

    @staticmethod
    def bmat(rows: Sequence[Sequence["Affine | np.ndarray"]]) -> "Affine":
        """Block matrix; plain arrays are treated as constants."""
        rows = [[r if isinstance(r, Affine) else Affine(r) for r in row] for row in rows]
        heights = [row[0].shape[0] for row in rows]
        widths = [blk.shape[1] for blk in rows[0]]
        const = np.block([[blk.const for blk in row] for row in rows])
        idx_all = np.unique(np.concatenate([blk.idx for row in rows for blk in row]))
        mats = np.zeros((len(idx_all),) + const.shape, dtype=np.complex128)
        pos = {int(k): n for n, k in enumerate(idx_all)}
        r0 = 0
        for row, h in zip(rows, heights):
            c0 = 0
            for blk, w in zip(row, widths):
                if blk.shape != (h, w):
                    raise ValidationError("inconsistent block sizes in bmat")
                for k, m in zip(blk.idx, blk.mats):
                    mats[pos[int(k)], r0 : r0 + h, c0 : c0 + w] += m
                c0 += w
            r0 += h
        return Affine(const, idx_all, mats)


@dataclass
class LmiBlock:
    """Constraint ``expr`` PSD for a square Hermitian affine expression."""

    expr: Affine
    name: str = ""

    def __post_init__(self):
        r, c = self.expr.shape
        if r != c:
            raise ValidationError(f"LMI block {self.name!r} is not square")
        herm = max(
            np.max(np.abs(self.expr.const - self.expr.const.conj().T), initial=0.0),
            np.max(np.abs(self.expr.mats - np.conj(np.swapaxes(self.expr.mats, 1, 2))), initial=0.0),
        )
        if herm > 1e-10:
            raise ValidationError(f"LMI block {self.name!r} is not Hermitian (asymmetry {herm:.2e})")

    @property
    def dim(self) -> int:
        return self.expr.shape[0]

    @property
    def is_real(self) -> bool:
        return not (np.any(self.expr.const.imag) or np.any(self.expr.mats.imag))

    def min_eig(self, y) -> float:
        m = self.expr.value(y)
        return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])


@dataclass
class SdpProblem:
    """``sense`` (``"max"``/``"min"``) of ``objective @ y`` subject to every block PSD."""

    num_vars: int
    objective: np.ndarray
    sense: str
    blocks: list[LmiBlock]
    var_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.sense not in ("max", "min"):
            raise ValidationError(f"sense must be 'max' or 'min', got {self.sense!r}")
        if self.objective.shape != (self.num_vars,):
            raise ValidationError("objective length must equal the number of variables")
        for blk in self.blocks:
            if len(blk.expr.idx) and (blk.expr.idx.min() < 0 or blk.expr.idx.max() >= self.num_vars):
                raise ValidationError(f"block {blk.name!r} references an undeclared variable")


@dataclass
class SdpSolution:
    status: str
    value: float
    y: np.ndarray
    gap: float
    iterations: int
    primal_value: float = float("nan")
    dual_value: float = float("nan")
    min_block_eig: float = float("nan")
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL


class ProblemBuilder:
    """Incremental construction of an :class:`SdpProblem`."""

    def __init__(self):
        self.names: list[str] = []
        self.blocks: list[LmiBlock] = []
        self.objective: dict[int, float] = {}

    def var(self, name: str) -> int:
        self.names.append(name)
        return len(self.names) - 1

    def vars(self, name: str, count: int) -> np.ndarray:
        start = len(self.names)
        self.names.extend(f"{name}[{k}]" for k in range(count))
        return np.arange(start, start + count)

    def complex_matrix(self, name: str, rows: int, cols: int) -> Affine:
        """A free complex ``rows x cols`` matrix variable (two reals per entry)."""
        n = rows * cols
        re = self.vars(f"{name}.re", n)
        im = self.vars(f"{name}.im", n)
        basis = np.eye(n, dtype=np.complex128).reshape(n, rows, cols)
        return Affine.from_basis(re, im, basis)

    def add(self, block: LmiBlock | Affine, name: str = "") -> None:
        self.blocks.append(block if isinstance(block, LmiBlock) else LmiBlock(block, name))

    def build(self, objective: dict[int, float], sense: str) -> SdpProblem:
        c = np.zeros(len(self.names))
        for k, v in objective.items():
            c[k] = v
        return SdpProblem(len(self.names), c, sense, list(self.blocks), list(self.names))


def lmi_contraction(w: Affine, name: str = "contraction") -> LmiBlock:
    """``[[I, W^dag], [W, I]] >= 0``, i.e. ``||W|| <= 1``."""
    r, c = w.shape
    return LmiBlock(Affine.bmat([[np.eye(c), w.H], [w, np.eye(r)]]), name)


def lmi_spectral_lb(pencil: Affine, t: int, name: str = "spectral") -> LmiBlock:
    """``pencil - t I >= 0``, i.e. ``lambda_min(pencil) >= t``."""
    n = pencil.shape[0]
    return LmiBlock(pencil + _scaled_identity(t, n, -1.0), name)


def _scaled_identity(t: int, n: int, sign: float) -> Affine:
    return Affine(np.zeros((n, n)), [t], sign * np.eye(n)[None])


def lmi_opnorm_ub(pencil: Affine, t: int, name: str = "opnorm") -> LmiBlock:
    """``[[t I, P^dag], [P, t I]] >= 0``, i.e. ``||P|| <= t``."""
    r, c = pencil.shape
    return LmiBlock(
        Affine.bmat([[_scaled_identity(t, c, 1.0), pencil.H], [pencil, _scaled_identity(t, r, 1.0)]]),
        name,
    )


def lmi_quad_epigraph(t2: int, s: int, name: str = "epigraph") -> LmiBlock:
    """``[[1, t2], [t2, s]] >= 0``, i.e. ``s >= t2^2``."""
    mats = np.zeros((2, 2, 2))
    mats[0, 0, 1] = mats[0, 1, 0] = 1.0
    mats[1, 1, 1] = 1.0
    return LmiBlock(Affine(np.diag([1.0, 0.0]), [t2, s], mats), name)


def _svec_indices(n: int):
    # Clarabel's PSD triangle: upper triangle, column by column, off-diagonals scaled sqrt(2).
    cols, rows = np.tril_indices(n)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, scale


def _real_block(block: LmiBlock) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    expr = block.expr
    if block.is_real:
        return expr.const.real, expr.idx, expr.mats.real
    const = real_embed(expr.const)
    re, im = expr.mats.real, expr.mats.imag
    mats = np.concatenate(
        [np.concatenate([re, -im], axis=2), np.concatenate([im, re], axis=2)], axis=1
    )
    return const, expr.idx, mats


def _thread_cap() -> int:
    try:
        return max(0, int(os.environ.get("CHANMETRIC_THREADS", "0")))
    except ValueError:
        return 0


def _triplets(problem: SdpProblem):
    """Per block: real constant, and ``-A_k`` as a sparse ``(dim*dim, num_vars)`` matrix (column-major vec)."""
    out = []
    for block in problem.blocks:
        const, idx, mats = _real_block(block)
        dim = const.shape[0]
        k, i, j = np.nonzero(mats)
        g = sp.csc_matrix(
            (-mats[k, i, j], (i + j * dim, idx[k] if len(idx) else k)), shape=(dim * dim, problem.num_vars)
        )
        out.append((const, g))
    return out


def _solve_cvxopt(problem: SdpProblem, tol: float, max_iter: int, verbose: bool):
    import cvxopt
    from cvxopt import solvers

    gs, hs = [], []
    for const, g in _triplets(problem):
        coo = g.tocoo()
        gs.append(cvxopt.spmatrix(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), g.shape))
        hs.append(cvxopt.matrix(np.ascontiguousarray(const, dtype=float)))
    sign = -1.0 if problem.sense == "max" else 1.0
    c = cvxopt.matrix(sign * problem.objective)
    options = {
        "show_progress": verbose,
        "abstol": 0.1 * tol,
        "reltol": 0.1 * tol,
        "feastol": min(1e-9, tol),
        "maxiters": max_iter,
    }
    try:
        res = solvers.sdp(c, Gs=gs, hs=hs, options=options)
    except (ArithmeticError, ValueError) as exc:
        return None, f"cvxopt: {exc}"
    y = np.array(res["x"]).ravel() if res["x"] is not None else np.full(problem.num_vars, np.nan)
    status = {"optimal": "Solved", "primal infeasible": "PrimalInfeasible", "dual infeasible": "DualInfeasible"}.get(
        res["status"], "AlmostSolved" if res["status"] == "unknown" else res["status"]
    )
    primal = res["primal objective"]
    dual = res["dual objective"]
    return (
        status,
        y,
        sign * primal if primal is not None else float("nan"),
        sign * dual if dual is not None else float("nan"),
        int(res["iterations"]),
    ), f"cvxopt:{res['status']}"


def _solve_clarabel(problem: SdpProblem, tol: float, max_iter: int, verbose: bool, overrides: dict):
    import clarabel

    n = problem.num_vars
    a_parts, b_parts, cones = [], [], []
    for const, g in _triplets(problem):
        dim = const.shape[0]
        rows, cols, scale = _svec_indices(dim)
        b_parts.append(const[rows, cols] * scale)
        sel = sp.csr_matrix(g)[rows + cols * dim]
        a_parts.append(sp.diags(scale) @ sel)
        cones.append(clarabel.PSDTriangleConeT(dim))
    a = sp.vstack(a_parts, format="csc")
    a.eliminate_zeros()
    b = np.concatenate(b_parts)
    sign = -1.0 if problem.sense == "max" else 1.0
    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = min(1e-8, tol)
    settings.tol_ktratio = min(1e-6, tol)
    settings.max_iter = max_iter
    settings.max_threads = _thread_cap()
    for key, val in overrides.items():
        setattr(settings, key, val)
    sol = clarabel.DefaultSolver(sp.csc_matrix((n, n)), sign * problem.objective, a, b, cones, settings).solve()
    status = str(sol.status).split(".")[-1]
    return (
        status,
        np.asarray(sol.x, dtype=float),
        sign * float(sol.obj_val),
        sign * float(sol.obj_val_dual),
        int(sol.iterations),
    ), f"clarabel:{status}"


# CVXOPT first: on these small dense programs it reaches 1e-11 gaps where
# Clarabel often stops near 1e-6.  Clarabel variants follow as fallbacks.
_BACKENDS = (
    ("cvxopt", {}),
    ("clarabel", {}),
    ("clarabel", {"static_regularization_enable": False}),
)


def solve(problem: SdpProblem, tol: float = 1e-9, *, max_iter: int = 200, verbose: bool = False) -> SdpSolution:
    """Solve ``problem`` and certify the result.

    The returned status is ``optimal`` only when the solver converged, the
    primal-dual gap is at most ``tol * max(1, |value|)`` and every block is
    PSD within ``10 * tol`` at the returned point.  Otherwise the status
    is ``infeasible``, ``unbounded`` or ``numeric-failure``.
    """
    if not 1e-12 <= tol <= 1e-2:
        raise ValidationError(f"tol must lie in [1e-12, 1e-2], got {tol}")
    if _dump_stream is not None:
        dump_problem(problem, _dump_stream)
    last = None
    for backend, overrides in _BACKENDS:
        if backend == "cvxopt":
            raw, message = _solve_cvxopt(problem, tol, max_iter, verbose)
        else:
            raw, message = _solve_clarabel(problem, tol, max_iter, verbose, overrides)
        if raw is None:
            last = SdpSolution(NUMERIC_FAILURE, float("nan"), np.full(problem.num_vars, np.nan), float("inf"), 0, message=message)
            continue
        last = _certify(problem, raw, message, tol)
        if last.status != NUMERIC_FAILURE:
            return last
        log.debug("SDP backend %s not certified (gap %.2e)", message, last.gap)
    log.warning(
        "SDP not certified: solver=%s gap=%.3e min_eig=%.3e tol=%.1e",
        last.message, last.gap, last.min_block_eig, tol,
    )
    return last


def _certify(problem: SdpProblem, raw, message: str, tol: float) -> SdpSolution:
    status_name, y, primal, dual, iterations = raw
    finite = bool(np.all(np.isfinite(y)))
    value = float(problem.objective @ y) if finite else float("nan")
    gap = abs(primal - dual) if np.isfinite(primal) and np.isfinite(dual) else float("inf")

    if status_name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SdpSolution(INFEASIBLE, float("nan"), y, float("inf"), iterations, message=message)
    if status_name in ("DualInfeasible", "AlmostDualInfeasible"):
        return SdpSolution(UNBOUNDED, float("nan"), y, float("inf"), iterations, message=message)

    min_eig = min((blk.min_eig(y) for blk in problem.blocks), default=0.0) if finite else float("-inf")
    scale = max(1.0, abs(value)) if np.isfinite(value) else 1.0
    certified = (
        status_name in ("Solved", "AlmostSolved")
        and gap <= tol * scale
        and abs(value - primal) <= tol * scale
        and min_eig >= -10 * tol * scale
    )
    status = OPTIMAL if certified else NUMERIC_FAILURE
    return SdpSolution(status, value, y, gap, iterations, primal, dual, min_eig, message)


def solve_or_raise(problem: SdpProblem, tol: float = 1e-9, *, context: str = "") -> SdpSolution:
    sol = solve(problem, tol)
    if not sol.ok:
        where = f" ({context})" if context else ""
        raise SdpError(
            f"SDP{where} ended with status {sol.status} [{sol.message}], gap={sol.gap:.3e}", sol
        )
    return sol


_dump_stream = None


@contextlib.contextmanager
def dump_to(stream):
    """Within the block, write every problem passed to :func:`solve` to ``stream``."""
    global _dump_stream
    previous, _dump_stream = _dump_stream, stream
    try:
        yield stream
    finally:
        _dump_stream = previous


def dump_problem(problem: SdpProblem, stream) -> None:
    """Write ``problem`` as a sparse triplet listing.

    Format, one record per line::

        sdp 1
        vars <n>
        sense <max|min>
        c <k> <value>
        block <b> <dim> <name>
        a <b> <k> <i> <j> <re> <im>     # k = 0 is the constant term, k >= 1 is y[k-1]

    Only the upper triangle of each Hermitian block is listed.
    """
    stream.write("sdp 1\n")
    stream.write(f"vars {problem.num_vars}\n")
    stream.write(f"sense {problem.sense}\n")
    for k in np.flatnonzero(problem.objective):
        stream.write(f"c {k} {problem.objective[k]!r}\n")
    for b, blk in enumerate(problem.blocks):
        stream.write(f"block {b} {blk.dim} {blk.name or '-'}\n")
        terms: Iterable = [(0, blk.expr.const)] + [(int(k) + 1, m) for k, m in zip(blk.expr.idx, blk.expr.mats)]
        for k, m in terms:
            ii, jj = np.nonzero(np.triu(m))
            for i, j in zip(ii, jj):
                v = m[i, j]
                stream.write(f"a {b} {k} {i} {j} {v.real!r} {v.imag!r}\n")
