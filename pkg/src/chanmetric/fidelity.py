"""Fidelity, angle and Bures distance between quantum channels.

The fidelity of two channels with Kraus operators ``F_1i`` and ``F_2j`` is

    F(K1, K2) = max_{||W|| <= 1} 1/2 lambda_min(K_W + K_W^dag),
    K_W = sum_ij w_ij F_1i^dag F_2j,

solved here as a semidefinite program, or through its dual form (see
:mod:`chanmetric.dual`) where that is faster or more accurate.  ``W`` is
kept rectangular (``q1 x q2``) so the two channels may carry different
numbers of Kraus operators.  The angle is ``arccos F`` and the Bures
distance ``sqrt(2 - 2F)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import sdp
from .channels import ChannelPair, KrausChannel, tensor_power
from .dual import DualResult, dual_fidelity, dual_fidelity_tensor_power
from .matlin import ValidationError, op_norm
from .symmetry import irrep_frames, match_frames, pair_orbits

__all__ = [
    "FidelityResult",
    "ORTHO_THRESHOLD",
    "DEFAULT_SDP_TOL",
    "METHODS",
    "WParam",
    "k_w",
    "fidelity",
    "fidelity_tensor_power",
    "angle",
    "bures",
    "bures_kraus_min",
    "diamond_bounds",
    "min_norm_i_minus_kw",
]

DEFAULT_SDP_TOL = 1e-9
# fidelity at or below this is treated as orthogonal (angle pi/2)
ORTHO_THRESHOLD = 1e-7
# symmetric SDPs with more W orbits than this go to the dual method first
SDP_ORBIT_LIMIT = 100
METHODS = ("auto", "sdp", "dual")
# above 1 - this, interior-point solutions are re-derived by the dual method,
# which is exact to rounding for nearly equal channels
NEAR_IDENTICAL = 1e-3


@dataclass
class FidelityResult:
    fidelity: float
    angle: float
    bures: float
    w_opt: np.ndarray
    gap: float
    raw_value: float
    iterations: int = 0

    @property
    def perfectly_distinguishable(self) -> bool:
        return self.fidelity <= ORTHO_THRESHOLD


def _result(raw: float, w: np.ndarray, gap: float, iterations: int) -> FidelityResult:
    f = float(np.clip(raw, 0.0, 1.0))
    return FidelityResult(
        fidelity=f,
        angle=float(np.arccos(f)),
        bures=float(np.sqrt(max(2.0 - 2.0 * f, 0.0))),
        w_opt=w,
        gap=gap,
        raw_value=raw,
        iterations=iterations,
    )


def _kraus_products(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``G[i, j] = A_i^dag B_j`` with shape ``(q1, q2, d, d)``."""
    return np.einsum("iab,jac->ijbc", a.conj(), b)


def k_w(pair: ChannelPair, w) -> np.ndarray:
    """``sum_ij w_ij F_1i^dag F_2j`` for a ``q1 x q2`` coefficient matrix."""
    w = np.asarray(w, dtype=np.complex128)
    q1, q2 = pair.a.num_kraus, pair.b.num_kraus
    if w.shape != (q1, q2):
        raise ValidationError(f"W must have shape ({q1}, {q2}), got {w.shape}")
    return np.einsum("ij,iab,jac->bc", w, pair.a.kraus.conj(), pair.b.kraus)


class WParam:
    """A linear parameterization ``W = sum_k c_k B_k`` with complex ``c_k``.

    Holds everything the programs need: the ``K_W`` image of every basis
    element, the compressed contraction blocks whose norms bound ``||W||``,
    and the system frames on which ``K_W`` is block diagonal.
    """

    def __init__(self, kw_basis, contraction, system_frames, expand):
        self.kw_basis = kw_basis  # (K, d, d)
        self.contraction = contraction  # list of (K, r, c)
        self.system_frames = system_frames  # list of (d, k) with orthonormal columns
        self._expand = expand

    @property
    def size(self) -> int:
        return self.kw_basis.shape[0]

    @property
    def dim(self) -> int:
        return self.kw_basis.shape[1]

    @classmethod
    def dense(cls, pair: ChannelPair) -> "WParam":
        q1, q2 = pair.a.num_kraus, pair.b.num_kraus
        d = pair.a.dim_in
        kw = _kraus_products(pair.a.kraus, pair.b.kraus).reshape(q1 * q2, d, d)
        basis = np.eye(q1 * q2, dtype=np.complex128).reshape(q1 * q2, q1, q2)
        return cls(kw, [basis], [np.eye(d)], lambda c: c.reshape(q1, q2))

    @classmethod
    def symmetric(cls, a: KrausChannel, b: KrausChannel, n: int) -> "WParam":
        """Permutation-invariant ``W`` for the pair ``(a^{(x)n}, b^{(x)n})``."""
        ta, tb = tensor_power(a, n), tensor_power(b, n)
        q1, q2 = a.num_kraus, b.num_kraus
        orbit, count = pair_orbits(q1, q2, n)
        d = ta.dim_in
        flat = orbit.reshape(-1)
        # unit-Frobenius orbit indicators keep the program well scaled
        norm = 1.0 / np.sqrt(np.bincount(flat, minlength=count))
        kw = np.zeros((count, d, d), dtype=np.complex128)
        prods = _kraus_products(ta.kraus, tb.kraus).reshape(-1, d, d)
        np.add.at(kw, flat, prods * norm[flat, None, None])
        blocks = []
        for f1, f2 in match_frames(irrep_frames(q1, n), irrep_frames(q2, n)):
            u, v = f1.basis, f2.basis
            outer = np.einsum("ia,jb->ijab", u.conj(), v).reshape(-1, u.shape[1], v.shape[1])
            outer *= norm[flat, None, None]
            blk = np.zeros((count, u.shape[1], v.shape[1]), dtype=np.complex128)
            np.add.at(blk, flat, outer)
            blocks.append(blk)
        expected = sum(b.shape[1] * b.shape[2] for b in blocks)
        if expected != count:
            raise RuntimeError(f"orbit count {count} disagrees with irrep block sizes {expected}")
        frames = [f.basis for f in irrep_frames(a.dim_in, n)]

        def expand(c):
            return (c * norm)[orbit]

        return cls(kw, blocks, frames, expand)

    def w_matrix(self, coeffs: np.ndarray) -> np.ndarray:
        return self._expand(np.asarray(coeffs, dtype=np.complex128))

    def variables(self, builder: sdp.ProblemBuilder):
        re = builder.vars("w.re", self.size)
        im = builder.vars("w.im", self.size)
        return re, im

    def coefficients(self, y: np.ndarray, re, im) -> np.ndarray:
        return y[re] + 1j * y[im]

    def add_contraction(self, builder, re, im) -> None:
        for k, basis in enumerate(self.contraction):
            builder.add(sdp.lmi_contraction(sdp.Affine.from_basis(re, im, basis), f"contraction[{k}]"))

    def kw_expr(self, re, im, frame: np.ndarray) -> sdp.Affine:
        compressed = frame.conj().T @ self.kw_basis @ frame
        return sdp.Affine.from_basis(re, im, compressed)


def _fidelity_program(param: WParam):
    b = sdp.ProblemBuilder()
    t = b.var("t")
    re, im = param.variables(b)
    param.add_contraction(b, re, im)
    for k, frame in enumerate(param.system_frames):
        kw = param.kw_expr(re, im, frame)
        b.add(sdp.lmi_spectral_lb(kw + kw.H, t, f"spectral[{k}]"))
    return b.build({t: 0.5}, "max"), re, im


def _solve_fidelity(param: WParam, tol: float) -> FidelityResult:
    problem, re, im = _fidelity_program(param)
    sol = sdp.solve_or_raise(problem, tol, context="channel fidelity")
    w = param.w_matrix(param.coefficients(sol.y, re, im))
    return _result(sol.value, w, sol.gap, sol.iterations)


def _from_dual(res: DualResult, tol: float) -> FidelityResult:
    if res.gap > tol:
        raise sdp.SdpError(f"dual method bracket [{res.lower:.12f}, {res.upper:.12f}] is wider than tol {tol:.1e}")
    return _result(res.value, res.w, res.gap, res.iterations)


def _first_success(attempts):
    error = None
    for attempt in attempts:
        try:
            return attempt()
        except sdp.SdpError as exc:
            error = exc
    raise error


def _tighter(res: FidelityResult, attempt) -> FidelityResult:
    try:
        other = attempt()
    except sdp.SdpError:
        return res
    return other if other.gap < res.gap else res


def _check_method(method: str) -> None:
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")


def fidelity(
    pair: ChannelPair, tol: float = DEFAULT_SDP_TOL, *, method: str = "auto", verify_symmetry: bool = False
) -> FidelityResult:
    """Channel fidelity with the optimizing ``W``.

    ``method="auto"`` solves the SDP and falls back to the dual method if
    the SDP cannot be certified; ``"sdp"`` and ``"dual"`` force one route.
    With ``verify_symmetry`` the swapped pair is solved too and a
    disagreement above ``2 * tol`` raises, since the value is symmetric in
    exact arithmetic.
    """
    _check_method(method)
    sdp_route = lambda p: _solve_fidelity(WParam.dense(p), tol)  # noqa: E731
    dual_route = lambda p: _from_dual(dual_fidelity(p.a.kraus, p.b.kraus, tol), tol)  # noqa: E731
    routes = {"sdp": [sdp_route], "dual": [dual_route], "auto": [sdp_route, dual_route]}[method]
    res = _first_success([lambda r=r: r(pair) for r in routes])
    if method == "auto" and res.raw_value > 1.0 - NEAR_IDENTICAL and res.gap > 0.0:
        res = _tighter(res, lambda: dual_route(pair))
    if verify_symmetry:
        other = _first_success([lambda r=r: r(pair.swapped()) for r in routes])
        if abs(other.raw_value - res.raw_value) > 2 * tol + res.gap + other.gap:
            raise sdp.SdpError(
                f"fidelity is asymmetric: {res.raw_value:.12f} vs {other.raw_value:.12f}"
            )
    return res


def fidelity_tensor_power(
    a: KrausChannel, b: KrausChannel, n: int, tol: float = DEFAULT_SDP_TOL, *, method: str = "auto"
) -> FidelityResult:
    """Fidelity of ``a^{(x)n}`` and ``b^{(x)n}`` using permutation symmetry.

    Equal to ``fidelity(ChannelPair(tensor_power(a, n), tensor_power(b, n)))``
    but with far smaller programs.  ``w_opt`` is the full ``q1^n x q2^n``
    matrix.  With ``method="auto"`` small symmetric SDPs are tried first and
    larger ones go to the dual method first; each falls back to the other.
    """
    _check_method(method)
    ChannelPair(a, b)
    if n == 1:
        return fidelity(ChannelPair(a, b), tol, method=method)
    sdp_route = lambda: _solve_fidelity(WParam.symmetric(a, b, n), tol)  # noqa: E731
    dual_route = lambda: _from_dual(dual_fidelity_tensor_power(a, b, n, tol), tol)  # noqa: E731
    if method == "sdp":
        return sdp_route()
    if method == "dual":
        return dual_route()
    _, orbits = pair_orbits(a.num_kraus, b.num_kraus, n)
    order = [sdp_route, dual_route] if orbits <= SDP_ORBIT_LIMIT else [dual_route, sdp_route]
    return _first_success(order)


def angle(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> float:
    return fidelity(pair, tol).angle


def bures(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> float:
    return fidelity(pair, tol).bures


def bures_kraus_min(pair: ChannelPair, w) -> float:
    """``2 - lambda_min(K_W + K_W^dag)``, the Kraus-distance form of the squared Bures distance.

    At the optimal ``W`` this equals ``bures(pair)**2``; for any other
    contraction it is an upper bound.
    """
    w = np.asarray(w, dtype=np.complex128)
    if op_norm(w) > 1 + 1e-8:
        raise ValidationError(f"W must be a contraction, ||W|| = {op_norm(w):.6g}")
    kw = k_w(pair, w)
    return float(2.0 - np.linalg.eigvalsh(kw + kw.conj().T)[0])


def diamond_bounds(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> tuple[float, float]:
    """``(2(1 - F), 2 sqrt(1 - F^2))``, bracketing the diamond norm of ``K1 - K2``."""
    f = fidelity(pair, tol).fidelity
    return 2.0 * (1.0 - f), 2.0 * math.sqrt(max(1.0 - f * f, 0.0))


def min_norm_i_minus_kw(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> tuple[float, np.ndarray]:
    """``min_{||W|| <= 1} ||I - K_W||`` and a minimizing ``W``."""
    param = WParam.dense(pair)
    b = sdp.ProblemBuilder()
    t = b.var("t")
    re, im = param.variables(b)
    param.add_contraction(b, re, im)
    eye = np.eye(param.dim)
    b.add(sdp.lmi_opnorm_ub(eye - param.kw_expr(re, im, eye), t, "opnorm"))
    sol = sdp.solve_or_raise(b.build({t: 1.0}, "min"), tol, context="min ||I - K_W||")
    w = param.w_matrix(param.coefficients(sol.y, re, im))
    return max(sol.value, 0.0), w
