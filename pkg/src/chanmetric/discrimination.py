"""Lower bounds on the number of channel uses needed for perfect discrimination.

Two channels are perfectly distinguishable with ``N`` parallel uses when the
angle between their ``N``-fold tensor powers reaches ``pi/2``.  The bounds
here, from weakest to strongest on typical pairs:

- angle: the angle is subadditive under tensor powers, so ``N >= pi / (2 Theta)``;
- path: ``Theta(N copies)`` is at most half the integrated square-root Fisher
  information of any path between the channels;
- parallel: for every contraction ``W``,
  ``2 - 2 cos Theta(N copies) <= N ||2I - K_W - K_W^dag|| + N(N-1) ||I - K_W||^2``,
  either with one ``W`` for all ``N`` or minimized over ``W`` for each ``N``;
- direct: the smallest ``N`` whose tensor-power fidelity vanishes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import sdp
from .channels import ChannelPair, ResourceLimitError, choi_equal
from .fidelity import (
    DEFAULT_SDP_TOL,
    ORTHO_THRESHOLD,
    WParam,
    fidelity,
    fidelity_tensor_power,
    k_w,
    min_norm_i_minus_kw,
)
from .fisher import REFINE_TOL, VARIANTS, ChannelFamily, PathLength, mixture_path, path_length_trace
from .matlin import NumericalError, ValidationError, op_norm

__all__ = [
    "ANGLE_THRESHOLD",
    "N_CAP",
    "BoundReport",
    "Unbounded",
    "lb_angle",
    "nparallel_upper_bound",
    "lb_parallel_fixed_w",
    "lb_parallel_per_n",
    "lb_path",
    "direct_min_n",
    "DirectSearch",
    "PathBound",
    "report",
]

log = logging.getLogger(__name__)

ANGLE_THRESHOLD = 1e-7
CEIL_SLACK = 1e-9
PATH_SLACK = 1e-6
PARALLEL_SLACK = 1e-7
N_CAP = 10**6
LOOSE_TOL = 1e-8
# lb_parallel_per_n scans N one by one up to here, then gallops
_LINEAR_SCAN = 16


class Unbounded(ValidationError):
    """No finite number of uses satisfies the bound up to its search cap."""


def _angle_of(res, ortho: float = ORTHO_THRESHOLD) -> float:
    # below the orthogonality threshold the angle is pi/2 by decision
    return 0.5 * math.pi if res.fidelity <= ortho else res.angle


def _ceil(x: float) -> int:
    return max(1, math.ceil(x - CEIL_SLACK))


def lb_angle(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL, *, ortho: float = ORTHO_THRESHOLD) -> int:
    """``ceil(pi / (2 Theta))`` with a ``1e-9`` slack before the ceiling."""
    res = fidelity(pair, tol)
    theta = _angle_of(res, ortho)
    # a fidelity within its own certified error of 1 is indistinguishable from 1
    if theta <= ANGLE_THRESHOLD or 1.0 - res.raw_value <= res.gap + tol:
        raise Unbounded(
            f"channels are indistinguishable at tolerance (angle {theta:.3e}); "
            "never perfectly distinguishable by the angle bound"
        )
    return _ceil(0.5 * math.pi / theta)


def _parallel_norms(pair: ChannelPair, w) -> tuple[float, float]:
    w = np.asarray(w, dtype=np.complex128)
    if op_norm(w) > 1 + 1e-8:
        raise ValidationError(f"W must satisfy ||W|| <= 1 + 1e-8, got {op_norm(w):.10g}")
    kw = k_w(pair, w)
    eye = np.eye(kw.shape[0])
    return op_norm(2 * eye - kw - kw.conj().T), op_norm(eye - kw) ** 2


def nparallel_upper_bound(pair: ChannelPair, n: int, w) -> float:
    """``N ||2I - K_W - K_W^dag|| + N(N-1) ||I - K_W||^2``, an upper bound on ``2 - 2F(N copies)``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n!r}")
    c1, c2 = _parallel_norms(pair, w)
    return n * c1 + n * (n - 1) * c2


def _smallest_n_quadratic(c1: float, c2: float, target: float) -> int | None:
    """Smallest positive integer ``N`` with ``N c1 + N(N-1) c2 >= target``, or None past the cap."""
    if c2 > 0:
        b = c1 - c2
        root = (-b + math.sqrt(b * b + 4 * c2 * target)) / (2 * c2)
    elif c1 > 0:
        root = target / c1
    else:
        return None
    if root > N_CAP:
        return None
    n = max(1, math.ceil(root))
    # the closed form can land one off after rounding
    while n > 1 and (n - 1) * c1 + (n - 1) * (n - 2) * c2 >= target:
        n -= 1
    while n * c1 + n * (n - 1) * c2 < target:
        n += 1
    return n if n <= N_CAP else None


@dataclass
class FixedWBound:
    n: int | None
    w: np.ndarray
    norm_i_minus_kw: float
    c1: float  # ||2I - K_W - K_W^dag||
    c2: float  # ||I - K_W||^2


def lb_parallel_fixed_w_details(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> FixedWBound:
    value, w = min_norm_i_minus_kw(pair, tol)
    c1, c2 = _parallel_norms(pair, w)
    return FixedWBound(_smallest_n_quadratic(c1, c2, 2.0 - PARALLEL_SLACK), w, value, c1, c2)


def lb_parallel_fixed_w(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> int:
    """Smallest ``N`` for which the parallel bound at the ``W`` minimizing ``||I - K_W||`` reaches 2."""
    res = lb_parallel_fixed_w_details(pair, tol)
    if res.n is None:
        raise Unbounded(f"parallel bound with fixed W never reaches 2 for N <= {N_CAP}")
    return res.n


def _scaled_eye(t: int, n: int) -> sdp.Affine:
    return sdp.Affine(np.zeros((n, n)), [t], np.eye(n)[None])


def per_n_value(pair: ChannelPair, n: int, tol: float = DEFAULT_SDP_TOL) -> tuple[float, np.ndarray]:
    """``min_{||W|| <= 1} N ||2I - K_W - K_W^dag|| + N(N-1) ||I - K_W||^2`` and a minimizer."""
    param = WParam.dense(pair)
    b = sdp.ProblemBuilder()
    t1, t2, s = b.var("t1"), b.var("t2"), b.var("s")
    re, im = param.variables(b)
    param.add_contraction(b, re, im)
    eye = np.eye(param.dim)
    kw = param.kw_expr(re, im, eye)
    pencil = 2 * eye - kw - kw.H
    # both sides, although ||K_W|| <= 1 already makes the pencil PSD
    b.add(sdp.LmiBlock(_scaled_eye(t1, param.dim) - pencil, "pencil.upper"))
    b.add(sdp.LmiBlock(_scaled_eye(t1, param.dim) + pencil, "pencil.lower"))
    b.add(sdp.lmi_opnorm_ub(eye - kw, t2, "opnorm"))
    b.add(sdp.lmi_quad_epigraph(t2, s))
    problem = b.build({t1: float(n), s: float(n * (n - 1))}, "min")
    # the value is only compared with 2 - 1e-7, so a looser certificate still decides it
    for attempt in sorted({tol, max(tol, LOOSE_TOL)}):
        try:
            sol = sdp.solve_or_raise(problem, attempt, context=f"parallel bound at N={n}")
            break
        except sdp.SdpError as exc:
            error = exc
            log.debug("N=%d not certified at tol %.1e", n, attempt)
    else:
        raise sdp.SdpError(f"N={n}: {error}", error.solution) from error
    return sol.value, param.w_matrix(param.coefficients(sol.y, re, im))


@dataclass
class PerNBound:
    n: int | None
    trace: list[tuple[int, float]] = field(default_factory=list)
    w: np.ndarray | None = None


def lb_parallel_per_n_details(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> PerNBound:
    target = 2.0 - PARALLEL_SLACK
    trace, cache = [], {}

    def value(n):
        if n not in cache:
            cache[n] = per_n_value(pair, n, tol)
            trace.append((n, cache[n][0]))
        return cache[n][0]

    # the optimum never exceeds the fixed-W bound, which may already rule out every N
    if lb_parallel_fixed_w_details(pair, tol).n is None:
        return PerNBound(None, trace)
    n = 1
    while n <= _LINEAR_SCAN:
        if value(n) >= target:
            return PerNBound(n, trace, cache[n][1])
        n += 1
    # the optimum is nondecreasing in N (each W's bound is), so bisection is exact
    lo, hi = _LINEAR_SCAN, 2 * _LINEAR_SCAN
    while value(hi) < target:
        if hi >= N_CAP:
            return PerNBound(None, trace)
        lo, hi = hi, min(2 * hi, N_CAP)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if value(mid) >= target:
            hi = mid
        else:
            lo = mid
    return PerNBound(hi, trace, cache[hi][1])


def lb_parallel_per_n(pair: ChannelPair, tol: float = DEFAULT_SDP_TOL) -> int:
    """Smallest ``N`` at which the parallel bound, minimized over ``W`` for that ``N``, reaches 2."""
    res = lb_parallel_per_n_details(pair, tol)
    if res.n is None:
        raise Unbounded(f"optimized parallel bound never reaches 2 for N <= {N_CAP}")
    return res.n


@dataclass
class PathBound:
    n: int | None
    variant: str
    single_copy: float
    lengths: dict[int, PathLength] = field(default_factory=dict)
    skipped: list[int] = field(default_factory=list)  # ruled out by n * single_copy < pi/2

    @property
    def grid(self) -> int | None:
        return self.lengths[self.n].grid if self.n in self.lengths else None


def _check_endpoints(pair: ChannelPair, family: ChannelFamily) -> None:
    a, b = family.domain
    if not (choi_equal(family(a), pair.a, 1e-8) and choi_equal(family(b), pair.b, 1e-8)):
        raise ValidationError(f"endpoints of family {family.name!r} do not match the channel pair")


def lb_path_details(
    pair: ChannelPair,
    family: ChannelFamily | None = None,
    variant: str = "exact",
    *,
    grid: int = 41,
    max_n: int = 8,
) -> PathBound:
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    family = mixture_path(pair.a, pair.b) if family is None else family
    _check_endpoints(pair, family)
    target = 0.5 * math.pi - PATH_SLACK
    cache: dict = {}
    single = path_length_trace(family, 1, grid, "exact", _cache=cache)
    out = PathBound(None, variant, single.value, {1: single})
    if single.value <= 0.0:
        return out
    if variant == "single-copy-scaled":
        n = _ceil(target / single.value)
        if n <= N_CAP:
            out.n = n
            out.lengths[n] = path_length_trace(family, n, grid, variant, _cache=cache)
        return out
    for n in range(1, max_n + 1):
        if n > 1:
            # exact(N) <= N * single-copy length, up to quadrature error
            if n * single.value < target - REFINE_TOL:
                out.skipped.append(n)
                continue
            out.lengths[n] = path_length_trace(family, n, grid, "exact")
        if out.lengths[n].value >= target:
            out.n = n
            break
    return out


def lb_path(
    pair: ChannelPair, family: ChannelFamily | None = None, variant: str = "exact", *, grid: int = 41, max_n: int = 8
) -> int:
    """Smallest ``N`` whose path length reaches ``pi/2 - 1e-6``; the default path is the convex mixture."""
    res = lb_path_details(pair, family, variant, grid=grid, max_n=max_n)
    if res.n is None:
        cap = N_CAP if variant == "single-copy-scaled" else max_n
        raise Unbounded(f"path length stays below pi/2 for N <= {cap}")
    return res.n


@dataclass
class DirectSearch:
    n: int | None
    max_n: int
    trace: list[tuple[int, float]] = field(default_factory=list)
    stopped: str = ""  # why the search ended without finding N

    @property
    def found(self) -> bool:
        return self.n is not None


def direct_min_n(
    pair: ChannelPair, max_n: int = 8, tol: float = DEFAULT_SDP_TOL, *, ortho: float = ORTHO_THRESHOLD
) -> DirectSearch:
    """Smallest ``N <= max_n`` with ``F(A^{(x)N}, B^{(x)N}) <= 1e-7``, with the fidelity trace."""
    out = DirectSearch(None, max_n)
    for n in range(1, max_n + 1):
        try:
            res = fidelity_tensor_power(pair.a, pair.b, n, tol)
        except ResourceLimitError as exc:
            out.stopped = f"N={n}: {exc}"
            return out
        out.trace.append((n, res.fidelity))
        if len(out.trace) > 1 and res.fidelity > out.trace[-2][1] + ortho:
            raise NumericalError(f"fidelity increased from N={n - 1} to N={n}: {out.trace}")
        if res.fidelity <= ortho:
            out.n = n
            return out
    out.stopped = f"fidelity still positive at max_n={max_n}"
    return out


@dataclass
class BoundReport:
    pair: ChannelPair
    theta: float
    fidelity: float
    lb_angle: int | None
    lb_parallel_fixed_w: int | None
    lb_parallel_per_n: int | None
    lb_path: int | None
    direct_min_n: int | None
    max_n: int
    details: dict = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and not self.violations

    def bounds(self) -> dict[str, int | None]:
        return {
            "lb_angle": self.lb_angle,
            "lb_path": self.lb_path,
            "lb_parallel_fixed_w": self.lb_parallel_fixed_w,
            "lb_parallel_per_n": self.lb_parallel_per_n,
            "direct_min_n": self.direct_min_n,
        }


def _attempt(errors: dict, key: str, fn: Callable, default=None):
    try:
        return fn()
    except Unbounded as exc:
        errors[key] = f"unbounded: {exc}"
    except (sdp.SdpError, NumericalError, ValidationError, ResourceLimitError) as exc:
        errors[key] = f"{type(exc).__name__}: {exc}"
    return default


def report(
    pair: ChannelPair,
    family: ChannelFamily | None = None,
    *,
    path: bool = True,
    variant: str = "exact",
    max_n: int = 8,
    grid: int = 41,
    tol: float = DEFAULT_SDP_TOL,
    ortho: float = ORTHO_THRESHOLD,
) -> BoundReport:
    """Run every bound on ``pair`` and check that they are mutually consistent.

    The path bound uses ``family`` or, if ``path`` is set and no family is
    given, the convex mixture path.  Failures of single bounds are recorded
    in ``errors``; an "unbounded" entry means the bound never certifies
    perfect discrimination.
    """
    errors: dict[str, str] = {}
    res = fidelity(pair, tol)
    out = BoundReport(pair, _angle_of(res, ortho), res.fidelity, None, None, None, None, None, max_n, errors=errors)
    out.lb_angle = _attempt(errors, "lb_angle", lambda: lb_angle(pair, tol, ortho=ortho))

    fixed = _attempt(errors, "lb_parallel_fixed_w", lambda: lb_parallel_fixed_w_details(pair, tol))
    if fixed is not None:
        out.lb_parallel_fixed_w = fixed.n
        out.details["parallel_fixed_w"] = {"min_norm_i_minus_kw": fixed.norm_i_minus_kw, "c1": fixed.c1, "c2": fixed.c2}
        if fixed.n is None:
            errors["lb_parallel_fixed_w"] = f"unbounded: never reaches 2 for N <= {N_CAP}"

    per_n = _attempt(errors, "lb_parallel_per_n", lambda: lb_parallel_per_n_details(pair, tol))
    if per_n is not None:
        out.lb_parallel_per_n = per_n.n
        out.details["parallel_per_n"] = {"trace": per_n.trace}
        if per_n.n is None:
            errors["lb_parallel_per_n"] = f"unbounded: never reaches 2 for N <= {N_CAP}"

    if path or family is not None:
        pb = _attempt(errors, "lb_path", lambda: lb_path_details(pair, family, variant, grid=grid, max_n=max_n))
        if pb is not None:
            out.lb_path = pb.n
            out.details["path"] = {
                "variant": pb.variant,
                "family": (family.name if family else "mixture-path"),
                "single_copy_length": pb.single_copy,
                "lengths": {n: p.value for n, p in sorted(pb.lengths.items())},
                "grids": {n: p.grid for n, p in sorted(pb.lengths.items())},
                "skipped": pb.skipped,
            }
            if pb.n is None:
                errors["lb_path"] = "unbounded: path length stays below pi/2"

    direct = _attempt(errors, "direct_min_n", lambda: direct_min_n(pair, max_n, tol, ortho=ortho))
    if direct is not None:
        out.direct_min_n = direct.n
        out.details["direct"] = {"trace": direct.trace, "stopped": direct.stopped}

    _check_invariants(out)
    return out


def _check_invariants(rep: BoundReport) -> None:
    if rep.lb_parallel_fixed_w is not None and rep.lb_parallel_per_n is not None:
        if rep.lb_parallel_per_n < rep.lb_parallel_fixed_w:
            rep.violations.append(
                f"lb_parallel_per_n = {rep.lb_parallel_per_n} < lb_parallel_fixed_w = {rep.lb_parallel_fixed_w}"
            )
    if rep.direct_min_n is None:
        return
    for name, value in rep.bounds().items():
        if name != "direct_min_n" and value is not None and value > rep.direct_min_n:
            rep.violations.append(f"{name} = {value} exceeds direct_min_n = {rep.direct_min_n}")
    for v in rep.violations:
        log.error("bound ordering violated: %s", v)
