"""Quantum channel Fisher information and path-length functionals.

The Fisher information of a family ``K_x`` is the second-order coefficient
of the channel Bures distance, estimated by central differences:

    J(x) ~ 8 (1 - F(K_{x-h/2}, K_{x+h/2})) / h^2

with Richardson extrapolation over ``h`` and ``h/2``.  Half the integral of
``sqrt(J)`` along a path bounds the channel angle between its endpoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from . import channels as ch
from .channels import ChannelPair, KrausChannel, ResourceLimitError
from .fidelity import DEFAULT_SDP_TOL, fidelity, fidelity_tensor_power
from .sdp import SdpError
from .matlin import NumericalError, ValidationError, herm_eigvals, hermitian

__all__ = [
    "ChannelFamily",
    "QfiEstimate",
    "PathLength",
    "qfi",
    "qfi_unitary",
    "precision_bound",
    "path_length",
    "path_length_trace",
    "VARIANTS",
    "unitary_family",
    "rotation_family",
    "dephasing_family",
    "depolarizing_family",
    "mixture_path",
    "constant_family",
    "BUILTIN_FAMILIES",
    "builtin_family",
]

log = logging.getLogger(__name__)

VARIANTS = ("exact", "single-copy-scaled")
STEP_RANGE = (1e-6, 1e-1)
DEFAULT_STEP = 1e-3
# step and accuracy used for each grid point of a path integral
PATH_STEP = 1e-2
DEFAULT_ACCURACY = 1e-2
REFINE_TOL = 1e-3
MAX_GRID = 1281
# floating-point error of 1 - F for nearly equal channels, on top of the certified gap
FIDELITY_ROUNDING = 1e-14


@dataclass(frozen=True)
class ChannelFamily:
    """A one-parameter family ``x -> K_x`` on the closed interval ``domain``.

    ``evaluate`` must be a pure function of ``x`` and return channels with
    exactly ``kraus_count`` Kraus operators everywhere on the domain.
    """

    evaluate: Callable[[float], KrausChannel]
    domain: tuple[float, float]
    kraus_count: int
    name: str = "custom"

    def __post_init__(self):
        a, b = (float(v) for v in self.domain)
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValidationError(f"family domain must be a finite interval a < b, got {self.domain}")
        if self.kraus_count < 1:
            raise ValidationError("kraus_count must be positive")
        object.__setattr__(self, "domain", (a, b))

    def contains(self, x: float) -> bool:
        a, b = self.domain
        slack = 1e-12 * max(1.0, abs(a), abs(b))
        return a - slack <= x <= b + slack

    def __call__(self, x: float) -> KrausChannel:
        if not self.contains(x):
            raise ValidationError(f"x = {x!r} lies outside the family domain {self.domain}")
        k = self.evaluate(float(np.clip(x, *self.domain)))
        if k.num_kraus != self.kraus_count:
            raise ValidationError(
                f"family {self.name!r} returned {k.num_kraus} Kraus operators at x={x!r}, "
                f"expected {self.kraus_count}"
            )
        ch.validate(k)
        return k


@dataclass
class QfiEstimate:
    value: float
    step: float
    method: str  # "finite-diff", "richardson" or "analytic"
    error_budget: float
    raw: float = float("nan")
    points: tuple[float, float] = (float("nan"), float("nan"))


def _pair_points(family: ChannelFamily, x: float, h: float) -> tuple[float, float, bool]:
    """Central pair around ``x``, shifted inside the domain near an endpoint."""
    a, b = family.domain
    lo, hi = x - h / 2, x + h / 2
    if lo < a:
        return a, a + h, False
    if hi > b:
        return b - h, b, False
    return lo, hi, True


def _check_caps(family: ChannelFamily, n: int, dim: int) -> None:
    if family.kraus_count**n > ch.MAX_KRAUS or dim**n > ch.MAX_DIM:
        raise ResourceLimitError(
            f"{n} copies of a {family.kraus_count}-Kraus, dimension-{dim} family exceed the tensor-power caps; "
            "use the single-copy-scaled variant"
        )


def _fidelity(family: ChannelFamily, x1: float, x2: float, n: int, tol: float):
    # neighbouring channels are nearly equal: the dual method is accurate to
    # rounding there while interior-point SDPs stall near 1e-12
    a, b = family(x1), family(x2)
    if n > 1:
        _check_caps(family, n, max(a.dim_in, a.dim_out))
    for method in ("dual", "auto"):
        try:
            if n == 1:
                return fidelity(ChannelPair(a, b), tol, method=method)
            return fidelity_tensor_power(a, b, n, tol, method=method)
        except SdpError:
            if method == "auto":
                raise
            log.debug("dual bracket too wide at (%g, %g); falling back", x1, x2)


def _default_tol(h_min: float) -> float:
    return min(DEFAULT_SDP_TOL, max(1e-3 * h_min**2, 1e-12))


def qfi(
    family: ChannelFamily,
    x: float,
    h: float = DEFAULT_STEP,
    *,
    richardson: bool = True,
    tol: float | None = None,
    accuracy: float = DEFAULT_ACCURACY,
    n_copies: int = 1,
) -> QfiEstimate:
    """Fisher information of ``family`` (or of its ``n_copies``-fold tensor power) at ``x``.

    The fidelity tolerance defaults to ``1e-3 h'^2`` for the smallest step
    ``h'`` used.  The call is refused when the fidelity noise alone,
    ``8 tol / h'^2``, exceeds ``accuracy``.  ``error_budget`` adds the
    certified fidelity gaps and, with Richardson, the difference between
    the two step sizes as a truncation estimate.
    """
    if not family.contains(x):
        raise ValidationError(f"x = {x!r} lies outside the family domain {family.domain}")
    if not STEP_RANGE[0] <= h <= STEP_RANGE[1]:
        raise ValidationError(f"step h must lie in [{STEP_RANGE[0]:g}, {STEP_RANGE[1]:g}], got {h!r}")
    a, b = family.domain
    if h > b - a:
        raise ValidationError(f"step h = {h!r} is wider than the domain {family.domain}")
    h_min = h / 2 if richardson else h
    tol = _default_tol(h_min) if tol is None else float(tol)
    if tol > 1e-3 * h_min**2 * (1 + 1e-12):
        raise ValidationError(f"fidelity tolerance {tol:.1e} is too loose for step {h_min:.1e} (need <= 1e-3 h^2)")
    if 8 * tol / h_min**2 > accuracy:
        raise ValidationError(
            f"fidelity noise 8*tol/h^2 = {8 * tol / h_min**2:.2e} exceeds the requested accuracy {accuracy:.1e}"
        )

    def estimate(step):
        x1, x2 = _pair_points(family, x, step)[:2]
        res = _fidelity(family, x1, x2, n_copies, tol)
        noise = max(res.gap, FIDELITY_ROUNDING)
        return 8.0 * (1.0 - res.raw_value) / step**2, 8.0 * noise / step**2, (x1, x2)

    j_h, noise_h, pts = estimate(h)
    central = _pair_points(family, x, h)[2]
    if richardson:
        j_half, noise_half, _ = estimate(h / 2)
        # central differences have an h^2 leading error, shifted ones an h error
        order = 4.0 if central and _pair_points(family, x, h / 2)[2] else 2.0
        raw = (order * j_half - j_h) / (order - 1.0)
        budget = (order * noise_half + noise_h) / (order - 1.0) + abs(j_half - j_h) / (order - 1.0)
        method = "richardson"
    else:
        raw, budget, method = j_h, noise_h, "finite-diff"
    if raw < -1e-6 - budget:
        raise NumericalError(f"Fisher information estimate {raw:.3e} is negative beyond its error budget")
    return QfiEstimate(max(raw, 0.0), h, method, budget, raw, pts)


def qfi_unitary(h_generator) -> float:
    """``(lambda_max - lambda_min)^2`` of the generator of ``x -> e^{-ixH} . e^{ixH}``."""
    ev = herm_eigvals(hermitian(h_generator))
    return float((ev[-1] - ev[0]) ** 2)


def precision_bound(j: QfiEstimate | float, n_repeats: int) -> float:
    """``1 / sqrt(n J)``, the smallest attainable standard deviation after ``n`` repetitions.

    An estimate no larger than its own error budget counts as zero.
    """
    value = j.value if isinstance(j, QfiEstimate) else float(j)
    floor = j.error_budget if isinstance(j, QfiEstimate) else 0.0
    if int(n_repeats) != n_repeats or n_repeats < 1:
        raise ValidationError(f"n_repeats must be a positive integer, got {n_repeats!r}")
    if not value > floor:
        raise ValidationError("parameter not locally estimable: Fisher information is zero")
    return 1.0 / math.sqrt(n_repeats * value)


@dataclass
class PathLength:
    value: float
    variant: str
    n_copies: int
    grid: int  # grid size of the accepted quadrature
    converged: bool
    history: list[tuple[int, float]] = field(default_factory=list)
    samples: dict[float, float] = field(default_factory=dict)  # x -> J at the largest tested grid


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


def path_length_trace(
    family: ChannelFamily,
    n_copies: int = 1,
    grid: int = 41,
    variant: str = "exact",
    *,
    step: float = PATH_STEP,
    refine: bool = True,
    max_grid: int = MAX_GRID,
    _cache: dict | None = None,
) -> PathLength:
    """:func:`path_length` with the refinement history and the sampled Fisher information."""
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if int(n_copies) != n_copies or n_copies < 1:
        raise ValidationError(f"n_copies must be a positive integer, got {n_copies!r}")
    if grid < 5:
        raise ValidationError(f"grid must be at least 5, got {grid}")
    copies = n_copies if variant == "exact" else 1
    if copies > 1:
        probe = family(family.domain[0])
        _check_caps(family, copies, max(probe.dim_in, probe.dim_out))
    scale = 0.5 if variant == "exact" else 0.5 * n_copies
    a, b = family.domain
    step = min(step, (b - a) / 4)
    cache = {} if _cache is None else _cache

    def integrand(x):
        if x not in cache:
            cache[x] = qfi(family, x, step, n_copies=copies).value
        return math.sqrt(cache[x])

    n = _odd(grid)
    history = []
    while True:
        xs = np.linspace(a, b, n)
        ys = np.array([integrand(float(x)) for x in xs])
        history.append((n, scale * float(simpson(ys, x=xs))))
        if not refine:
            converged = True
            break
        if len(history) > 1 and abs(history[-1][1] - history[-2][1]) < REFINE_TOL:
            converged = True
            break
        if 2 * n - 1 > max_grid:
            converged = False
            log.warning("path length not converged at grid %d: %s", n, history)
            break
        n = 2 * n - 1
    samples = {float(x): cache[float(x)] for x in xs}
    return PathLength(history[-1][1], variant, n_copies, n, converged, history, samples)


def path_length(
    family: ChannelFamily, n_copies: int = 1, grid: int = 41, variant: str = "exact", **kwargs
) -> float:
    """Half the integral of ``sqrt(J)`` along the family, bounding the endpoint channel angle.

    ``exact`` uses the Fisher information of ``K_x^{(x)n}``; ``single-copy-scaled``
    uses ``n^2 J(K_x)`` instead, which is cheaper and never smaller.
    Composite Simpson on a uniform grid, doubled until two successive values
    differ by less than ``1e-3``.
    """
    return path_length_trace(family, n_copies, grid, variant, **kwargs).value


# builtin families


def constant_family(k: KrausChannel, domain=(0.0, 1.0)) -> ChannelFamily:
    return ChannelFamily(lambda x: k, domain, k.num_kraus, "constant")


def unitary_family(h_generator, domain=(0.0, math.pi)) -> ChannelFamily:
    """``x -> e^{-ixH} rho e^{ixH}``."""
    h = hermitian(h_generator)
    return ChannelFamily(
        lambda x: KrausChannel(ch.hamiltonian_unitary(h, x)[None]), domain, 1, "unitary-generator"
    )


def rotation_family(domain=(0.0, math.pi)) -> ChannelFamily:
    """``x -> rotation_x(x)``."""
    return ChannelFamily(ch.rotation_x, domain, 1, "rotation")


def dephasing_family(domain=(0.0, 1.0)) -> ChannelFamily:
    """``x -> dephasing(x)``.

    ``J`` grows like ``1/(1-x)`` as ``x -> 1`` (the identity end), so path
    lengths over a domain reaching 1 converge slowly; stop short of it.
    """
    return ChannelFamily(ch.dephasing, domain, 2, "dephasing")


def depolarizing_family(d: int = 2, domain=(0.0, 1.0)) -> ChannelFamily:
    """``x -> depolarizing(x, d)``."""
    return ChannelFamily(lambda x: ch.depolarizing(x, d), domain, d * d, "depolarizing")


def mixture_path(k0: KrausChannel, k1: KrausChannel, parametrization: str = "angle") -> ChannelFamily:
    """The convex path ``(1 - t) K0 + t K1`` between two channels.

    ``linear`` uses ``t`` itself on ``[0, 1]``.  ``angle`` uses ``t = sin^2(x)``
    on ``[0, pi/2]``, with Kraus set ``{cos x A_i, sin x B_j}``.  The two trace
    the same channels, so path lengths agree, but ``sqrt(J)`` diverges like
    ``t^{-1/2}`` at the ends of the linear form and is smooth in the angle form.
    """
    ChannelPair(k0, k1)
    q = k0.num_kraus + k1.num_kraus
    if parametrization == "linear":
        def evaluate(t):
            return KrausChannel(np.concatenate([np.sqrt(1 - t) * k0.kraus, np.sqrt(t) * k1.kraus]))

        return ChannelFamily(evaluate, (0.0, 1.0), q, "mixture-path")
    if parametrization == "angle":
        def evaluate(x):
            return KrausChannel(np.concatenate([math.cos(x) * k0.kraus, math.sin(x) * k1.kraus]))

        return ChannelFamily(evaluate, (0.0, 0.5 * math.pi), q, "mixture-path")
    raise ValidationError(f"parametrization must be 'angle' or 'linear', got {parametrization!r}")


BUILTIN_FAMILIES = ("unitary-generator", "rotation", "dephasing", "depolarizing", "mixture-path")


def builtin_family(name: str, **params) -> ChannelFamily:
    """Look up a builtin family by name.

    Parameters: ``lo``/``hi`` override the domain of every family;
    ``generator`` (Hermitian matrix) for unitary-generator; ``d`` for
    depolarizing; ``a``, ``b`` (channels) and ``parametrization`` for
    mixture-path.
    """
    domain = None
    if "lo" in params or "hi" in params:
        domain = (float(params.pop("lo", 0.0)), float(params.pop("hi", 1.0)))
    kw = {} if domain is None else {"domain": domain}

    def take(*allowed):
        unknown = set(params) - set(allowed)
        if unknown:
            raise ValidationError(f"unknown parameters for family {name!r}: {sorted(unknown)}")
        return params

    if name == "unitary-generator":
        p = take("generator")
        if "generator" not in p:
            raise ValidationError("unitary-generator needs a 'generator' matrix")
        return unitary_family(p["generator"], **kw)
    if name == "rotation":
        take()
        return rotation_family(**kw)
    if name == "dephasing":
        take()
        return dephasing_family(**kw)
    if name == "depolarizing":
        p = take("d")
        return depolarizing_family(int(p.get("d", 2)), **kw)
    if name == "mixture-path":
        p = take("a", "b", "parametrization")
        if domain is not None:
            raise ValidationError("mixture-path has a fixed domain")
        if not (isinstance(p.get("a"), KrausChannel) and isinstance(p.get("b"), KrausChannel)):
            raise ValidationError("mixture-path needs channels 'a' and 'b'")
        return mixture_path(p["a"], p["b"], p.get("parametrization", "angle"))
    raise ValidationError(f"unknown family {name!r}; builtin families: {', '.join(BUILTIN_FAMILIES)}")
