"""Brute-force and alternative-formulation checks for the channel metrics.

Nothing here goes through the fidelity SDP or its dual.  The probe
minimizations are local searches over pure states and so only ever
overestimate a minimum; the diamond norm solves a Choi-matrix program and its
dual with cvxpy and certifies the pair of values.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Sequence

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize

from .channels import ChannelPair, KrausChannel, choi
from .fisher import STEP_RANGE, ChannelFamily
from .matlin import NumericalError, ValidationError, as_matrix, herm_eigh, is_unitary

__all__ = [
    "density_matrix",
    "state_fidelity",
    "ProbeResult",
    "min_output_fidelity",
    "min_overlap_unitary",
    "DiamondResult",
    "diamond_norm",
    "diamond_norm_bracket",
    "classical_fisher_check",
    "state_fisher",
    "ORACLE_MAX_DIM",
]

log = logging.getLogger(__name__)

ORACLE_MAX_DIM = 4
UNITARY_MAX_DIM = 8
MIN_RESTARTS = 32
DEFAULT_SEED = 42
_COARSE = {"xatol": 1e-4, "fatol": 1e-7, "maxfev": 400, "adaptive": True}
_FINE = {"xatol": 1e-9, "fatol": 1e-13, "maxfev": 4000, "adaptive": True}
_REFINE = 3
_POLISH_ROUNDS = 4


def density_matrix(m, tol: float = 1e-10) -> np.ndarray:
    """Validate a density matrix: Hermitian, PSD and unit trace, each within ``tol``."""
    m = as_matrix(m, square=True, name="density matrix")
    if np.abs(m - m.conj().T).max() > tol:
        raise ValidationError("density matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    if abs(np.trace(m).real - 1.0) > tol:
        raise ValidationError(f"density matrix has trace {np.trace(m).real:.12g}")
    if np.linalg.eigvalsh(m)[0] < -tol:
        raise ValidationError("density matrix is not positive semidefinite")
    return m


def _sqrt_psd(m: np.ndarray) -> np.ndarray:
    w, v = herm_eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _fidelity_unchecked(r1: np.ndarray, r2: np.ndarray) -> float:
    # Tr sqrt(sqrt(r1) r2 sqrt(r1)) = || sqrt(r1) sqrt(r2) ||_1
    return float(np.linalg.svd(_sqrt_psd(r1) @ _sqrt_psd(r2), compute_uv=False).sum())


def state_fidelity(r1, r2) -> float:
    """Uhlmann fidelity ``Tr sqrt(sqrt(r1) r2 sqrt(r1))``, clipped to ``[0, 1]``."""
    r1, r2 = density_matrix(r1), density_matrix(r2)
    if r1.shape != r2.shape:
        raise ValidationError(f"states of different dimension: {r1.shape} vs {r2.shape}")
    return float(np.clip(_fidelity_unchecked(r1, r2), 0.0, 1.0))


@dataclass
class ProbeResult:
    value: float
    probe: np.ndarray  # best state vector found
    restarts: int
    best_start: int
    evaluations: int


def _unit_vector(z: np.ndarray) -> np.ndarray:
    half = len(z) // 2
    v = z[:half] + 1j * z[half:]
    return v / max(np.linalg.norm(v), 1e-300)


def _multistart(objective, dim: int, restarts: int, seed: int) -> ProbeResult:
    """Coarse simplex search from every start, then tight refinement of the best few."""
    if restarts < MIN_RESTARTS:
        raise ValidationError(f"restarts must be at least {MIN_RESTARTS}, got {restarts}")
    rng = np.random.default_rng(seed)
    starts = rng.standard_normal((restarts, 2 * dim))
    f = lambda z: objective(_unit_vector(z))  # noqa: E731
    evaluations = 0
    coarse = []
    for k, z0 in enumerate(starts):
        res = minimize(f, z0, method="Nelder-Mead", options=_COARSE)
        evaluations += res.nfev
        coarse.append((float(res.fun), k, res.x))
    coarse.sort(key=lambda c: (c[0], c[1]))
    best = coarse[0]
    for value, k, x in coarse[:_REFINE]:
        # restarting the simplex from its end point gets it past ridges
        for _ in range(_POLISH_ROUNDS):
            res = minimize(f, x, method="Nelder-Mead", options=_FINE)
            evaluations += res.nfev
            improved = value - res.fun
            if res.fun < value:
                value, x = float(res.fun), res.x
            if improved < 1e-13:
                break
        if (value, k) < (best[0], best[1]):
            best = (value, k, x)
    value, k, x = best
    return ProbeResult(float(value), _unit_vector(x), restarts, k, evaluations)


def _output_factor(kraus: np.ndarray, psi: np.ndarray, d_anc: int) -> np.ndarray:
    """``V`` with ``V V^dag = (K (x) id)(|psi><psi|)``; column ``k`` is ``(F_k (x) I) psi``."""
    q, dout, din = kraus.shape
    return (kraus @ psi.reshape(din, d_anc)).reshape(q, dout * d_anc).T


def min_output_fidelity(
    pair: ChannelPair, restarts: int = 64, *, ancilla_dim: int | None = None, seed: int = DEFAULT_SEED
) -> ProbeResult:
    """Minimum over pure probes on system (x) ancilla of the fidelity between the two outputs.

    The ancilla defaults to the size of the input system.  Multi-start
    Nelder-Mead over normalized complex vectors; the result can only lie
    above the true minimum.  The search evaluates ``||V1^dag V2||_1`` for
    the output factors, and the reported value is recomputed from the
    output density matrices with :func:`state_fidelity`.
    """
    d = pair.a.dim_in
    if d > ORACLE_MAX_DIM:
        raise ValidationError(f"min_output_fidelity is limited to input dimension {ORACLE_MAX_DIM}, got {d}")
    d_anc = d if ancilla_dim is None else int(ancilla_dim)
    if d_anc < 1:
        raise ValidationError("ancilla dimension must be positive")
    a, b = pair.a.kraus, pair.b.kraus

    def objective(psi):
        v1, v2 = _output_factor(a, psi, d_anc), _output_factor(b, psi, d_anc)
        return np.linalg.svd(v1.conj().T @ v2, compute_uv=False).sum()

    res = _multistart(objective, d * d_anc, restarts, seed)
    outs = [_output_factor(k, res.probe, d_anc) for k in (a, b)]
    res.value = state_fidelity(*(v @ v.conj().T for v in outs))
    return res


def min_overlap_unitary(u, restarts: int = 32, *, seed: int = DEFAULT_SEED) -> ProbeResult:
    """``min |<psi|U|psi>|`` over pure states, by multi-start Nelder-Mead."""
    u = as_matrix(u, square=True, name="unitary")
    if not is_unitary(u):
        raise ValidationError("matrix is not unitary")
    if u.shape[0] > UNITARY_MAX_DIM:
        raise ValidationError(f"min_overlap_unitary is limited to dimension {UNITARY_MAX_DIM}")
    res = _multistart(lambda psi: abs(np.vdot(psi, u @ psi)), u.shape[0], restarts, seed)
    # overlaps near zero are floored to zero
    res.value = 0.0 if res.value < 1e-9 else res.value
    return res


@dataclass
class DiamondResult:
    value: float
    lower: float
    upper: float
    solver: str

    @property
    def error(self) -> float:
        """Largest possible distance from ``value`` to the true norm."""
        return 0.5 * (self.upper - self.lower)


def _lambda_max(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[-1])


def _primal_lower(j: np.ndarray, w: np.ndarray, rho: np.ndarray, dout: int) -> float:
    """``2 <J, W>`` after repairing ``(W, rho)`` into an exactly feasible point."""
    din = rho.shape[0]
    w = 0.5 * (w + w.conj().T)
    ev, v = np.linalg.eigh(w)
    w = (v * np.clip(ev, 0.0, None)) @ v.conj().T
    ev, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    rho = (v * np.clip(ev, 0.0, None)) @ v.conj().T
    rho /= np.trace(rho).real
    # W <= (rho + c I) (x) I, then renormalize the trace
    c = max(_lambda_max(w - np.kron(rho, np.eye(dout))), 0.0)
    return 2.0 * float(np.real(np.vdot(j, w))) / (1.0 + c * din)


def _dual_upper(j: np.ndarray, z: np.ndarray, din: int, dout: int) -> float:
    """``2 ||Tr_out Z||`` after shifting ``Z`` until ``Z >= J`` and ``Z >= 0`` hold exactly."""
    z = 0.5 * (z + z.conj().T)
    shift = max(-np.linalg.eigvalsh(z - j)[0], -np.linalg.eigvalsh(z)[0], 0.0)
    z = z + shift * np.eye(z.shape[0])
    tz = np.einsum("iaja->ij", z.reshape(din, dout, din, dout))
    return 2.0 * _lambda_max(tz)


def diamond_norm_bracket(pair: ChannelPair, tol: float = 1e-7) -> DiamondResult:
    """Certified bracket on ``|| K1 - K2 ||_diamond``.

    For the difference of two channels the Choi matrix ``J`` (input factor
    first) is Hermitian with zero output partial trace, and

        ||K1 - K2||_diamond = 2 max { <J, W> : 0 <= W <= rho (x) I, Tr rho = 1 }
                            = 2 min { ||Tr_out Z|| : Z >= J, Z >= 0 }.

    Both programs are solved and each solution is repaired into an exactly
    feasible point, so ``[lower, upper]`` holds regardless of solver
    accuracy.  ``value`` is the midpoint; solvers and tolerances are tried
    in turn until it is within ``tol`` of both ends.
    """
    din, dout = pair.a.dim_in, pair.a.dim_out
    if din * dout > 64:
        raise ValidationError("diamond_norm oracle is limited to dim_in * dim_out <= 64")
    j = choi(pair.a) - choi(pair.b)
    n = din * dout
    w = cp.Variable((n, n), hermitian=True)
    rho = cp.Variable((din, din), hermitian=True)
    primal = cp.Problem(
        cp.Maximize(2 * cp.real(cp.trace(j @ w))),
        [w >> 0, cp.kron(rho, np.eye(dout)) - w >> 0, cp.real(cp.trace(rho)) == 1],
    )
    z = cp.Variable((n, n), hermitian=True)
    t = cp.Variable()
    dual = cp.Problem(
        cp.Minimize(2 * t),
        [z >> 0, z - j >> 0, t * np.eye(din) - cp.partial_trace(z, [din, dout], axis=1) >> 0],
    )
    best, errors = None, []
    for solver, eps in _DIAMOND_LADDER:
        opts = (
            {"abstol": eps, "reltol": eps, "feastol": eps}
            if solver == cp.CVXOPT
            else {"tol_gap_abs": eps, "tol_gap_rel": eps, "tol_feas": eps}
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")  # inaccurate solves are certified below
                primal.solve(solver=solver, **opts)
                dual.solve(solver=solver, **opts)
        except (cp.error.SolverError, ArithmeticError, ValueError) as exc:
            errors.append(f"{solver}@{eps:g}: {exc}")
            continue
        if w.value is None or rho.value is None or z.value is None:
            errors.append(f"{solver}@{eps:g}: status {primal.status}/{dual.status}")
            continue
        lower = max(_primal_lower(j, w.value, rho.value, dout), 0.0)
        upper = min(_dual_upper(j, z.value, din, dout), 2.0)
        res = DiamondResult(0.5 * (lower + upper), lower, upper, f"{solver}@{eps:g}")
        if best is None or res.upper - res.lower < best.upper - best.lower:
            best = res
        if res.error <= tol:
            return res
        errors.append(f"{solver}@{eps:g}: bracket {res.upper - res.lower:.2e}")
    where = f"; best error {best.error:.2e} > {tol:.0e}" if best else ""
    raise NumericalError("diamond norm not certified: " + "; ".join(errors) + where)


# solver and tolerance tried in order by the diamond-norm oracle
_DIAMOND_LADDER = (
    (cp.CLARABEL, 1e-9),
    (cp.CVXOPT, 1e-9),
    (cp.CLARABEL, 1e-8),
    (cp.CVXOPT, 1e-8),
)


def diamond_norm(pair: ChannelPair, tol: float = 1e-7) -> float:
    """``|| K1 - K2 ||_diamond`` to within ``tol``; see :func:`diamond_norm_bracket`."""
    return diamond_norm_bracket(pair, tol).value


def _check_povm(povm: Sequence, dim: int, tol: float = 1e-9) -> list[np.ndarray]:
    elements = [as_matrix(e, square=True, name="POVM element") for e in povm]
    if not elements:
        raise ValidationError("POVM is empty")
    total = np.zeros((dim, dim), dtype=np.complex128)
    for e in elements:
        if e.shape != (dim, dim):
            raise ValidationError(f"POVM element of shape {e.shape} on a {dim}-dimensional output")
        if np.abs(e - e.conj().T).max() > tol or np.linalg.eigvalsh(0.5 * (e + e.conj().T))[0] < -tol:
            raise ValidationError("POVM element is not positive semidefinite")
        total += e
    if np.abs(total - np.eye(dim)).max() > tol:
        raise ValidationError("POVM elements do not sum to the identity")
    return elements


def _probe_state(probe, din: int) -> tuple[np.ndarray, int]:
    """Probe as a density matrix and its ancilla dimension; default maximally entangled."""
    if probe is None:
        phi = np.eye(din).reshape(-1) / np.sqrt(din)
        return np.outer(phi, phi.conj()), din
    p = np.asarray(probe, dtype=np.complex128)
    if p.ndim == 1:
        p = np.outer(p, p.conj()) / np.vdot(p, p).real
    p = density_matrix(p, 1e-9)
    if p.shape[0] % din:
        raise ValidationError(f"probe dimension {p.shape[0]} is not a multiple of the input dimension {din}")
    return p, p.shape[0] // din


def _output_state(family: ChannelFamily, x: float, rho: np.ndarray, d_anc: int) -> np.ndarray:
    k = family(x)
    return k.extend(d_anc)(rho) if d_anc > 1 else k(rho)


def _fd_fisher(family: ChannelFamily, x: float, h: float, fid) -> float:
    """``8 (1 - fid(x - h/2, x + h/2)) / h^2`` with Richardson over ``h`` and ``h/2``."""
    if not STEP_RANGE[0] <= h <= STEP_RANGE[1]:
        raise ValidationError(f"step must lie in [{STEP_RANGE[0]:g}, {STEP_RANGE[1]:g}]")
    a, b = family.domain

    def est(step):
        lo, hi = x - step / 2, x + step / 2
        if lo < a:
            lo, hi = a, a + step
        elif hi > b:
            lo, hi = b - step, b
        return 8.0 * (1.0 - fid(lo, hi)) / step**2, lo == x - step / 2

    j_h, central = est(h)
    j_half, central_half = est(h / 2)
    # shifted pairs near an endpoint have a first-order error
    order = 4.0 if central and central_half else 2.0
    return max((order * j_half - j_h) / (order - 1.0), 0.0)


def classical_fisher_check(
    family: ChannelFamily, x: float, povm: Sequence, *, probe=None, h: float = 1e-3
) -> float:
    """Classical Fisher information of the outcome distribution of ``povm`` on the output.

    ``probe`` is a state vector or density matrix on system (x) ancilla; by
    default the maximally entangled state with an ancilla as large as the
    system.  Computed from the classical fidelity ``sum_y sqrt(p_y q_y)`` of
    neighbouring distributions.
    """
    k0 = family(x)
    rho, d_anc = _probe_state(probe, k0.dim_in)
    elements = _check_povm(povm, k0.dim_out * d_anc)

    def probs(t):
        out = _output_state(family, t, rho, d_anc)
        return np.clip([np.trace(e @ out).real for e in elements], 0.0, None)

    return _fd_fisher(family, x, h, lambda s, t: float(np.sum(np.sqrt(probs(s) * probs(t)))))


def state_fisher(family: ChannelFamily, x: float, *, probe=None, h: float = 1e-3) -> float:
    """Fisher information of the output state for a fixed probe, from the Uhlmann fidelity."""
    k0 = family(x)
    rho, d_anc = _probe_state(probe, k0.dim_in)

    def fid(s, t):
        return _fidelity_unchecked(_output_state(family, s, rho, d_anc), _output_state(family, t, rho, d_anc))

    return _fd_fisher(family, x, h, fid)
