"""Channel fidelity from its dual form, with certified two-sided bounds.

Exchanging max and min in the fidelity program gives

    F = min_rho || M(rho) ||_1,    M(rho)_ij = Tr(rho F_1i^dag F_2j),

over density matrices ``rho`` on the input space.  Any ``rho`` yields an
upper bound ``||M(rho)||_1``; the conjugate polar factor ``W`` of
``M(rho)`` is a contraction, so ``1/2 lambda_min(K_W + K_W^dag)`` is a lower
bound.  Both are plain linear algebra on the full problem, so the bracket
is a certificate that does not depend on how ``rho`` was found.

``rho`` is found by minimizing ``||M(rho)||_1 - mu log det rho`` with BFGS
over ``rho = sigma sigma^dag / Tr``, for a decreasing sequence of ``mu``.
At a barrier minimizer the bracket is at most ``mu * dim``.  Keeping
``rho`` full rank keeps ``M(rho)`` full rank for linearly independent Kraus
sets, so the norm is smooth and the polar factor is unique.  That is what
makes this accurate on near-identical pairs, where interior-point SDP
solvers stall around 1e-8.  When ``rho`` nears the boundary BFGS can stall;
the search is then repeated with ``sigma`` rescaled so that the current
point is the identity, which leaves the log-det barrier unchanged.

For ``A^{(x)n}`` versus ``B^{(x)n}`` the problem is invariant under
permuting copies, so ``rho`` is taken permutation invariant,
``rho = (+)_mu rho_mu (x) I``.  Then ``M(rho)`` commutes with the
permutation action on the Kraus indices and splits as ``(+)_lam M_lam (x) I``,
and the whole objective lives on the small blocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .channels import KrausChannel, tensor_power
from .symmetry import irrep_frames, match_frames, twirl

__all__ = ["DualResult", "minimal_kraus", "dual_fidelity", "dual_fidelity_tensor_power"]

log = logging.getLogger(__name__)

_MU_START = 1e-2
_MU_FLOOR = 1e-15
_RESTARTS = 3  # BFGS runs per barrier weight, each from a recentred point


@dataclass
class DualResult:
    upper: float
    lower: float
    w: np.ndarray  # contraction attaining ``lower``, for the Kraus sets as given
    rho: np.ndarray  # state attaining ``upper``
    iterations: int

    @property
    def gap(self) -> float:
        return max(self.upper - self.lower, 0.0)

    @property
    def value(self) -> float:
        return 0.5 * (self.upper + self.lower)


def minimal_kraus(ops: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Linearly independent Kraus set ``G`` and isometry ``C`` with ``F_i = sum_k C_ik G_k``."""
    q, dout, din = ops.shape
    u, s, vh = np.linalg.svd(ops.reshape(q, -1), full_matrices=False)
    keep = s > rtol * max(s[0], 1e-300)
    return (s[keep, None] * vh[keep]).reshape(-1, dout, din), u[:, keep]


@dataclass
class _Reduced:
    """The dual objective on blocks.

    ``s[l][m][a, b]`` is the compression of ``F~_a^dag G~_b`` (Kraus block
    ``l``) onto system block ``m``, scaled by that block's copy count, so
    ``M_l[a, b] = sum_m Tr(R_m s[l][m][a, b])``.
    """

    kraus_copies: list[int]
    sys_copies: list[int]
    sys_sizes: list[int]
    s: list[list[np.ndarray]]

    @property
    def dim(self) -> int:
        return int(sum(c * m for c, m in zip(self.sys_copies, self.sys_sizes)))


def _iter_slices(sizes):
    start = 0
    for m in sizes:
        yield start, m
        start += 2 * m * m


class _Objective:
    def __init__(self, red: _Reduced):
        self.red = red
        self._slices = list(_iter_slices(red.sys_sizes))
        self.mu = _MU_START
        # sigma = P X; recentring P at the current point keeps BFGS well conditioned
        self.precond = [np.eye(m, dtype=np.complex128) for m in red.sys_sizes]

    def unpack(self, z):
        xs = [(z[i : i + m * m] + 1j * z[i + m * m : i + 2 * m * m]).reshape(m, m) for i, m in self._slices]
        return [p @ x for p, x in zip(self.precond, xs)]

    def recentre(self, z) -> np.ndarray:
        sigmas = self.unpack(z)
        scale = np.sqrt(sum(c * np.vdot(s, s).real for c, s in zip(self.red.sys_copies, sigmas)))
        self.precond = [s / scale for s in sigmas]
        return self.start()

    @staticmethod
    def pack(mats) -> np.ndarray:
        return np.concatenate([np.concatenate([x.real.ravel(), x.imag.ravel()]) for x in mats])

    def start(self) -> np.ndarray:
        return self.pack([np.eye(m, dtype=np.complex128) for m in self.red.sys_sizes])

    def states(self, sigmas):
        norm = sum(c * np.vdot(s, s).real for c, s in zip(self.red.sys_copies, sigmas))
        return [s @ s.conj().T / norm for s in sigmas], norm

    def blocks(self, states):
        """Kraus blocks of ``M``, their polar factors and the trace norm."""
        f, ws = 0.0, []
        for copies, s_l in zip(self.red.kraus_copies, self.red.s):
            m = sum(np.einsum("abxy,yx->ab", s_lm, r) for s_lm, r in zip(s_l, states))
            u, sv, vh = np.linalg.svd(m, full_matrices=False)
            f += copies * sv.sum()
            ws.append((u @ vh).conj())
        return f, ws

    def sys_gradients(self, ws):
        grads = []
        for k in range(len(self.red.sys_sizes)):
            g = sum(c * np.einsum("ab,abxy->xy", w, s_l[k]) for c, w, s_l in zip(self.red.kraus_copies, ws, self.red.s))
            grads.append(0.5 * (g + g.conj().T))
        return grads

    def __call__(self, z):
        sigmas = self.unpack(z)
        states, norm = self.states(sigmas)
        f, ws = self.blocks(states)
        val, out = f, []
        dim = self.red.dim
        for c, s, g, p in zip(self.red.sys_copies, sigmas, self.sys_gradients(ws), self.precond):
            sign, logdet = np.linalg.slogdet(s)
            if sign == 0:
                return np.inf, np.zeros_like(z)
            val -= self.mu * c * (2 * logdet - s.shape[0] * np.log(norm))
            grad = (g - c * f * np.eye(s.shape[0])) @ s / norm
            grad += self.mu * c * (dim * s / norm - np.linalg.inv(s).conj().T)
            out.append(2 * p.conj().T @ grad)
        return val / self.mu, self.pack(out) / self.mu


def _bracket(a: np.ndarray, b: np.ndarray, rho: np.ndarray, w: np.ndarray):
    """Rigorous ``(upper, lower, w)`` on the full problem."""
    x = (a @ rho).reshape(a.shape[0], -1)
    upper = float(np.linalg.svd(x.conj() @ b.reshape(b.shape[0], -1).T, compute_uv=False).sum())
    w = w / max(1.0, float(np.linalg.norm(w, 2)))
    q1, dout, din = a.shape
    kw = a.reshape(q1 * dout, din).conj().T @ np.tensordot(w, b, axes=(1, 0)).reshape(q1 * dout, din)
    lower = float(np.linalg.eigvalsh(0.5 * (kw + kw.conj().T))[0])
    if lower < 0.0:  # W = 0 already certifies F >= 0
        return upper, 0.0, np.zeros_like(w)
    return upper, lower, w


def _descend(obj: _Objective, z, certify, tol: float, max_iter: int, restarts: int):
    """Follow the barrier path from ``obj.mu`` down; returns ``(best, z, iterations)``."""
    best, iterations = None, 0
    mu = obj.mu
    target_mu = 0.1 * tol / obj.red.dim
    while True:
        obj.mu = mu
        for _ in range(restarts):
            res = minimize(obj, z, jac=True, method="BFGS", options={"maxiter": max_iter, "gtol": 1e-7})
            iterations += int(res.nit)
            if np.all(np.isfinite(res.x)):
                z = res.x
            if restarts > 1:
                z = obj.recentre(z)
            if res.success:
                break
        states, _ = obj.states(obj.unpack(z))
        _, ws = obj.blocks(states)
        upper, lower, w, rho = certify(states, ws)
        if best is None or upper - lower < best[0] - best[1]:
            best = (upper, lower, w, rho)
        if (mu <= target_mu and best[0] - best[1] <= tol) or mu <= _MU_FLOOR:
            break
        mu = max(mu * (0.01 if mu > target_mu else 0.1), _MU_FLOOR)
    return best, z, iterations


def _minimize(red: _Reduced, certify, tol: float, max_iter: int):
    obj = _Objective(red)
    best, z, iterations = _descend(obj, obj.start(), certify, tol, max_iter, 1)
    if best[0] - best[1] > tol:
        # BFGS stalls when rho nears the boundary; retry from a recentred point
        obj.mu = min(_MU_START, max((best[0] - best[1]) / red.dim, _MU_FLOOR))
        retry, _, extra = _descend(obj, obj.recentre(z), certify, tol, max_iter, _RESTARTS)
        iterations += extra
        if retry[0] - retry[1] < best[0] - best[1]:
            best = retry
    upper, lower, w, rho = best
    log.debug("dual fidelity: [%.15f, %.15f] after %d iterations", lower, upper, iterations)
    return upper, lower, w, rho, iterations


def dual_fidelity(a: np.ndarray, b: np.ndarray, tol: float, *, max_iter: int = 2000) -> DualResult:
    """Bracket ``[lower, upper]`` on the fidelity of Kraus sets ``a`` and ``b``.

    Stops once ``upper - lower <= tol`` or the barrier weight reaches its
    floor; the caller decides whether the returned bracket is good enough.
    """
    ga, ca = minimal_kraus(a)
    gb, cb = minimal_kraus(b)
    red = _Reduced([1], [1], [a.shape[2]], [[np.einsum("iab,jac->ijbc", ga.conj(), gb)]])

    def certify(states, ws):
        upper, lower, w = _bracket(ga, gb, states[0], ws[0])
        return upper, lower, w, states[0]

    upper, lower, w, rho, its = _minimize(red, certify, tol, max_iter)
    return DualResult(upper, lower, ca @ w @ cb.conj().T, rho, its)


def _kron_power(m: np.ndarray, n: int) -> np.ndarray:
    out = m
    for _ in range(n - 1):
        out = np.kron(out, m)
    return out


def dual_fidelity_tensor_power(
    a: KrausChannel, b: KrausChannel, n: int, tol: float, *, max_iter: int = 2000
) -> DualResult:
    """:func:`dual_fidelity` for ``a^{(x)n}`` versus ``b^{(x)n}`` over permutation-invariant states.

    ``w`` is returned for the tensor-power Kraus sets ``{A_i1 (x) ... (x) A_in}``.
    """
    if n == 1:
        return dual_fidelity(a.kraus, b.kraus, tol, max_iter=max_iter)
    ga, ca = minimal_kraus(a.kraus)
    gb, cb = minimal_kraus(b.kraus)
    ta = tensor_power(KrausChannel(ga), n).kraus
    tb = tensor_power(KrausChannel(gb), n).kraus
    d = a.dim_in
    sys_frames = irrep_frames(d, n)
    pairs = match_frames(irrep_frames(len(ga), n), irrep_frames(len(gb), n))
    s_blocks, kraus_copies = [], []
    for f1, f2 in pairs:
        if f1.copies != f2.copies:
            raise ArithmeticError("matched Kraus irreps disagree in dimension")
        fa = np.einsum("ia,ixy->axy", f1.basis, ta)
        fb = np.einsum("ib,ixy->bxy", f2.basis, tb)
        t = twirl(np.einsum("axy,bxz->abyz", fa.conj(), fb), d, n)
        s_blocks.append(
            [fr.copies * np.einsum("xk,abxy,yl->abkl", fr.basis, t, fr.basis) for fr in sys_frames]
        )
        kraus_copies.append(f1.copies)
    red = _Reduced(kraus_copies, [f.copies for f in sys_frames], [f.basis.shape[1] for f in sys_frames], s_blocks)
    q1, q2 = len(ga), len(gb)

    def certify(states, ws):
        rho = sum(f.copies * f.basis @ r @ f.basis.T for f, r in zip(sys_frames, states))
        rho = twirl(rho, d, n)
        rho = 0.5 * (rho + rho.conj().T)
        w = sum(f1.copies * f1.basis @ wl @ f2.basis.T for (f1, f2), wl in zip(pairs, ws))
        w = twirl(w, q1, n, q2)
        upper, lower, w = _bracket(ta, tb, rho, w)
        return upper, lower, w, rho

    upper, lower, w, rho, its = _minimize(red, certify, tol, max_iter)
    w = _kron_power(ca, n) @ w @ _kron_power(cb, n).conj().T
    return DualResult(upper, lower, w, rho, its)
