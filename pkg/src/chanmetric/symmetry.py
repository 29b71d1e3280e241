"""Permutation-symmetry reduction for programs over tensor-power channels.

For ``A^{(x)n}`` versus ``B^{(x)n}`` the fidelity program is invariant under
permuting the ``n`` copies.  Averaging a feasible ``W`` over that action keeps
it feasible and does not lower the objective (``lambda_min`` is concave), so
``W`` may be restricted to matrices constant on orbits of index pairs
``(I, J)``.  Such ``W`` commute with the permutation action and therefore
act as ``W_lam (x) I`` on each isotypic component; ``||W|| <= 1`` becomes
``||W_lam|| <= 1`` for every irrep label ``lam``, and ``lambda_min(K_W + K_W^dag)``
is the minimum over the compressed system blocks.

Irrep copies are located without character tables: the eigenspaces of a
random central element of the group algebra give the isotypic components,
and inside each one the lowest eigenspace of a random Hermitian element of
the group algebra is a single copy of the multiplicity space.  Both elements
use the same random coefficients on every tensor space, so labels and copies
match across the two Kraus index spaces and the system space.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .matlin import NumericalError

__all__ = ["IrrepFrame", "irrep_frames", "match_frames", "pair_orbits", "twirl", "MAX_COPIES"]

MAX_COPIES = 7


@dataclass(frozen=True)
class IrrepFrame:
    """Orthonormal columns spanning one copy of an isotypic component."""

    label: float
    level: float
    basis: np.ndarray
    copies: int = 1  # dimension of the permutation irrep


def _cycle_type(perm: tuple[int, ...]) -> tuple[int, ...]:
    seen = [False] * len(perm)
    lengths = []
    for start in range(len(perm)):
        if seen[start]:
            continue
        k, length = start, 0
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        lengths.append(length)
    return tuple(sorted(lengths))


def _permutation_indices(d: int, n: int, perm: tuple[int, ...]) -> np.ndarray:
    """Basis-index image of permuting the tensor factors of ``(C^d)^{(x)n}``."""
    grid = np.arange(d**n).reshape((d,) * n)
    return np.transpose(grid, perm).reshape(-1)


@lru_cache(maxsize=None)
def _group_coefficients(n: int, seed: int):
    rng = np.random.default_rng(seed)
    perms = list(itertools.permutations(range(n)))
    types = sorted({_cycle_type(p) for p in perms})
    class_weight = dict(zip(types, rng.uniform(1.0, 2.0, size=len(types))))
    central = np.array([class_weight[_cycle_type(p)] for p in perms])
    generic = rng.standard_normal(len(perms))
    return perms, central, generic


def _clusters(vals: np.ndarray, tol: float) -> list[np.ndarray]:
    groups, start = [], 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > tol:
            groups.append(np.arange(start, k))
            start = k
    return groups


@lru_cache(maxsize=64)
def irrep_frames(d: int, n: int, seed: int = 7) -> tuple[IrrepFrame, ...]:
    """One frame per irrep label occurring in ``(C^d)^{(x)n}``, sorted by label."""
    if n > MAX_COPIES:
        raise ValueError(f"symmetry reduction supports at most {MAX_COPIES} copies, got {n}")
    dim = d**n
    if dim == 1:
        return (IrrepFrame(_trivial_label(n, seed), _trivial_level(n, seed), np.ones((1, 1)), 1),)
    perms, central, generic = _group_coefficients(n, seed)
    c_mat = np.zeros((dim, dim))
    h_mat = np.zeros((dim, dim))
    rows = np.arange(dim)
    for p, a, b in zip(perms, central, generic):
        idx = _permutation_indices(d, n, p)
        c_mat[idx, rows] += a
        h_mat[idx, rows] += b
    h_mat = 0.5 * (h_mat + h_mat.T)
    c_mat = 0.5 * (c_mat + c_mat.T)
    scale = len(perms) * 2.0
    cvals, cvecs = np.linalg.eigh(c_mat)
    frames = []
    for grp in _clusters(cvals, 1e-7 * scale):
        iso = cvecs[:, grp]
        hvals, hvecs = np.linalg.eigh(iso.T @ h_mat @ iso)
        sub = _clusters(hvals, 1e-7 * scale)
        if len({len(s) for s in sub}) != 1:
            raise NumericalError("degenerate group-algebra sample; change the seed")
        first = sub[0]
        frames.append(
            IrrepFrame(float(cvals[grp].mean()), float(hvals[first].mean()), iso @ hvecs[:, first], len(sub))
        )
    return tuple(sorted(frames, key=lambda f: f.label))


def _trivial_label(n: int, seed: int) -> float:
    _, central, _ = _group_coefficients(n, seed)
    return float(central.sum())


def _trivial_level(n: int, seed: int) -> float:
    _, _, generic = _group_coefficients(n, seed)
    return float(generic.sum())


def match_frames(*spaces: tuple[IrrepFrame, ...]) -> list[tuple[IrrepFrame, ...]]:
    """Labels common to every space, with the matching frames."""
    out = []
    for frame in spaces[0]:
        found = [frame]
        for other in spaces[1:]:
            hit = [f for f in other if abs(f.label - frame.label) <= 1e-6 * max(1.0, abs(frame.label))]
            if not hit:
                break
            if abs(hit[0].level - frame.level) > 1e-6 * max(1.0, abs(frame.level)):
                raise NumericalError("irrep copies disagree across tensor spaces")
            found.append(hit[0])
        else:
            out.append(tuple(found))
    return out


def pair_orbits(q1: int, q2: int, n: int) -> tuple[np.ndarray, int]:
    """Orbit id of every index pair ``(I, J)`` under simultaneous permutation of copies.

    Returns an array of shape ``(q1**n, q2**n)`` with orbit ids and the
    number of orbits.
    """
    i_digits = np.indices((q1,) * n).reshape(n, -1).T  # (q1^n, n)
    j_digits = np.indices((q2,) * n).reshape(n, -1).T
    pair = i_digits[:, None, :] * q2 + j_digits[None, :, :]  # (q1^n, q2^n, n)
    keys = np.sort(pair.reshape(-1, n), axis=1)
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(q1**n, q2**n)
    return inv, int(inv.max()) + 1


@lru_cache(maxsize=16)
def _all_permutation_indices(d: int, n: int) -> np.ndarray:
    return np.stack([_permutation_indices(d, n, p) for p in itertools.permutations(range(n))])


def twirl(m: np.ndarray, d: int, n: int, d_col: int | None = None) -> np.ndarray:
    """Average of ``P m Q^T`` over simultaneous permutations of the ``n`` tensor factors.

    ``m`` may carry leading batch axes; its last two axes are indexed by
    ``(C^d)^{(x)n}`` and ``(C^d_col)^{(x)n}`` (``d_col`` defaults to ``d``).
    """
    rows = _all_permutation_indices(d, n)
    cols = rows if d_col is None or d_col == d else _all_permutation_indices(d_col, n)
    out = np.zeros_like(m)
    for r, c in zip(rows, cols):
        out += m[..., r[:, None], c[None, :]]
    return out / len(rows)
