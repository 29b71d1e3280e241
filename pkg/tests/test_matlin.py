import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chanmetric import matlin as ml
from conftest import random_hermitian

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def test_herm_eigvals_examples():
    assert np.allclose(ml.herm_eigvals(np.eye(2)), [1, 1])
    assert np.allclose(ml.herm_eigvals(SZ), [-1, 1])
    assert np.allclose(ml.herm_eigvals((SX + SZ) / np.sqrt(2)), [-1, 1], atol=1e-12)


def test_herm_eigvals_rejects_non_hermitian():
    with pytest.raises(ml.ValidationError):
        ml.herm_eigvals(np.array([[0, 1], [0, 0]], dtype=complex))


def test_herm_eigh_reconstructs(rng):
    m = random_hermitian(6, rng)
    w, v = ml.herm_eigh(m)
    assert np.all(np.diff(w) >= 0)
    assert np.linalg.norm(m - v @ np.diag(w) @ v.conj().T) <= 1e-9 * np.linalg.norm(m)


@given(st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_rayleigh_quotient_within_spectrum(d, seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(d, rng)
    w = ml.herm_eigvals(m)
    for _ in range(100):
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        r = (x.conj() @ m @ x).real / (x.conj() @ x).real
        assert w[0] - 1e-9 <= r <= w[-1] + 1e-9


def test_eig_angles_examples():
    assert np.allclose(ml.unitary_eig_angles(np.eye(3)), 0)
    d = np.diag([np.exp(-0.3j), np.exp(0.3j)])
    assert np.allclose(sorted(ml.unitary_eig_angles(d)), [-0.3, 0.3])
    u = np.cos(0.3) * np.eye(2) + 1j * np.sin(0.3) * SX
    assert np.allclose(sorted(ml.unitary_eig_angles(u)), [-0.3, 0.3])


def test_eig_angles_sign_convention():
    # eigenvalue e^{-i theta}
    assert np.isclose(ml.unitary_eig_angles(np.array([[np.exp(-0.7j)]]))[0], 0.7)


def test_eig_angles_range():
    a = ml.unitary_eig_angles(np.diag([-1.0, 1j, -1j]).astype(complex))
    assert np.all(a > -np.pi) and np.all(a <= np.pi)
    assert np.isclose(max(a), np.pi)


def test_eig_angles_rejects_non_unitary():
    with pytest.raises(ml.ValidationError):
        ml.unitary_eig_angles(np.diag([1.0, 0.5]))


@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_eig_angles_det_phase(d, seed):
    from chanmetric.channels import random_unitary

    u = random_unitary(d, np.random.default_rng(seed))
    total = np.sum(ml.unitary_eig_angles(u))
    diff = (total + np.angle(np.linalg.det(u))) % (2 * np.pi)
    assert min(diff, 2 * np.pi - diff) <= 1e-8


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_eig_angles_similarity_invariant(d, seed):
    from chanmetric.channels import random_unitary

    rng = np.random.default_rng(seed)
    u, v = random_unitary(d, rng), random_unitary(d, rng)
    a = np.sort(np.exp(-1j * ml.unitary_eig_angles(u)).view(float).reshape(-1, 2), axis=0)
    b = np.sort(np.exp(-1j * ml.unitary_eig_angles(v.conj().T @ u @ v)).view(float).reshape(-1, 2), axis=0)
    assert np.allclose(a, b, atol=1e-8)


def test_op_norm_examples(rng):
    from chanmetric.channels import random_unitary

    assert ml.op_norm(np.zeros((3, 2))) == 0
    assert np.isclose(ml.op_norm(random_unitary(4, rng)), 1)
    assert np.isclose(ml.op_norm(np.diag([0.5, -2.0])), 2)
    p = random_hermitian(4, rng)
    p = p @ p
    assert np.isclose(ml.op_norm(p), max(ml.herm_eigvals(p)))


def test_op_norm_rejects_nan():
    with pytest.raises(ml.ValidationError):
        ml.op_norm(np.array([[np.nan]]))


def test_real_embed_examples():
    assert np.allclose(ml.real_embed(np.eye(2)), np.eye(4))
    e = ml.real_embed(np.array([[0, 1j], [-1j, 0]]))
    assert np.allclose(np.linalg.eigvalsh(e), [-1, -1, 1, 1])
    r = np.array([[1.0, 2.0], [2.0, 3.0]])
    e = ml.real_embed(r)
    assert np.allclose(e[:2, :2], r) and np.allclose(e[2:, 2:], r) and np.allclose(e[:2, 2:], 0)


@given(st.integers(1, 6), st.booleans(), st.integers(0, 2**32 - 1))
def test_real_embed_psd_iff(d, psd, seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(d, rng)
    if psd:
        m = m @ m
    w = ml.herm_eigvals(m)
    we = np.linalg.eigvalsh(ml.real_embed(m))
    assert np.allclose(np.sort(np.repeat(w, 2)), we, atol=1e-9)
    assert (w.min() >= -1e-10) == (we.min() >= -1e-10)
