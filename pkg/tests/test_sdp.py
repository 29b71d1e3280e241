import io

import numpy as np
import pytest

from chanmetric import sdp
from chanmetric.fidelity import fidelity
from chanmetric.channels import ChannelPair, identity
from chanmetric.matlin import ValidationError, herm_eigvals, op_norm
from conftest import random_hermitian


def _max_t_below(h):
    b = sdp.ProblemBuilder()
    t = b.var("t")
    b.add(sdp.lmi_spectral_lb(sdp.Affine.constant(h), t))
    return b.build({t: 1.0}, "max")


def test_scalar_program():
    b = sdp.ProblemBuilder()
    t = b.var("t")
    b.add(sdp.Affine.constant(np.eye(1)) - sdp.Affine.scalar_var(t))
    sol = sdp.solve(b.build({t: 1.0}, "max"))
    assert sol.ok and abs(sol.value - 1) < 1e-8 and sol.gap <= 1e-9


def test_lambda_min_program():
    sol = sdp.solve(_max_t_below(np.diag([2.0, 3.0])))
    assert sol.ok and abs(sol.value - 2) < 1e-8


def test_identical_channel_program():
    assert abs(fidelity(ChannelPair(identity(2), identity(2)), method="sdp").fidelity - 1) < 1e-8


def test_spectral_lb_random(rng):
    for _ in range(5):
        h = random_hermitian(4, rng)
        sol = sdp.solve(_max_t_below(h))
        assert sol.ok and abs(sol.value - herm_eigvals(h)[0]) < 1e-7


def _contraction_feasible(w):
    b = sdp.ProblemBuilder()
    t = b.var("t")
    w_expr = sdp.Affine.constant(np.asarray(w, dtype=complex))
    blk = sdp.lmi_contraction(w_expr)
    b.add(blk.expr + sdp.Affine(np.zeros((blk.dim, blk.dim)), [t], np.eye(blk.dim)[None]))
    # max -t s.t. block + t I >= 0: optimum -t = lambda_min(block)
    return sdp.solve(b.build({t: -1.0}, "max"))


def test_contraction_block():
    assert _contraction_feasible(np.eye(3)).value >= -1e-8
    assert _contraction_feasible(1.1 * np.eye(3)).value < -1e-3
    assert _contraction_feasible([[0.6 + 0.8j]]).value >= -1e-8
    assert _contraction_feasible([[0.9 + 0.8j]]).value < -1e-3


def _min_opnorm(m):
    b = sdp.ProblemBuilder()
    t = b.var("t")
    b.add(sdp.lmi_opnorm_ub(sdp.Affine.constant(m), t))
    return sdp.solve(b.build({t: 1.0}, "min"))


def test_opnorm_ub(rng):
    assert abs(_min_opnorm(np.zeros((2, 2))).value) < 1e-8
    m = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    sol = _min_opnorm(m)
    assert sol.ok and abs(sol.value - op_norm(m)) < 1e-7


def test_opnorm_of_i_minus_w():
    b = sdp.ProblemBuilder()
    t, w = b.var("t"), b.var("w")
    wexpr = sdp.Affine.scalar_var(w)
    b.add(sdp.lmi_contraction(wexpr))
    b.add(sdp.lmi_opnorm_ub(np.eye(1) - wexpr, t))
    sol = sdp.solve(b.build({t: 1.0}, "min"))
    assert sol.ok and abs(sol.value) < 1e-7 and abs(sol.y[w] - 1) < 1e-6


@pytest.mark.parametrize("t2,expected", [(0.0, 0.0), (0.5, 0.25)])
def test_quad_epigraph(t2, expected):
    b = sdp.ProblemBuilder()
    t, s = b.var("t2"), b.var("s")
    b.add(sdp.lmi_quad_epigraph(t, s))
    fix = sdp.Affine(np.diag([t2, -t2]), [t], np.diag([-1.0, 1.0])[None])
    b.add(fix)
    sol = sdp.solve(b.build({s: 1.0}, "min"))
    assert sol.ok and abs(sol.value - expected) < 1e-7


def test_quad_epigraph_with_opnorm(rng):
    m = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    b = sdp.ProblemBuilder()
    t, s = b.var("t"), b.var("s")
    b.add(sdp.lmi_opnorm_ub(sdp.Affine.constant(m), t))
    b.add(sdp.lmi_quad_epigraph(t, s))
    sol = sdp.solve(b.build({s: 1.0}, "min"))
    assert sol.ok and abs(sol.value - op_norm(m) ** 2) < 1e-6


def test_weak_duality_and_gap(rng):
    sol = sdp.solve(_max_t_below(random_hermitian(5, rng)), 1e-9)
    assert sol.ok
    assert sol.gap <= 1e-9 * max(1, abs(sol.value))
    assert sol.min_block_eig >= -1e-8


def test_reproducible(rng):
    p = _max_t_below(random_hermitian(4, rng))
    a, b = sdp.solve(p), sdp.solve(p)
    assert abs(a.value - b.value) <= 2e-9


def test_embedding_soundness(rng):
    # complex feasibility of H + c I >= 0 decided by the real-embedded solve
    for _ in range(20):
        h = random_hermitian(3, rng)
        sol = sdp.solve(_max_t_below(h))
        assert sol.ok
        assert (sol.value >= 0) == (np.linalg.eigvalsh(h)[0] >= 0)


def test_infeasible_status():
    b = sdp.ProblemBuilder()
    t = b.var("t")
    b.add(sdp.Affine(np.diag([-1.0]), [t], np.zeros((1, 1, 1))))
    sol = sdp.solve(b.build({t: 1.0}, "max"))
    assert not sol.ok and sol.status in (sdp.INFEASIBLE, sdp.NUMERIC_FAILURE)
    with pytest.raises(sdp.SdpError):
        sdp.solve_or_raise(b.build({t: 1.0}, "max"))


def test_unbounded_status():
    b = sdp.ProblemBuilder()
    t = b.var("t")
    b.add(sdp.Affine.scalar_var(t))
    sol = sdp.solve(b.build({t: 1.0}, "max"))
    assert not sol.ok and sol.status in (sdp.UNBOUNDED, sdp.NUMERIC_FAILURE)


def test_validation():
    with pytest.raises(ValidationError):
        sdp.solve(_max_t_below(np.eye(2)), tol=1e-1)
    with pytest.raises(ValidationError):
        sdp.LmiBlock(sdp.Affine.constant(np.array([[0, 1], [0, 0]])))
    with pytest.raises(ValidationError):
        sdp.SdpProblem(1, np.ones(1), "sup", [])
    with pytest.raises(ValidationError):
        sdp.SdpProblem(1, np.ones(1), "max", [sdp.LmiBlock(sdp.Affine.scalar_var(3))])


def test_dump(rng):
    buf = io.StringIO()
    with sdp.dump_to(buf):
        sdp.solve(_max_t_below(np.diag([2.0, 3.0])))
    text = buf.getvalue()
    assert text and "block" in text.lower()
