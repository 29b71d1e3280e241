import math

import numpy as np
import pytest

from chanmetric import channels as ch
from chanmetric import discrimination as dc
from chanmetric import fisher as fi
from chanmetric.fidelity import angle, fidelity_tensor_power, k_w, min_norm_i_minus_kw
from chanmetric.matlin import ValidationError
from conftest import random_pairs

ID = ch.identity(2)
ORTHO = ch.ChannelPair(ID, ch.rotation_x(math.pi / 2))
SAME = ch.ChannelPair(ch.dephasing(0.3), ch.dephasing(0.3))


def random_contraction(q1, q2, rng):
    w = rng.standard_normal((q1, q2)) + 1j * rng.standard_normal((q1, q2))
    return w / np.linalg.norm(w, 2) * rng.uniform(0.2, 1.0)


def bound_by_hand(pair, n, w):
    kw = k_w(pair, w)
    eye = np.eye(kw.shape[0])
    return n * np.linalg.norm(2 * eye - kw - kw.conj().T, 2) + n * (n - 1) * np.linalg.norm(eye - kw, 2) ** 2


def unitary_pair(theta, rng):
    # qubit unitaries whose relative rotation has eigen-angles +-theta
    v = ch.random_unitary(2, rng)
    rel = v @ np.diag(np.exp([-1j * theta, 1j * theta])) @ v.conj().T
    u = ch.random_unitary(2, rng)
    return ch.ChannelPair(ch.unitary_channel(u), ch.unitary_channel(u @ rel))


def test_lb_angle_examples(paper_pair):
    assert dc.lb_angle(ORTHO) == 1
    assert dc.lb_angle(paper_pair) == 3
    with pytest.raises(dc.Unbounded, match="never perfectly distinguishable"):
        dc.lb_angle(SAME)


def test_lb_angle_ceiling_slack():
    # angle exactly pi/4 must give 2, not 3
    assert dc.lb_angle(ch.ChannelPair(ID, ch.rotation_x(math.pi / 4))) == 2


def test_lb_angle_matches_subadditivity():
    for pair in random_pairs(5, 31):
        a = angle(pair)
        n = dc.lb_angle(pair)
        assert n * a >= math.pi / 2 - 1e-8
        assert (n - 1) * a < math.pi / 2


def test_nparallel_examples():
    for n in (1, 3, 7):
        assert abs(dc.nparallel_upper_bound(SAME, n, np.eye(2))) < 1e-12
    for pair in random_pairs(3, 32):
        res = min_norm_i_minus_kw(pair)[1]
        assert dc.nparallel_upper_bound(pair, 1, res) >= 2 - 2 * math.cos(angle(pair)) - 1e-7
    with pytest.raises(ValidationError):
        dc.nparallel_upper_bound(SAME, 2, 2 * np.eye(2))


def test_nparallel_matches_direct_evaluation(rng):
    pair = random_pairs(1, 33, kraus=(2, 3))[0]
    w = random_contraction(2, 3, rng)
    for n in (1, 2, 5):
        assert abs(dc.nparallel_upper_bound(pair, n, w) - bound_by_hand(pair, n, w)) < 1e-10


def test_nparallel_validity():
    rng = np.random.default_rng(34)
    for pair in random_pairs(3, 35):
        for n in (1, 2, 3):
            lhs = 2 - 2 * fidelity_tensor_power(pair.a, pair.b, n).fidelity
            for _ in range(5):
                w = random_contraction(pair.a.num_kraus, pair.b.num_kraus, rng)
                assert lhs <= dc.nparallel_upper_bound(pair, n, w) + 1e-6


def test_smallest_n_quadratic():
    for c1, c2 in [(0.3, 0.01), (0.0, 0.5), (1.0, 0.0), (0.345309, 0.095309)]:
        n = dc._smallest_n_quadratic(c1, c2, 2.0)
        f = lambda k: k * c1 + k * (k - 1) * c2  # noqa: E731
        assert f(n) >= 2.0 and (n == 1 or f(n - 1) < 2.0)
    assert dc._smallest_n_quadratic(0.0, 0.0, 2.0) is None


def test_fixed_w_examples():
    assert dc.lb_parallel_fixed_w(ORTHO) == 1
    with pytest.raises(dc.Unbounded):
        dc.lb_parallel_fixed_w(SAME)


def test_fixed_w_against_direct_scan(paper_pair):
    det = dc.lb_parallel_fixed_w_details(paper_pair)
    _, w = min_norm_i_minus_kw(paper_pair)
    n = next(k for k in range(1, 100) if bound_by_hand(paper_pair, k, w) >= 2 - 1e-7)
    assert det.n == n
    kw = k_w(paper_pair, w)
    assert abs(det.c1 - np.linalg.norm(2 * np.eye(2) - kw - kw.conj().T, 2)) < 1e-6
    assert abs(det.c2 - np.linalg.norm(np.eye(2) - kw, 2) ** 2) < 1e-6


def test_per_n_examples():
    assert dc.lb_parallel_per_n(ORTHO) == 1
    with pytest.raises(dc.Unbounded):
        dc.lb_parallel_per_n(SAME)


def test_per_n_value_is_attained_and_below_fixed_w(paper_pair):
    _, w_star = min_norm_i_minus_kw(paper_pair)
    for n in (1, 2, 4):
        value, w = dc.per_n_value(paper_pair, n)
        assert np.linalg.norm(w, 2) <= 1 + 1e-7
        assert abs(dc.nparallel_upper_bound(paper_pair, n, w) - value) < 1e-6
        assert value <= dc.nparallel_upper_bound(paper_pair, n, w_star) + 1e-7


def test_per_n_at_least_fixed_w():
    for pair in [*random_pairs(3, 36), unitary_pair(0.5, np.random.default_rng(0))]:
        try:
            fixed = dc.lb_parallel_fixed_w(pair)
        except dc.Unbounded:
            continue
        assert dc.lb_parallel_per_n(pair) >= fixed


def test_per_n_trace_monotone(paper_pair):
    det = dc.lb_parallel_per_n_details(paper_pair)
    values = [v for _, v in sorted(det.trace)]
    assert all(b >= a - 1e-7 for a, b in zip(values, values[1:]))
    assert det.trace[-1][1] >= 2 - 1e-7


def test_lb_path_examples():
    rot = fi.rotation_family((0.0, math.pi / 2))
    assert dc.lb_path(ORTHO, rot) == 1
    with pytest.raises(dc.Unbounded):
        dc.lb_path(SAME, fi.constant_family(SAME.a), max_n=3)
    with pytest.raises(ValidationError, match="endpoint"):
        dc.lb_path(ORTHO, fi.rotation_family((0.0, 1.0)))


def test_lb_path_scaled_on_unitary_pair():
    pair = ch.ChannelPair(ID, ch.rotation_x(0.4))
    res = dc.lb_path_details(pair, fi.rotation_family((0.0, 0.4)), "single-copy-scaled")
    assert res.n == math.ceil(math.pi / 0.8)


def test_direct_examples():
    assert dc.direct_min_n(ORTHO).n == 1
    res = dc.direct_min_n(ch.ChannelPair(ID, ch.dephasing(0.5)), max_n=4)
    assert not res.found and len(res.trace) == 4
    assert all(f > 0.5 for _, f in res.trace)
    # W = e1^{(x)N} certifies F(N copies) >= 0.75^{N/2} > 0
    for n in (2, 3):
        a, b = ch.tensor_power(ID, n), ch.tensor_power(ch.dephasing(0.5), n)
        w = np.zeros((1, 2**n))
        w[0, 0] = 1
        kw = k_w(ch.ChannelPair(a, b), w)
        assert np.linalg.eigvalsh(0.5 * (kw + kw.conj().T))[0] >= 0.75 ** (n / 2) - 1e-12


def test_direct_cap_reported():
    # qutrit unitaries a small angle apart: 3^5 exceeds the dimension cap first
    u = ch.hamiltonian_unitary(np.diag([0.1, 0.0, -0.1]), 1.0)
    res = dc.direct_min_n(ch.ChannelPair(ch.identity(3), ch.unitary_channel(u)), max_n=8)
    assert not res.found and len(res.trace) == 4
    assert res.stopped.startswith("N=5") and "128" in res.stopped


def test_soundness_random_unitary_pairs():
    rng = np.random.default_rng(37)
    for theta in rng.uniform(math.pi / 8 + 0.02, math.pi / 2, 5):
        pair = unitary_pair(theta, rng)
        rep = dc.report(pair, path=False, max_n=5)
        assert rep.direct_min_n == math.ceil(math.pi / (2 * theta))
        assert not rep.violations
        for name, v in rep.bounds().items():
            assert v is None or v <= rep.direct_min_n
        values = [f for _, f in rep.details["direct"]["trace"]]
        assert all(b <= a + 1e-7 for a, b in zip(values, values[1:]))


def test_report_orthogonal_and_identical():
    rep = dc.report(ORTHO, max_n=3)
    assert set(rep.bounds().values()) == {1} and rep.ok
    rep = dc.report(SAME, max_n=3)
    assert set(rep.bounds().values()) == {None}
    assert all(msg.startswith("unbounded") for msg in rep.errors.values())
    assert not rep.violations


def test_report_flags_violations():
    rep = dc.report(ORTHO, path=False, max_n=2)
    rep.lb_angle = 3
    rep.violations.clear()
    dc._check_invariants(rep)
    assert rep.violations and not rep.ok
