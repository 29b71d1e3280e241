import math

import numpy as np
import pytest

from chanmetric import channels as ch
from chanmetric import fisher as fi
from chanmetric.matlin import ValidationError
from conftest import random_hermitian

HALF_Z = np.diag([0.5, -0.5])


def flipped(family):
    a, b = family.domain
    return fi.ChannelFamily(lambda x: family.evaluate(-x), (-b, -a), family.kraus_count, "flipped")


def test_constant_family():
    assert fi.qfi(fi.constant_family(ch.dephasing(0.3)), 0.5).value < 1e-6


@pytest.mark.parametrize("h,expected", [(HALF_Z, 1.0), (2 * HALF_Z, 4.0)])
def test_unitary_family(h, expected):
    fam = fi.unitary_family(h)
    for x in (0.4, 1.7):
        est = fi.qfi(fam, x)
        assert est.method == "richardson"
        assert abs(est.value - expected) < 1e-4 * expected
        assert est.error_budget < 1e-4


def test_qfi_unitary_examples():
    assert fi.qfi_unitary(np.zeros((2, 2))) == 0
    assert fi.qfi_unitary(HALF_Z) == 1
    assert fi.qfi_unitary(np.diag([3.0, 1.0, -1.0])) == 16


def test_random_generators():
    rng = np.random.default_rng(8)
    for i in range(10):
        h = random_hermitian(2 + i % 3, rng) / 2
        est = fi.qfi(fi.unitary_family(h), 0.3)
        expected = fi.qfi_unitary(h)
        assert abs(est.value - expected) <= max(1e-4, est.error_budget) * max(1.0, expected)


@pytest.mark.parametrize(
    "family,x",
    [(fi.dephasing_family(), 0.4), (fi.depolarizing_family(), 0.3), (fi.unitary_family(HALF_Z), 0.8)],
)
def test_sign_flip_invariance(family, x):
    assert abs(fi.qfi(family, x).value - fi.qfi(flipped(family), -x).value) < 1e-6


def test_dephasing_closed_form():
    # fidelity between dephasing(e1), dephasing(e2) is sum of sqrt products of weights
    x = 0.4
    expected = 1 / (1 - x * x)
    assert abs(fi.qfi(fi.dephasing_family(), x).value - expected) < 1e-4


def test_second_order_consistency():
    fam = fi.dephasing_family()
    hs = [0.08, 0.04, 0.02]
    js = [fi.qfi(fam, 0.5, h, richardson=False, tol=1e-12).value for h in hs]
    d1, d2 = abs(js[0] - js[1]), abs(js[1] - js[2])
    # an h^2 error shrinks fourfold when h halves
    assert d2 <= 4 * (d1 / 4) + 1e-6


def test_tensor_power_qfi_additive():
    est = fi.qfi(fi.dephasing_family(), 0.4, n_copies=2)
    assert abs(est.value - 2 / (1 - 0.16)) < 1e-3


def test_rotation_copies_heisenberg():
    assert abs(fi.qfi(fi.rotation_family(), 0.3, n_copies=2).value - 16) < 1e-3


def test_endpoint_shift():
    fam = fi.unitary_family(HALF_Z)
    est = fi.qfi(fam, 0.0)
    assert est.points[0] == 0.0 and abs(est.value - 1) < 1e-4


def test_qfi_errors():
    fam = fi.unitary_family(HALF_Z)
    with pytest.raises(ValidationError):
        fi.qfi(fam, 5.0)
    with pytest.raises(ValidationError):
        fi.qfi(fam, 1.0, h=1.0)
    with pytest.raises(ValidationError):
        fi.qfi(fam, 1.0, h=1e-7)
    with pytest.raises(ValidationError, match="too loose"):
        fi.qfi(fam, 1.0, h=1e-3, tol=1e-6)
    with pytest.raises(ValidationError, match="accuracy"):
        fi.qfi(fam, 1.0, h=1e-3, tol=1e-10, accuracy=1e-5)


def test_family_validation():
    with pytest.raises(ValidationError):
        fi.ChannelFamily(ch.dephasing, (1.0, 0.0), 2)
    jumpy = fi.ChannelFamily(lambda x: ch.dephasing(x) if x < 0.5 else ch.identity(2), (0.0, 1.0), 2)
    with pytest.raises(ValidationError, match="Kraus"):
        fi.qfi(jumpy, 0.7)


def test_precision_bound():
    assert fi.precision_bound(1.0, 1) == 1
    assert abs(fi.precision_bound(4.0, 100) - 0.05) < 1e-15
    with pytest.raises(ValidationError, match="not locally estimable"):
        fi.precision_bound(fi.qfi(fi.constant_family(ch.identity(2)), 0.5), 10)
    with pytest.raises(ValidationError):
        fi.precision_bound(1.0, 0)
    est = fi.qfi(fi.unitary_family(HALF_Z), 0.5)
    assert abs(fi.precision_bound(est, 4) - 0.5) < 1e-4


def test_path_length_examples():
    assert fi.path_length(fi.constant_family(ch.dephasing(0.2)), grid=9) < 1e-3
    assert abs(fi.path_length(fi.unitary_family(HALF_Z), grid=9) - math.pi / 2) < 1e-4


def test_path_length_scaled_variant():
    fam = fi.unitary_family(HALF_Z)
    one = fi.path_length(fam, 1, 9)
    assert abs(fi.path_length(fam, 3, 9, "single-copy-scaled") - 3 * one) < 1e-4
    # exact unitary path lengths grow linearly too
    assert abs(fi.path_length(fam, 2, 9) - 2 * one) < 1e-3


def test_path_length_validation():
    fam = fi.unitary_family(HALF_Z)
    with pytest.raises(ValidationError):
        fi.path_length(fam, grid=3)
    with pytest.raises(ValidationError):
        fi.path_length(fam, variant="approx")
    with pytest.raises(ch.ResourceLimitError, match="single-copy-scaled"):
        fi.path_length(fi.depolarizing_family(), 6)


def test_path_length_trace_records():
    res = fi.path_length_trace(fi.unitary_family(HALF_Z), grid=9)
    assert res.converged and res.history[0][0] == 9 and res.grid == res.history[-1][0]


def test_mixture_path_parametrizations():
    k0, k1 = ch.rotation_x(0.3), ch.dephasing(0.5)
    ang = fi.mixture_path(k0, k1)
    lin = fi.mixture_path(k0, k1, "linear")
    assert ch.choi_equal(ang(0.0), k0) and ch.choi_equal(ang(math.pi / 2), k1)
    assert ch.choi_equal(lin(0.0), k0) and ch.choi_equal(lin(1.0), k1)
    t = 0.3
    assert ch.choi_equal(lin(t), ang(math.asin(math.sqrt(t))))
    with pytest.raises(ValidationError):
        fi.mixture_path(k0, k1, "cubic")


def test_builtin_family():
    gen = fi.builtin_family("unitary-generator", generator=HALF_Z, lo=0, hi=1)
    assert gen.domain == (0.0, 1.0)
    assert fi.builtin_family("depolarizing", d=3)(0.5).dim_in == 3
    mp = fi.builtin_family("mixture-path", a=ch.identity(2), b=ch.dephasing(0.5))
    assert mp.kraus_count == 3
    for bad in [("rotation", {"x": 1}), ("nope", {}), ("unitary-generator", {}), ("mixture-path", {"a": 1})]:
        with pytest.raises(ValidationError):
            fi.builtin_family(bad[0], **bad[1])


def test_variants_monotone_on_mixture_path():
    fam = fi.mixture_path(ch.rotation_x(0.3), ch.dephasing(0.5))
    for n in (1, 2):
        exact = fi.path_length(fam, n, 21)
        scaled = fi.path_length(fam, n, 21, "single-copy-scaled")
        assert exact <= scaled + 1e-6
