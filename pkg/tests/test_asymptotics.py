import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.special import gamma as sp_gamma
from scipy.special import gammaln

from permstat import models
from permstat.asymptotics import (
    complex_gamma,
    h_asym,
    hwang_coeff_eF,
    hwang_coeff_F,
    hwang_coeff_multi,
    recip_gamma,
)
from permstat.models import Branch, SingularityDescriptor
from permstat.series import compute_h


def test_gamma_values():
    assert complex_gamma(1) == pytest.approx(1.0)
    assert complex_gamma(0.5).real == pytest.approx(1.7724538509055159, rel=1e-14)
    assert abs(complex_gamma(1j)) ** 2 == pytest.approx(math.pi / math.sinh(math.pi), rel=1e-13)


@given(st.floats(-6, 8), st.floats(-6, 6))
def test_gamma_against_scipy(re, im):
    w = complex(re, im)
    if abs(w - round(re)) < 1e-3 and round(re) <= 0:
        return
    ref = complex(sp_gamma(w))
    assert abs(complex_gamma(w) - ref) <= 1e-12 * max(1.0, abs(ref))


@given(st.floats(0.1, 5), st.floats(-3, 3))
def test_reflection_formula(re, im):
    w = complex(re, im)
    assume(abs(im) > 1e-3 or abs(re - round(re)) > 1e-3)
    lhs = complex_gamma(w) * complex_gamma(1 - w)
    rhs = math.pi / np.sin(math.pi * w)
    assert abs(lhs - rhs) <= 1e-11 * max(1.0, abs(rhs))


def test_reciprocal_gamma_poles():
    for m in range(0, 6):
        assert recip_gamma(-m) == 0
    desc = SingularityDescriptor(models.CLASS_F, r=1.0, vartheta=2.0)
    assert hwang_coeff_F(desc, -1.0, 1.0, 50).value == 0


def test_class_f_examples():
    assert all(abs(h_asym(models.ewens(1), N).value - 1) < 1e-14 for N in (1, 10, 1000))
    exact = compute_h(models.ewens(2), 100).h[100]
    val = h_asym(models.ewens(2), 100).value.real
    assert val == pytest.approx(100.0)
    assert abs(val / exact - 1) == pytest.approx(1 / 101) and 1 / 101 <= 2 / 100


def test_ewens_half():
    N = 400
    val = h_asym(models.ewens(0.5), N).value.real
    assert val == pytest.approx(N**-0.5 / math.sqrt(math.pi), rel=1e-13)
    exact = math.exp(gammaln(N + 0.5) - gammaln(0.5) - gammaln(N + 1))
    assert abs(val / exact - 1) <= 2 / N


def test_geometric_scaled():
    theta = models.geometric_ewens(1, 0.5)
    N = 50
    asym = h_asym(theta, N, rho=2.0).value.real
    exact = compute_h(theta, N, 2.0).h_scaled[N]
    assert asym == pytest.approx(1.0)
    assert abs(asym / exact - 1) <= 2 / N
    assert h_asym(theta, N).value.real == pytest.approx(2.0**-50)


def test_multi_reductions():
    desc_f = SingularityDescriptor(models.CLASS_F, r=1.0, vartheta=1.3, bigk=0.2)
    single = SingularityDescriptor.multi([Branch(1.0, 1.3, 0.2)])
    for N in (5, 50, 500):
        assert hwang_coeff_multi(single, 1.0, [1.0], N).value == pytest.approx(hwang_coeff_F(desc_f, 1.0, 1.0, N).value)
    pair = SingularityDescriptor.multi([Branch(1.0, 0.7, 0.3), Branch(-1.0, 0.7, 0.3)])
    for N in (7, 40, 301):
        v = hwang_coeff_multi(pair, 1.0, [1.5, 1.5], N).value
        assert abs(v.imag) <= 1e-12 * max(1.0, abs(v))
    with pytest.raises(ValueError):
        hwang_coeff_multi(pair, 1.0, [1.0], 10)


def test_class_ef():
    c0 = models.perturbed_ewens(1.4, 0.0, 0.5).descriptor
    f = SingularityDescriptor(models.CLASS_F, r=1.0, vartheta=1.4, bigk=0.0)
    for N in (10, 200):
        assert hwang_coeff_eF(c0, 1.0, 1.0, N).value == pytest.approx(hwang_coeff_F(f, 1.0, 1.0, N).value)
    theta = models.perturbed_ewens(1, 1, 1)
    N = 500
    res = h_asym(theta, N)
    assert res.value.real == pytest.approx(math.exp(1.6449340668482264), rel=1e-12)
    exact = compute_h(theta, N).h[N]
    assert abs(res.value.real - exact) / exact <= 50 * math.log(N) / N
    # Re(w) < 0: error scale N^{-1-gamma} r^{-N}
    e1 = hwang_coeff_eF(theta.descriptor, -0.5, 1.0, 100).error_scale
    e2 = hwang_coeff_eF(theta.descriptor, -0.5, 1.0, 200).error_scale
    assert e1 / e2 == pytest.approx(2.0**2)


def test_hwang_rate_decreases():
    theta = models.ewens(2.0)
    h = compute_h(theta, 2048).h
    errs = [abs(h_asym(theta, N).value.real / h[N] - 1) for N in (128, 512, 2048)]
    assert errs[0] > errs[1] > errs[2]
