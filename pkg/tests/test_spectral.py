import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from permstat import models
from permstat.sampler import CycleType, CycleTypeSampler, RandomStream, ZLaw, parse_zlaw, sample_wreath_marks
from permstat.series import compute_h
from permstat.spectral import (
    TailNotControlled,
    arc_indicator,
    bounded_variation_moment,
    check_fourier_conditions,
    chi_k,
    clt_quantities,
    constant_function,
    cosine,
    delta_k,
    delta_k_marked,
    delta_values,
    eigenvalue_angles,
    exact_char_trace_f,
    exact_char_trace_power,
    fourier_coeff,
    fourier_function,
    integer_limit_pmf,
    laurent_function,
    limit_char_trace_f,
    limit_char_trace_power,
    parse_function,
    sample_limit_y,
    standardized_trace,
    trace_f,
    trace_f_batch,
    trace_f_wreath,
    trace_power,
    trace_power_batch,
)

from conftest import SEED, se_of_mean

HALF_ARC = arc_indicator(0.0, math.pi)
cycle_types = st.dictionaries(st.integers(1, 9), st.integers(1, 4), min_size=1, max_size=5).map(
    lambda d: CycleType(sum(k * c for k, c in d.items()), d)
)


def direct_trace(c, f, marks=None):
    return complex(np.sum(f(eigenvalue_angles(c, marks))))


def test_delta_of_monomials():
    for d in (1, 2, 6, -4):
        f = laurent_function({d: 1.0})
        for k in range(1, 9):
            assert delta_k(f, k) == pytest.approx(1.0 if d % k == 0 else 0.0)
            y = cmath.exp(0.7j)
            expect = y ** (d // k) if d % k == 0 else 0.0
            assert delta_k_marked(f, k, y) == pytest.approx(expect)


def test_delta_basic_reductions():
    f = parse_function("laurent:1=0.3,-2=1.1,3=0.5i")
    assert delta_k(f, 1) == pytest.approx(complex(f(np.array([0.0]))[0]))
    for k in range(1, 6):
        assert delta_k_marked(f, k, 1.0) == delta_k(f, k)
    with pytest.raises(ValueError):
        delta_k_marked(f, 2, 1.1)


def test_arc_root_average():
    for k in range(1, 200):
        direct = np.mean(HALF_ARC(2 * math.pi * np.arange(k) / k))
        assert delta_k(HALF_ARC, k).real == pytest.approx(direct)
        assert abs(delta_k(HALF_ARC, k).real - 0.5) <= 0.5 / k + 1e-12


@settings(max_examples=60)
@given(st.floats(0, 6.28), st.floats(0.01, 6.28), st.integers(1, 40), st.floats(-3.14, 3.14))
def test_arc_closed_form_matches_direct(a, length, k, phi):
    f = arc_indicator(a, a + length)
    y = cmath.exp(1j * phi)
    ang = (phi + 2 * math.pi * np.arange(k)) / k
    direct = np.mean(f(ang))
    assert abs(delta_k_marked(f, k, y) - direct) <= 1e-12


def test_marked_from_fourier_data():
    coeffs = {m: 1.0 / (1 + m * m) for m in range(-30, 31) if m}
    f = fourier_function(coeffs)
    y = cmath.exp(1.3j)
    for k in (1, 2, 3, 5):
        expansion = sum(c * y ** (m // k) for m, c in coeffs.items() if m % k == 0)
        assert delta_k_marked(f, k, y) == pytest.approx(expansion, abs=1e-12)


def test_trace_power_examples():
    n = 7
    ident = CycleType(n, {1: n})
    assert all(trace_power(ident, d) == n for d in (1, 2, 5))
    full = CycleType(n, {n: 1})
    assert [trace_power(full, d) for d in (1, 7, 14, 3)] == [0, 7, 7, 0]
    assert trace_power(CycleType(5, {1: 2, 3: 1}), 3) == 5
    # concrete permutation of that type: (0)(1)(2 3 4), cubed
    perm = [0, 1, 3, 4, 2]
    cube = [perm[perm[perm[i]]] for i in range(5)]
    assert sum(cube[i] == i for i in range(5)) == 5


@given(cycle_types)
def test_trace_f_matches_eigenvalues(c):
    assert trace_f(c, constant_function(1.0)) == pytest.approx(c.n)
    assert trace_f(c, laurent_function({3: 1.0})) == pytest.approx(trace_power(c, 3))
    assert abs(trace_f(c, HALF_ARC) - direct_trace(c, HALF_ARC)) <= 1e-10


@given(cycle_types, st.integers(0, 2**32))
def test_wreath_trace_matches_eigenvalues(c, seed):
    f = parse_function("laurent:1=1,-2=0.5,3=0.25j")
    marks = sample_wreath_marks(c, ZLaw.uniform(), RandomStream(seed))
    assert abs(trace_f_wreath(c, marks, f) - direct_trace(c, f, marks)) <= 1e-10
    assert abs(trace_f_wreath(c, marks, HALF_ARC) - direct_trace(c, HALF_ARC, marks)) <= 1e-10
    ones = {s: 1.0 + 0j for s in marks}
    assert trace_f_wreath(c, ones, f) == pytest.approx(trace_f(c, f))


def test_wreath_identity_marks():
    c = CycleType(3, {1: 3})
    z = {(1, 1): 1j, (1, 2): -1.0, (1, 3): cmath.exp(0.4j)}
    assert trace_f_wreath(c, z, laurent_function({1: 1.0})) == pytest.approx(sum(z.values()))
    with pytest.raises(ValueError):
        trace_f_wreath(c, {(1, 1): 1.0}, HALF_ARC)


def test_batch_traces_match_single():
    theta = models.ewens(1.2)
    b = CycleTypeSampler(theta, compute_h(theta, 30), 30).sample(200, RandomStream(SEED))
    f = parse_function("arc:0.3,2.0")
    tr = trace_f_batch(b, f)
    tp = trace_power_batch(b, 6)
    for i, c in enumerate(b.cycle_types()[:50]):
        assert tr[i] == pytest.approx(trace_f(c, f))
        assert tp[i] == trace_power(c, 6)


def test_chi_k():
    f = parse_function("arc:0,2")
    assert chi_k(f, ZLaw.uniform(), 3, 0.0) == 1
    for k in (1, 4):
        assert chi_k(f, ZLaw.point(), k, 0.7) == pytest.approx(cmath.exp(0.7j * k * delta_k(f, k)))
    g = laurent_function({1: 1.0, -1: 1.0})
    for k in (1, 2):
        for s in (0.2, 1.0):
            mean_abs = ZLaw.uniform().expect(k, lambda y: np.abs(delta_values(g, k, y))).real
            assert abs(chi_k(g, ZLaw.uniform(), k, s) - 1) <= s * k * mean_abs + 1e-12


def test_limit_char_power():
    theta = models.ewens(1.0)
    assert limit_char_trace_power(theta, 1.0, 3, 0.0) == 1
    s = 0.9
    assert limit_char_trace_power(theta, 1.0, 1, s) == pytest.approx(cmath.exp(cmath.exp(1j * s) - 1))
    offset, pmf = integer_limit_pmf([1.0, 0.5], [1, 2])
    support = offset + np.arange(len(pmf))
    assert limit_char_trace_power(theta, 1.0, 2, s) == pytest.approx(np.sum(pmf * np.exp(1j * s * support)))
    assert pmf.sum() == pytest.approx(1.0)


def test_limit_char_f_reductions():
    theta = models.ewens(1.3)
    for s in (0.0, 0.4, 1.7):
        v = limit_char_trace_f(theta, 1.0, laurent_function({2: 1.0}), ZLaw.point(), s).value
        assert v == pytest.approx(limit_char_trace_power(theta, 1.0, 2, s))
    # Laurent limit sum_d b_d sum_{k | d} k P_k
    f = laurent_function({1: 1.0, -1: 1.0, 2: 0.5})
    s = 0.8
    acc = 0j
    for k in (1, 2):
        step = k * sum(b for d, b in f.laurent.items() if d % k == 0)
        acc += 1.3 / k * (cmath.exp(1j * s * step) - 1)
    got = limit_char_trace_f(theta, 1.0, f, ZLaw.point(), s)
    assert got.value == pytest.approx(cmath.exp(acc))
    assert got.tail_bound == 0


def test_limit_char_tail_control():
    v = limit_char_trace_f(models.ewens(1.0), 1.0, cosine(), ZLaw.uniform(), 0.5)
    assert v.tail_bound == 0 and v.k_max == 1
    # root averages of an arc decay like 1/k, so no truncation is certified
    for f in (HALF_ARC, parse_function("arc:0,pi-mean")):
        with pytest.raises(TailNotControlled) as err:
            limit_char_trace_f(models.ewens(1.0), 1.0, f, ZLaw.uniform(), 0.5)
        assert err.value.k_max is not None


def test_exact_char_matches_power():
    theta = models.ewens(0.8)
    for d in (1, 2):
        for s in (0.3, 1.1):
            a = exact_char_trace_power(theta, 15, d, s)
            b = exact_char_trace_f(theta, 15, laurent_function({d: 1.0}), ZLaw.point(), s)
            assert a == pytest.approx(b)


def test_y_samples():
    theta = models.ewens(1.0)
    y = sample_limit_y(theta, 1.0, laurent_function({1: 1.0}), ZLaw.point(), RandomStream(SEED), size=100_000)
    assert np.allclose(y.values.imag, 0)
    vals = y.values.real.astype(int)
    freq = np.bincount(vals, minlength=4)[:4] / len(vals)
    assert np.allclose(freq, stats.poisson.pmf(np.arange(4), 1.0), atol=0.006)
    zero = sample_limit_y(theta, 1.0, constant_function(0.0), ZLaw.uniform(), RandomStream(SEED), size=10)
    assert np.all(zero.values == 0)
    f = laurent_function({1: 1.0, -2: 0.5, 2: 0.5})
    z = parse_zlaw("atoms:0=0.5,1.5=0.5")
    y = sample_limit_y(theta, 1.0, f, z, RandomStream(SEED, 1), size=100_000).values
    target = sum(z.expect(k, lambda u, k=k: delta_values(f, k, u)) for k in (1, 2))
    assert abs(y.real.mean() - target.real) <= 4 * se_of_mean(y.real)
    assert abs(y.imag.mean() - target.imag) <= 4 * se_of_mean(y.imag)


def test_fourier_coefficients():
    c = cosine()
    assert fourier_coeff(c, 1, 64) == pytest.approx(0.5)
    assert fourier_coeff(c, -1, 64) == pytest.approx(0.5)
    assert all(abs(fourier_coeff(c, m, 64)) <= 1e-12 for m in (0, 2, 3, -5))
    assert fourier_coeff(constant_function(1.0), 0, 16) == pytest.approx(1.0)
    for m in (1, 2, -3, 7):
        ref = (1 - cmath.exp(-1j * m * math.pi)) / (2j * math.pi * m)
        assert HALF_ARC.coefficient(m) == pytest.approx(ref)
        assert abs(fourier_coeff(HALF_ARC, m, 1 << 16) - ref) <= 1e-4
    with pytest.raises(ValueError):
        fourier_coeff(c, 10, 32)


def test_fourier_conditions():
    for delta in (0.1, 0.5, 1.0):
        assert check_fourier_conditions(cosine(), delta, 0.5, 1.0).passed
    synth = fourier_function({m: abs(m) ** -1.5 for m in range(-2048, 2049) if m})
    assert check_fourier_conditions(synth, 0.5, 0.1, 1.0).decay_ok
    assert not check_fourier_conditions(synth, 0.9, 0.1, 1.0).decay_ok
    arc = parse_function("arc:0,pi-mean")
    for delta in (0.05, 0.3, 1.0):
        assert not check_fourier_conditions(arc, delta, 0.5, 1.0).decay_ok


def test_fourier_file(tmp_path):
    path = tmp_path / "f.json"
    path.write_text(json.dumps({"coefficients": {"1": [0.5, 0], "-1": 0.5, "0": 0.25}}))
    f = parse_function(f"fourier:{path}")
    assert f(np.array([0.0]))[0] == pytest.approx(1.25)
    assert f.is_real


def test_parse_errors():
    for bad in ("sin", "arc:1", "laurent:", "laurent:1", "arc:0,7"):
        with pytest.raises(ValueError):
            parse_function(bad)


def test_clt_quantities():
    f = laurent_function({1: 1.0, -1: 1.0})
    for n in (10, 1000):
        q = clt_quantities(1.0, f, ZLaw.point(), n, 3.0)
        assert q.v_n == pytest.approx(4.0) and q.e_n == pytest.approx(2.0)
    arc = parse_function("arc:0,pi-mean")
    q = clt_quantities(1.5, arc, ZLaw.point(), 500, 3.0)
    k = np.arange(1, 501)
    d = delta_values(arc, k).real
    assert q.e_n == pytest.approx(1.5 * d.sum())
    assert q.v_n == pytest.approx(1.5 * np.sum(k * d * d))
    ratios = [clt_quantities(1.0, arc, ZLaw.point(), n, 3.0).lyapunov_ratio for n in (100, 10_000, 1_000_000)]
    assert ratios[0] > ratios[1] > ratios[2]
    with pytest.raises(ValueError):
        clt_quantities(1.0, laurent_function({1: 1.0}), ZLaw.point(), 10, 3.0)
    with pytest.raises(ValueError):
        clt_quantities(0.25, arc, ZLaw.point(), 10, 3.0)


def test_v_n_grows_logarithmically():
    from permstat.acceptance import v_n_log_slope

    assert 0.5 <= v_n_log_slope(parse_function("arc:0,pi-mean")) <= 2.0


def test_clt_quantities_with_marks():
    arc = parse_function("arc:0,pi-mean")
    q = clt_quantities(1.0, arc, ZLaw.uniform(), 200, 3.0)
    k = np.arange(1, 201)
    phis = np.linspace(-math.pi, math.pi, 4001)[:-1]
    m2 = np.array([np.mean(delta_values(arc, kk, np.exp(1j * phis)).real ** 2) for kk in k])
    assert q.v_n == pytest.approx(np.sum(k * m2), rel=1e-3)


def test_standardized_trace():
    with pytest.raises(ValueError):
        standardized_trace(1.0, constant_function(0.0), ZLaw.point(), 50, 10, RandomStream(SEED))
    x = standardized_trace(1.0, cosine(), ZLaw.uniform(), 200, 20_000, RandomStream(SEED))
    assert abs(x.mean()) <= 4 * se_of_mean(x)
    y = sample_limit_y(models.ewens(1.0), 1.0, cosine(), ZLaw.uniform(), RandomStream(SEED, 9), size=20_000).values.real
    q = clt_quantities(1.0, cosine(), ZLaw.uniform(), 200, 3.0)
    assert stats.ks_2samp(x, (y - q.e_n) / math.sqrt(q.v_n)).pvalue >= 1e-3


def test_bounded_variation_moment():
    theta = models.ewens(1.0)
    value, scale = bounded_variation_moment(theta, constant_function(0.3), 100, 1)
    assert value == pytest.approx(0.3)
    b = CycleTypeSampler(theta, compute_h(theta, 100), 100).sample(50, RandomStream(SEED))
    assert np.allclose(trace_f_batch(b, constant_function(0.3)).real / 100, 0.3)
    v2, scale = bounded_variation_moment(theta, HALF_ARC, 2000, 2)
    assert v2 == pytest.approx(0.25) and scale == pytest.approx(math.log(2000) / 2000)
