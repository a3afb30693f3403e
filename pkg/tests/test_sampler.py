import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from permstat import models
from permstat.partitions import cycle_type_law
from permstat.sampler import (
    CycleType,
    CycleTypeSampler,
    RandomStream,
    ZLaw,
    expected_cycle_count,
    feller_coupling,
    feller_coupling_batch,
    feller_tail_bound,
    parse_zlaw,
    psi_n,
    sample_batch_marks,
    sample_cycle_type,
    sample_cycle_types,
    sample_poisson_field,
    sample_wreath_marks,
)
from permstat.series import compute_h

from conftest import SEED, se_of_mean


def draw(theta, n, size, stream_id=0, **kw):
    return CycleTypeSampler(theta, compute_h(theta, n, theta.radius), n, **kw).sample(size, RandomStream(SEED, stream_id))


def test_cycle_type_validation_and_format():
    c = CycleType(5, {1: 2, 3: 1})
    assert str(c) == "1^2 3" and c.parts == (3, 1, 1) and c.total_cycles == 3
    with pytest.raises(ValueError):
        CycleType(4, {1: 2, 3: 1})
    assert CycleType.from_lengths([3, 1, 0, 1]) == c


def test_trivial_sizes():
    theta = models.ewens(2.0)
    assert all(p == (1,) for p in draw(theta, 1, 100).parts())
    assert sample_cycle_type(theta, compute_h(theta, 1), 1, RandomStream(SEED)) == CycleType(1, {1: 1})


def test_n2_law():
    th = 1.7
    b = draw(models.ewens(th), 2, 200_000)
    frac = np.mean([p == (1, 1) for p in b.parts()])
    p = th / (th + 1)
    assert abs(frac - p) <= 4 * math.sqrt(p * (1 - p) / 200_000)


def test_five_cycle_frequency():
    b = draw(models.ewens(1.0), 5, 100_000)
    frac = np.mean([p == (5,) for p in b.parts()])
    assert abs(frac - 0.2) <= 4 * math.sqrt(0.16 / 100_000)


@pytest.mark.parametrize("model", ["ewens:0.4", "table:0.3,2.5,1.0,0.2", "geom:1.5,0.3", "perturbed:1,1,1"])
def test_law_matches_oracle(model):
    theta = models.parse_model(model)
    n, size = 7, 100_000
    law = cycle_type_law(theta, n)
    idx = {k: i for i, k in enumerate(law)}
    obs = np.bincount([idx[p] for p in draw(theta, n, size).parts()], minlength=len(law))
    exp = np.array(list(law.values())) * size
    keep = exp >= 5
    assert stats.chisquare(obs[keep], exp[keep] * obs[keep].sum() / exp[keep].sum()).pvalue >= 1e-3


def test_table_and_row_modes_agree():
    theta = models.ewens(1.3)
    a = draw(theta, 40, 2000, use_table=True)
    b = draw(theta, 40, 2000, use_table=False)
    assert np.array_equal(a.lengths, b.lengths)


def test_expected_counts():
    theta = models.ewens(1.0)
    h = compute_h(theta, 30)
    assert expected_cycle_count(theta, h, 30, 31) == 0.0
    for k in range(1, 31):
        assert expected_cycle_count(theta, h, 30, k) == pytest.approx(1 / k)
    theta = models.ewens(1.5)
    n = 50
    h = compute_h(theta, n)
    counts = draw(theta, n, 100_000).counts(n)
    for k in (1, 2, 5, 20):
        mean = counts[:, k - 1].mean()
        assert abs(mean - expected_cycle_count(theta, h, n, k)) <= 4 * se_of_mean(counts[:, k - 1])


def test_psi():
    assert all(psi_n(1.0, 30, k) == pytest.approx(1.0) for k in range(1, 31))
    N = 200
    ref = math.exp(math.lgamma(0.5) + math.lgamma(N + 1) - math.lgamma(N + 0.5))
    assert psi_n(0.5, N, N) == pytest.approx(ref)
    assert all(psi_n(2.0, 60, k) <= 1.0 for k in range(1, 61))


def test_poisson_field():
    P = sample_poisson_field(models.ewens(1.0), 1.0, 6, RandomStream(SEED), size=200_000)
    for k in range(1, 7):
        x = P[:, k - 1]
        assert abs(x.mean() - 1 / k) <= 4 * se_of_mean(x)
        assert x.var() == pytest.approx(1 / k, rel=0.05)
    P = sample_poisson_field(models.ewens(1.0), 0.5, 4, RandomStream(SEED, 1), size=400_000)
    assert abs(P[:, 3].mean() - 0.015625) <= 4 * se_of_mean(P[:, 3])


def test_marks():
    c = CycleType(9, {1: 2, 2: 2, 3: 1})
    m = sample_wreath_marks(c, ZLaw.point(), RandomStream(SEED))
    assert set(m) == {(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)} and all(v == 1 for v in m.values())
    m = sample_wreath_marks(c, parse_zlaw(f"atoms:{math.pi}=1"), RandomStream(SEED))
    for (k, _), v in m.items():
        assert v == pytest.approx((-1) ** k)
    ang = np.angle(ZLaw.uniform().sample_product(np.full(50_000, 3), RandomStream(SEED).generator))
    assert stats.kstest((ang % (2 * math.pi)) / (2 * math.pi), "uniform").pvalue > 1e-3


def test_atom_products_match_exact_law():
    z = parse_zlaw("atoms:0=0.5,1.0=0.3,2.5=0.2")
    g = RandomStream(SEED).generator
    draws = z.sample_product(np.full(100_000, 4), g)
    angles, probs = z.product_law(4)
    for a, p in zip(angles[:5], probs[:5]):
        freq = np.mean(np.abs(draws - cmath.exp(1j * a)) < 1e-9)
        assert abs(freq - p) <= 4 * math.sqrt(p * (1 - p) / 100_000) + 1e-12


def test_batch_marks_padding():
    b = draw(models.ewens(1.0), 10, 50)
    marks = sample_batch_marks(b, ZLaw.uniform(), RandomStream(SEED, 3))
    assert np.all(marks[b.lengths == 0] == 1)
    assert np.allclose(np.abs(marks), 1)


def test_zlaw_parse_errors():
    for bad in ("atoms:1", "gauss", "atoms:0=0.5"):
        with pytest.raises(ValueError):
            parse_zlaw(bad)


def test_feller_coupling():
    fb = feller_coupling_batch(1.0, 500, 100_000, RandomStream(SEED), k_max=2)
    assert np.mean(np.abs(fb.c[:, 0] - fb.p[:, 0])) <= 0.05
    x = fb.p[:, 1]
    assert abs(x.mean() - 0.5) <= 4 * se_of_mean(x)
    assert np.all(fb.c.sum(axis=0) >= 0)
    assert feller_tail_bound(1.0, fb.cutoff, 1) < 0.01


def test_feller_marginal_matches_oracle():
    fb = feller_coupling_batch(1.0, 6, 100_000, RandomStream(SEED, 7))
    law = cycle_type_law(models.ewens(1.0), 6)
    idx = {k: i for i, k in enumerate(law)}
    parts = [tuple(sorted((k + 1 for k, c in enumerate(row) for _ in range(c)), reverse=True)) for row in fb.c]
    obs = np.bincount([idx[p] for p in parts], minlength=len(law))
    assert stats.chisquare(obs, np.array(list(law.values())) * 100_000).pvalue > 1e-3
    ct, p = feller_coupling(1.0, 6, RandomStream(SEED))
    assert sum(k * v for k, v in ct.counts.items()) == 6 and set(p) == set(range(1, 7))


def test_feller_rejects_varying_weights():
    with pytest.raises(ValueError):
        feller_coupling_batch(models.geometric_ewens(1, 0.5), 10, 10, RandomStream(SEED))


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32), st.floats(0.2, 3.0))
def test_batches_are_valid_permutation_types(n, seed, th):
    theta = models.ewens(th)
    b = CycleTypeSampler(theta, compute_h(theta, n), n).sample(20, RandomStream(seed))
    assert np.all(b.lengths.sum(axis=1) == n)
    assert np.all(b.counts(n) @ np.arange(1, n + 1) == n)


def test_streams_are_reproducible_and_distinct():
    theta = models.ewens(1.0)
    a = draw(theta, 30, 100, stream_id=4)
    b = draw(theta, 30, 100, stream_id=4)
    c = draw(theta, 30, 100, stream_id=5)
    assert np.array_equal(a.lengths, b.lengths)
    assert not np.array_equal(a.lengths, c.lengths)


@pytest.mark.slow
def test_large_n_row_mode():
    theta = models.ewens(1.0)
    n = 5000
    b = sample_cycle_types(theta, compute_h(theta, n), n, 2000, RandomStream(SEED))
    fixed = b.counts(1)[:, 0]
    assert abs(fixed.mean() - 1.0) <= 4 * se_of_mean(fixed)
