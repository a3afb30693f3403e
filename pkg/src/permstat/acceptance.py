"""Acceptance suite: thirteen numbered checks with tolerances and time limits.

Each check returns an :class:`Outcome`; a check passes only when its
numeric condition holds and it finished inside its time budget.
"""
from __future__ import annotations

import cmath
import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import asymptotics, experiments, moments, models, partitions, sampler, series, spectral

__all__ = ["Outcome", "CRITERIA", "run_acceptance", "format_outcome"]


@dataclass
class Outcome:
    number: int
    name: str
    passed: bool
    observed: float
    threshold: float
    seconds: float
    limit_seconds: float
    detail: str = ""


@dataclass
class _Check:
    ok: bool
    observed: float
    threshold: float
    detail: str = ""


def _rng(seed: int, stream: int):
    return sampler.RandomStream(seed, stream)


# 1 --------------------------------------------------------------------------------


def c01_ewens_normalizers(seed: int) -> _Check:
    worst = 0.0
    N = np.arange(0, 301)
    for th in (0.5, 1.0, 2.0):
        h = series.compute_h(models.ewens(th), 300).h
        binom = np.exp(gammaln(N + th) - gammaln(th) - gammaln(N + 1))
        worst = max(worst, float(np.max(np.abs(h / binom - 1))))
    return _Check(worst <= 1e-10, worst, 1e-10, "max relative error, theta in {0.5, 1, 2}, N <= 300")


# 2 --------------------------------------------------------------------------------


def _power_trace_u(d: int, s: float):
    def u(lam):
        return cmath.exp(1j * s * sum(k for k in lam.parts if d % k == 0))
    return u


def _multiplicative_u(p, x1: complex, x2: complex):
    def u(lam):
        out = 1 + 0j
        for k in lam.parts:
            out *= p(x1**k, x2**k)
        return out
    return u


def c02_oracle_equivalence(seed: int) -> _Check:
    g = _rng(seed, 2).generator
    worst = 0.0
    M = 20
    for _ in range(25):
        theta = models.table_sequence(g.uniform(0.2, 2.0, size=M))
        h = series.compute_h(theta, M).h
        coeffs = {
            (int(a), int(b)): complex(*g.normal(size=2))
            for a, b in g.integers(0, 3, size=(4, 2))
        }
        p = moments.BivariatePolynomial(coeffs)
        x1, x2 = (cmath.rect(g.uniform(0, 1), g.uniform(0, 2 * math.pi)) for _ in range(2))
        exact_w = moments.exact_moments(theta, p, x1, x2, M)
        for N in range(1, M + 1):
            ho = partitions.h_oracle(theta, N)
            worst = max(worst, abs(h[N] / ho - 1))
            for d in (1, 2, 3):
                for s in (0.3, 1.1):
                    a = spectral.exact_char_trace_power(theta, N, d, s)
                    b = partitions.expect_class_function(theta, N, _power_trace_u(d, s))
                    worst = max(worst, abs(a - b))
            b = partitions.expect_class_function(theta, N, _multiplicative_u(p, x1, x2))
            worst = max(worst, abs(exact_w[N] - b) / max(1.0, abs(b)))
    return _Check(worst <= 1e-9, worst, 1e-9, "25 random weight tables, N <= 20")


# 3, 4 -----------------------------------------------------------------------------


def _hwang_errors(theta, lo: int = 128, hi: int = 2048):
    rho = theta.radius
    h = series.compute_h(theta, hi, rho)
    Ns = np.arange(lo, hi + 1)
    rel = np.array([asymptotics.h_asym(theta, int(N), rho=rho).value.real / h.h_scaled[N] - 1 for N in Ns])
    return Ns, rel


def c03_hwang_class_f(seed: int) -> _Check:
    worst = 0.0
    for theta in (models.ewens(2.0), models.geometric_ewens(1.0, 0.5)):
        Ns, rel = _hwang_errors(theta)
        worst = max(worst, float(np.max(Ns * np.abs(rel))))
    return _Check(worst <= 10, worst, 10.0, "max N |h_asym / h_exact - 1| over N in 128..2048")


def c04_hwang_ef(seed: int) -> _Check:
    Ns, rel = _hwang_errors(models.perturbed_ewens(1.0, 1.0, 1.0))
    scaled = np.abs(rel) * Ns / np.log(Ns)
    worst = float(np.max(scaled))
    return _Check(worst <= 50, worst, 50.0, "max |rel err| N / log N over N in 128..2048")


# 5 --------------------------------------------------------------------------------


def c05_sampler_law(seed: int) -> _Check:
    theta = models.ewens(1.5)
    n, size = 6, 200_000
    batch = sampler.sample_cycle_types(theta, series.compute_h(theta, n), n, size, _rng(seed, 5))
    law = partitions.cycle_type_law(theta, n)
    index = {k: i for i, k in enumerate(law)}
    obs = np.bincount([index[p] for p in batch.parts()], minlength=len(law))
    exp = np.array(list(law.values())) * size
    pval = float(stats.chisquare(obs, exp).pvalue)
    return _Check(pval >= 1e-3, pval, 1e-3, "chi2 p-value, n = 6, theta = 1.5, 2e5 draws")


# 6, 7 -----------------------------------------------------------------------------


def _verdict(res, name):
    for v in res.verdicts:
        if v.name == name:
            return v
    raise KeyError(name)


def c06_poisson_square(seed: int) -> _Check:
    cfg = experiments.ExperimentConfig("trace-dist", model="ewens:1", n=2000, samples=100_000, seed=seed, d=2)
    res = experiments.run_command(cfg)
    tv = _verdict(res, "total_variation")
    mean = _verdict(res, "mean_within_3se")
    return _Check(
        tv.passed and mean.passed, tv.observed, tv.threshold,
        f"TV to law of P1 + 2 P2; |mean - 2| / SE = {mean.observed:.3g} (<= 3)",
    )


def c07_wreath_limit(seed: int) -> _Check:
    cfg = experiments.ExperimentConfig(
        "trace-dist", model="ewens:1", n=2000, samples=100_000, seed=seed,
        function="laurent:1=1", zlaw="uniform", s_grid="0:1:11",
    )
    res = experiments.run_command(cfg)
    sup = _verdict(res, "charfn_sup_distance")
    return _Check(sup.passed, sup.observed, sup.threshold, "sup over 11 points in [0, 1], F = x, uniform marks")


# 8, 9 -----------------------------------------------------------------------------


def c08_exact_moment(seed: int) -> _Check:
    theta = models.ewens(1.0)
    p = moments.charpoly_expand(1, 0)
    worst = 0.0
    for x in (0.1 + 0j, 0.3 + 0.2j):
        vals = moments.exact_moments(theta, p, x, 0j, 50)
        worst = max(worst, float(np.max(np.abs(vals[1:] - (1 - x)))))
    return _Check(worst <= 1e-10, worst, 1e-10, "max |E[Z_N(x)] - (1 - x)| over N <= 50")


def c09_circle_autocorrelation(seed: int) -> _Check:
    theta = models.ewens(1.0)
    x1 = cmath.exp(2j * math.pi * 0.37)
    x2 = cmath.exp(2j * math.pi * 0.81)
    p = moments.charpoly_expand(1, 1)
    exact = moments.exact_moments(theta, p, x1, x2, 800)
    pred = moments.asym_moment_circle(theta, p, x1, x2).dominant()
    d100 = abs(exact[100] - pred.value(100))
    d800 = abs(exact[800] - pred.value(800))
    ok = d800 <= 0.5 * d100 and d800 <= 0.1
    worst = max(abs(exact[N] - pred.value(N)) for N in range(2, 801))
    return _Check(
        ok, d800, min(0.5 * d100, 0.1),
        f"|diff| at N=800 vs half of |diff| at N=100 = {d100:.3g}; max |diff| over N in 2..800 = {worst:.2g}",
    )


# 10 -------------------------------------------------------------------------------


def v_n_log_slope(f, ns=(1_000, 10_000, 100_000), theta: float = 1.0) -> float:
    """Least-squares slope of log V_N against log log N."""
    z = sampler.ZLaw.point()
    p = spectral.default_p(theta)
    v = [spectral.clt_quantities(theta, f, z, n, p).v_n for n in ns]
    return float(np.polyfit(np.log(np.log(ns)), np.log(v), 1)[0])


def c10_diverging_clt(seed: int) -> _Check:
    cfg = experiments.ExperimentConfig(
        "clt", model="ewens:1", n=10_000, samples=10_000, seed=seed, function="arc:0,pi-mean"
    )
    res = experiments.run_command(cfg)
    ks = _verdict(res, "gaussian_ks")
    slope = v_n_log_slope(spectral.parse_function("arc:0,pi-mean"))
    slope_ok = 0.5 <= slope <= 2.0
    return _Check(
        ks.passed and slope_ok, ks.observed, ks.threshold,
        f"KS vs N(0,1); V_N log-slope {slope:.3f} in [0.5, 2]: {'yes' if slope_ok else 'no'}",
    )


# 11 -------------------------------------------------------------------------------


def c11_feller(seed: int) -> _Check:
    fb = sampler.feller_coupling_batch(1.0, 500, 100_000, _rng(seed, 11), k_max=1)
    mad = float(np.mean(np.abs(fb.c[:, 0] - fb.p[:, 0])))
    n, size = 6, 100_000
    small = sampler.feller_coupling_batch(1.0, n, size, _rng(seed, 12))
    theta = models.ewens(1.0)
    direct = sampler.sample_cycle_types(theta, series.compute_h(theta, n), n, size, _rng(seed, 13))
    keys = sorted(set(map(tuple, small.c)) | set(map(tuple, direct.counts(n))))
    index = {k: i for i, k in enumerate(keys)}
    table = np.zeros((2, len(keys)))
    for row, counts in ((0, small.c), (1, direct.counts(n))):
        np.add.at(table[row], [index[tuple(c)] for c in counts], 1)
    pval = float(stats.chi2_contingency(table).pvalue)
    ok = mad <= 0.05 and pval >= 1e-3
    return _Check(ok, mad, 0.05, f"E|C1 - P1| at n = 500; n = 6 two-sample chi2 p = {pval:.3g} (>= 1e-3)")


# 12 -------------------------------------------------------------------------------


def c12_bounded_variation(seed: int) -> _Check:
    theta = models.ewens(1.0)
    f = spectral.parse_function("arc:0,pi")
    n, size = 2000, 20_000
    batch = sampler.sample_cycle_types(theta, series.compute_h(theta, n), n, size, _rng(seed, 12))
    tr = spectral.trace_f_batch(batch, f).real / n
    worst, notes = -math.inf, []
    for d in (1, 2):
        target, scale = spectral.bounded_variation_moment(theta, f, n, d)
        x = tr**d
        se = float(np.std(x, ddof=1)) / math.sqrt(size)
        allowed = 3 * se + 2 * scale
        dev = abs(float(np.mean(x)) - target)
        worst = max(worst, dev / allowed)
        notes.append(f"d={d}: |dev| {dev:.3g} vs {allowed:.3g}")
    return _Check(worst <= 1, worst, 1.0, "; ".join(notes))


# 13 -------------------------------------------------------------------------------


def c13_negative_control(seed: int) -> _Check:
    cfg = experiments.ExperimentConfig(
        "clt", model="ewens:1", n=2000, samples=10_000, seed=seed, function="laurent:1=1,-1=1"
    )
    res = experiments.run_command(cfg)
    ng = _verdict(res, "non_gaussian")
    y = _verdict(res, "matches_y_limit")
    return _Check(
        ng.passed and y.passed, ng.observed, ng.threshold,
        f"F = x + 1/x: KS vs N(0,1) must exceed 0.1; two-sample p vs Y = {y.observed:.3g} (>= 1e-3)",
    )


CRITERIA: list = [
    (1, "ewens normalizers", c01_ewens_normalizers, 1.0),
    (2, "oracle equivalence", c02_oracle_equivalence, 30.0),
    (3, "hwang class F rate", c03_hwang_class_f, 5.0),
    (4, "hwang eF envelope", c04_hwang_ef, 5.0),
    (5, "sampler law", c05_sampler_law, 20.0),
    (6, "poisson limit tr sigma^2", c06_poisson_square, 60.0),
    (7, "wreath limit Y", c07_wreath_limit, 90.0),
    (8, "exact moment identity", c08_exact_moment, 1.0),
    (9, "on-circle autocorrelation", c09_circle_autocorrelation, 10.0),
    (10, "diverging-variance CLT", c10_diverging_clt, 120.0),
    (11, "feller coupling", c11_feller, 60.0),
    (12, "bounded-variation moments", c12_bounded_variation, 60.0),
    (13, "negative control", c13_negative_control, 60.0),
]


def run_one(number: int, seed: int = experiments.DEFAULT_SEED) -> Outcome:
    num, name, fn, limit = CRITERIA[number - 1]
    t0 = time.perf_counter()
    try:
        chk = fn(seed)
    except Exception as exc:  # a crash is a failed criterion, not an aborted suite
        chk = _Check(False, math.nan, math.nan, f"error: {type(exc).__name__}: {exc}")
    secs = time.perf_counter() - t0
    in_time = secs < limit
    detail = chk.detail if in_time else f"{chk.detail}; over time budget"
    return Outcome(num, name, bool(chk.ok and in_time), chk.observed, chk.threshold, secs, limit, detail)


def run_acceptance(
    seed: int = experiments.DEFAULT_SEED,
    only: Optional[list] = None,
    report: Optional[Callable[[Outcome], None]] = None,
) -> list:
    out = []
    for num, *_ in CRITERIA:
        if only and num not in only:
            continue
        o = run_one(num, seed)
        if report is not None:
            report(o)
        out.append(o)
    return out


def format_outcome(o: Outcome) -> str:
    tag = "PASS" if o.passed else "FAIL"
    return (
        f"{tag} [{o.number:2d}] {o.name:<28s} observed={o.observed:.4g} threshold={o.threshold:.4g} "
        f"time={o.seconds:.2f}s/{o.limit_seconds:g}s  {o.detail}"
    )
