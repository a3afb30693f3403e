"""Moments of multiplicative class functions W^N(P)(x1, x2).

For a polynomial ``P(x1, x2) = sum b_{k1,k2} x1^k1 x2^k2`` the generating
function of ``h_N E[W^N(P)]`` is ``prod_k G_Theta(x1^k1 x2^k2 t)^{b_k}``;
exact moments come from coefficient extraction, asymptotic ones from the
singular behaviour of that product.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from .asymptotics import complex_gamma, recip_gamma
from .models import CLASS_F, Branch, SingularityDescriptor, ThetaSequence
from .series import TruncatedSeries, _exp_coeffs, _scaled_weights, compute_h

__all__ = [
    "NearDegenerateSingularities",
    "BivariatePolynomial",
    "MomentTerm",
    "MomentAsymptotics",
    "charpoly_expand",
    "moment_series",
    "exact_moment",
    "exact_moments",
    "asym_moment_inside",
    "asym_moment_circle",
    "circle_branches",
]

DISTINCT_TOL = 1e-9


class NearDegenerateSingularities(ValueError):
    """Two singular points of the moment generating function coincide."""

    def __init__(self, offending: tuple, gap: float):
        self.offending = offending
        self.gap = gap
        super().__init__(
            f"x1^{offending[0]} x2^{offending[1]} is within {gap:.2e} of 1; "
            "coinciding singularities are not supported"
        )


@dataclass(frozen=True)
class BivariatePolynomial:
    coeffs: dict

    def __post_init__(self):
        clean = {}
        for (k1, k2), b in dict(self.coeffs).items():
            k1, k2 = int(k1), int(k2)
            if k1 < 0 or k2 < 0:
                raise ValueError("exponents must be non-negative")
            b = complex(b)
            if b != 0:
                clean[(k1, k2)] = clean.get((k1, k2), 0j) + b
        object.__setattr__(self, "coeffs", {k: v for k, v in clean.items() if v != 0})

    def __call__(self, x1: complex, x2: complex) -> complex:
        return sum(b * x1**k1 * x2**k2 for (k1, k2), b in self.coeffs.items())

    def __mul__(self, other: "BivariatePolynomial") -> "BivariatePolynomial":
        out: dict = {}
        for (a1, a2), b in self.coeffs.items():
            for (c1, c2), d in other.coeffs.items():
                key = (a1 + c1, a2 + c2)
                out[key] = out.get(key, 0j) + b * d
        return BivariatePolynomial(out)

    @property
    def b00(self) -> complex:
        return self.coeffs.get((0, 0), 0j)

    def support(self) -> list:
        return sorted(self.coeffs)

    @classmethod
    def one_variable(cls, coeffs) -> "BivariatePolynomial":
        return cls({(k, 0): b for k, b in enumerate(coeffs)})


def charpoly_expand(s1: int, s2: int) -> BivariatePolynomial:
    """Coefficients of (1 - x1)^s1 (1 - x2)^s2."""
    if s1 < 0 or s2 < 0:
        raise ValueError("powers must be non-negative")
    return BivariatePolynomial(
        {
            (k1, k2): (-1) ** (k1 + k2) * comb(s1, k1) * comb(s2, k2)
            for k1 in range(s1 + 1)
            for k2 in range(s2 + 1)
        }
    )


def _check_disc(x1: complex, x2: complex):
    for x in (x1, x2):
        if abs(x) > 1 + 1e-12:
            raise ValueError(f"|x| = {abs(x):.6g} lies outside the closed unit disc")


def moment_series(
    theta: ThetaSequence,
    p: BivariatePolynomial,
    x1: complex,
    x2: complex,
    M: int,
    rho: float = 1.0,
) -> TruncatedSeries:
    """Series whose t^N coefficient is ``h_N E[W^N(P)(x1, x2)] rho^N``.

    The product of powers ``G(c t)^b`` is formed as one exponential of
    ``sum b g(c t)``; the t^k coefficient of that sum is
    ``theta_k P(x1^k, x2^k) / k``.
    """
    x1, x2 = complex(x1), complex(x2)
    _check_disc(x1, x2)
    w = _scaled_weights(theta, max(M, 1), rho)[: M + 1]
    k = np.arange(M + 1)
    a = np.zeros(M + 1, dtype=complex)
    for (k1, k2), b in p.coeffs.items():
        c = x1**k1 * x2**k2
        a[1:] += b * c ** k[1:]
    a[1:] *= w[1:] / k[1:]
    return TruncatedSeries(_exp_coeffs(a))


def exact_moment(
    theta: ThetaSequence,
    p: BivariatePolynomial,
    x1: complex,
    x2: complex,
    N: int,
    rho: Optional[float] = None,
) -> complex:
    """E_Theta[W^N(P)(x1, x2)] by coefficient extraction."""
    if rho is None:
        rho = theta.radius if theta.descriptor is not None else 1.0
    series = moment_series(theta, p, x1, x2, N, rho)
    h = compute_h(theta, N, rho)
    return complex(series[N] / h.h_scaled[N])


def exact_moments(
    theta: ThetaSequence,
    p: BivariatePolynomial,
    x1: complex,
    x2: complex,
    M: int,
    rho: Optional[float] = None,
) -> np.ndarray:
    """E_Theta[W^N(P)(x1, x2)] for N = 0..M from a single series."""
    if rho is None:
        rho = theta.radius if theta.descriptor is not None else 1.0
    series = moment_series(theta, p, x1, x2, M, rho)
    h = compute_h(theta, M, rho)
    return np.asarray(series.coeffs) / h.h_scaled


@dataclass(frozen=True)
class MomentTerm:
    k1: int
    k2: int
    e2: complex
    exponent: complex
    phase_base: complex
    gamma_ratio: complex
    b: complex = 0j

    def value(self, N: int) -> complex:
        return (
            self.e2
            * self.gamma_ratio
            * cmath.exp(self.exponent * math.log(N))
            * cmath.exp(1j * N * cmath.phase(self.phase_base))
            * abs(self.phase_base) ** N
        )


@dataclass(frozen=True)
class MomentAsymptotics:
    """Leading-order prediction ``sum_terms e2 * Gamma-ratio * N^exponent * phase^N``."""

    terms: list
    e1: Optional[complex] = None
    regime: str = "circle"

    def value(self, N: int) -> complex:
        return sum((t.value(N) for t in self.terms), 0j)

    def dominant(self) -> "MomentAsymptotics":
        """Only the terms with maximal Re(b_{k1,k2})."""
        if not self.terms:
            return self
        top = max(t.b.real for t in self.terms)
        kept = [t for t in self.terms if abs(t.b.real - top) <= 1e-12]
        return MomentAsymptotics(kept, self.e1, self.regime)


def _class_f(theta: ThetaSequence) -> SingularityDescriptor:
    desc = theta.require_descriptor()
    if desc.class_tag != CLASS_F:
        raise ValueError("moment asymptotics are implemented for class F weights only")
    if theta.g_closed_form is None:
        raise ValueError(f"{theta.label}: closed form for g_Theta required")
    return desc


def asym_moment_inside(
    theta: ThetaSequence, p: BivariatePolynomial, x1: complex, x2: complex
) -> MomentAsymptotics:
    """Prediction ``N^{vt(b00-1)} e^{K(b00-1)} E1`` for max(|x1|, |x2|) < 1."""
    x1, x2 = complex(x1), complex(x2)
    if max(abs(x1), abs(x2)) >= 1:
        raise ValueError("the inside-disc regime needs max(|x1|, |x2|) < 1")
    desc = _class_f(theta)
    vt, K, r = desc.vartheta, complex(desc.bigk), desc.r
    b00 = p.b00
    log_prod = 0j
    for (k1, k2), b in p.coeffs.items():
        if (k1, k2) == (0, 0):
            continue
        log_prod += b * theta.g(r * x1**k1 * x2**k2)
    gamma_ratio = complex_gamma(vt) * recip_gamma(vt * b00)
    e1 = gamma_ratio * cmath.exp(log_prod)
    term = MomentTerm(
        0, 0,
        e2=cmath.exp(K * (b00 - 1) + log_prod),
        exponent=vt * (b00 - 1),
        phase_base=1.0 + 0j,
        gamma_ratio=gamma_ratio,
        b=b00,
    )
    return MomentAsymptotics([term], e1=e1, regime="inside")


def _check_distinct(p: BivariatePolynomial, x1: complex, x2: complex):
    supp = p.support()
    for i, (a1, a2) in enumerate(supp):
        for c1, c2 in supp[:i]:
            d1, d2 = a1 - c1, a2 - c2
            gap = abs(x1**d1 * x2**d2 - 1)
            if gap <= DISTINCT_TOL:
                raise NearDegenerateSingularities((d1, d2), gap)


def asym_moment_circle(
    theta: ThetaSequence, p: BivariatePolynomial, x1: complex, x2: complex
) -> MomentAsymptotics:
    """Sum over the support of ``E2(k) N^{vt(b_k - 1)} (x1^k1 x2^k2)^N Gamma(vt)/Gamma(vt b_k)``."""
    x1, x2 = complex(x1), complex(x2)
    if abs(abs(x1) - 1) > 1e-12 or abs(abs(x2) - 1) > 1e-12:
        raise ValueError("the on-circle regime needs |x1| = |x2| = 1")
    desc = _class_f(theta)
    _check_distinct(p, x1, x2)
    vt, K, r = desc.vartheta, complex(desc.bigk), desc.r
    gvt = complex_gamma(vt)
    terms = []
    for (k1, k2), b in p.coeffs.items():
        log_prod = 0j
        for (m1, m2), bm in p.coeffs.items():
            if (m1, m2) == (k1, k2):
                continue
            log_prod += bm * theta.g(r * x1 ** (m1 - k1) * x2 ** (m2 - k2))
        terms.append(
            MomentTerm(
                k1, k2,
                e2=cmath.exp(K * (b - 1) + log_prod),
                exponent=vt * (b - 1),
                phase_base=x1**k1 * x2**k2,
                gamma_ratio=gvt * recip_gamma(vt * b),
                b=b,
            )
        )
    return MomentAsymptotics(terms, regime="circle")


def circle_branches(
    theta: ThetaSequence, p: BivariatePolynomial, x1: complex, x2: complex
) -> SingularityDescriptor:
    """MULTI descriptor of ``sum_k b_k g(x1^k1 x2^k2 t)`` (use with w = 1, S = 1).

    Near ``xi = r x1^-k1 x2^-k2`` the exponent behaves like
    ``b_k vt log(1/(1 - t/xi)) + b_k K + sum_{m != k} b_m g(r x^{m-k})``.
    """
    x1, x2 = complex(x1), complex(x2)
    desc = _class_f(theta)
    _check_distinct(p, x1, x2)
    vt, K, r = desc.vartheta, complex(desc.bigk), desc.r
    branches = []
    for (k1, k2), b in p.coeffs.items():
        const = b * K
        for (m1, m2), bm in p.coeffs.items():
            if (m1, m2) != (k1, k2):
                const += bm * theta.g(r * x1 ** (m1 - k1) * x2 ** (m2 - k2))
        xi = r * x1 ** (-k1) * x2 ** (-k2)
        branches.append(Branch(xi=xi, vartheta=vt * b, bigk=const))
    return SingularityDescriptor.multi(branches)
