"""Coefficient asymptotics of ``exp(w g(t)) S(t)`` near logarithmic singularities.

Three evaluators cover the classes used here: a single singularity with
constant ``K`` (class F), the convolution class eF with remainder exponent
``gamma``, and several distinct singular points on one circle (MULTI).
Error scales carry unit constants; callers fit the real constant.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .models import CLASS_EF, CLASS_F, CLASS_MULTI, SingularityDescriptor, ThetaSequence

__all__ = [
    "AsymptoticResult",
    "complex_gamma",
    "recip_gamma",
    "hwang_coeff_F",
    "hwang_coeff_eF",
    "hwang_coeff_multi",
    "h_asym",
]

# Lanczos g = 7, n = 9
_LANCZOS_G = 7
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _nonpositive_integer(w: complex) -> bool:
    return w.imag == 0 and w.real <= 0 and w.real == math.floor(w.real)


def _gamma_right(z: complex) -> complex:
    # valid for Re(z) >= 0.5
    z = z - 1
    x = _LANCZOS_COEFFS[0]
    for i in range(1, _LANCZOS_G + 2):
        x += _LANCZOS_COEFFS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * cmath.exp(-t) * x


def complex_gamma(w: complex) -> complex:
    """Gamma function for complex argument (Lanczos plus reflection)."""
    w = complex(w)
    if _nonpositive_integer(w):
        raise ValueError(f"Gamma has a pole at {w.real:g}")
    if w.real < 0.5:
        return cmath.pi / (cmath.sin(cmath.pi * w) * _gamma_right(1 - w))
    return _gamma_right(w)


def recip_gamma(w: complex) -> complex:
    """1/Gamma(w); entire, exactly zero at 0, -1, -2, ..."""
    w = complex(w)
    if _nonpositive_integer(w):
        return 0j
    if w.real < 0.5:
        return cmath.sin(cmath.pi * w) * _gamma_right(1 - w) / cmath.pi
    return 1.0 / _gamma_right(w)


@dataclass(frozen=True)
class AsymptoticResult:
    value: complex
    error_scale: float

    def __post_init__(self):
        if not cmath.isfinite(self.value):
            raise ArithmeticError("asymptotic value is not finite")
        if not self.error_scale >= 0:
            raise ArithmeticError("error scale must be non-negative")


def _radial_factor(r: float, N: int, rho: Optional[float]) -> float:
    # r^-N, or (rho/r)^N when the caller compares against rho^N-scaled data
    base = r if rho is None else r / rho
    return math.exp(-N * math.log(base))


def hwang_coeff_F(
    desc: SingularityDescriptor,
    w: complex,
    s_at_r: complex,
    N: int,
    rho: Optional[float] = None,
) -> AsymptoticResult:
    """Leading term of ``[t^N] exp(w g) S`` for g in class F(r, vartheta, K).

    With ``rho`` the result is multiplied by ``rho**N``.
    """
    if desc.class_tag != CLASS_F:
        raise ValueError(f"expected a class F descriptor, got {desc.class_tag}")
    if N < 1:
        raise ValueError("N must be at least 1")
    w = complex(w)
    front = cmath.exp(desc.bigk * w) * cmath.exp((w * desc.vartheta - 1) * math.log(N))
    front *= _radial_factor(desc.r, N, rho)
    value = front * complex(s_at_r) * recip_gamma(desc.vartheta * w)
    return AsymptoticResult(value, abs(front) / N)


def hwang_coeff_eF(
    desc: SingularityDescriptor,
    w: complex,
    s_at_r: complex,
    N: int,
    rho: Optional[float] = None,
) -> AsymptoticResult:
    """Leading term for g in eF(r, vartheta, gamma) with the two-case remainder."""
    if desc.class_tag != CLASS_EF:
        raise ValueError(f"expected a class eF descriptor, got {desc.class_tag}")
    if N < 2:
        raise ValueError("N must be at least 2")
    w = complex(w)
    rad = _radial_factor(desc.r, N, rho)
    logn = math.log(N)
    front = cmath.exp(w * desc.g0_at_r) * cmath.exp((w * desc.vartheta - 1) * logn) * rad
    value = front * complex(s_at_r) * recip_gamma(desc.vartheta * w)
    if w.real >= 0:
        err = math.exp((desc.vartheta * w.real - 1 - desc.gamma) * logn) * logn * rad
    else:
        err = math.exp((-1 - desc.gamma) * logn) * rad
    return AsymptoticResult(value, err)


def hwang_coeff_multi(
    desc: SingularityDescriptor,
    w: complex,
    s_at_xi: Sequence[complex],
    N: int,
    rho: Optional[float] = None,
) -> AsymptoticResult:
    """Sum of branch contributions ``e^{K_i w} N^{w vartheta_i - 1} xi_i^-N S(xi_i)/Gamma``."""
    if desc.class_tag != CLASS_MULTI:
        raise ValueError(f"expected a MULTI descriptor, got {desc.class_tag}")
    if len(s_at_xi) != len(desc.branches):
        raise ValueError(
            f"{len(s_at_xi)} values of S for {len(desc.branches)} branches"
        )
    if N < 1:
        raise ValueError("N must be at least 1")
    w = complex(w)
    logn = math.log(N)
    total = 0j
    err = 0.0
    for br, s_val in zip(desc.branches, s_at_xi):
        xi = complex(br.xi)
        # xi^-N = r^-N * (xi/|xi|)^-N; the phase is taken from its angle
        phase = cmath.exp(-1j * N * cmath.phase(xi))
        front = cmath.exp(br.bigk * w + (w * br.vartheta - 1) * logn)
        front *= phase * _radial_factor(abs(xi), N, rho)
        total += front * complex(s_val) * recip_gamma(br.vartheta * w)
        err += abs(front) / N
    return AsymptoticResult(total, err)


def h_asym(theta: ThetaSequence, N: int, rho: Optional[float] = None) -> AsymptoticResult:
    """Asymptotic h_N from the descriptor (w = 1, S = 1)."""
    desc = theta.require_descriptor()
    if desc.class_tag == CLASS_F:
        return hwang_coeff_F(desc, 1.0, 1.0, N, rho)
    if desc.class_tag == CLASS_EF:
        return hwang_coeff_eF(desc, 1.0, 1.0, N, rho)
    raise ValueError("h asymptotics need a class F or eF descriptor")
