"""Weight sequences Theta = (theta_k) and their singularity certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "SingularityDescriptor",
    "Branch",
    "ThetaSequence",
    "ewens",
    "geometric_ewens",
    "perturbed_ewens",
    "table_sequence",
    "parse_model",
    "zeta_tail_sum",
]

CLASS_F = "F"
CLASS_EF = "eF"
CLASS_MULTI = "MULTI"

# bounded-ness of theta_k r^k is only ever checked numerically up to here
THETA_R_CHECK_K = 10_000


@dataclass(frozen=True)
class Branch:
    xi: complex
    vartheta: complex
    bigk: complex


@dataclass(frozen=True)
class SingularityDescriptor:
    class_tag: str
    r: float
    vartheta: float = 0.0
    bigk: complex = 0.0
    gamma: Optional[float] = None
    g0_at_r: Optional[complex] = None
    branches: tuple = ()

    def __post_init__(self):
        if self.class_tag not in (CLASS_F, CLASS_EF, CLASS_MULTI):
            raise ValueError(f"unknown class tag {self.class_tag!r}")
        if not self.r > 0:
            raise ValueError("singularity radius must be positive")
        if self.class_tag != CLASS_MULTI and self.vartheta < 0:
            raise ValueError("vartheta must be non-negative")
        if self.class_tag == CLASS_EF:
            if self.gamma is None or not 0 < self.gamma <= 1:
                raise ValueError("class eF needs gamma in (0, 1]")
            if self.g0_at_r is None:
                raise ValueError("class eF needs g0(r)")
        if self.class_tag == CLASS_MULTI:
            if not self.branches:
                raise ValueError("class MULTI needs at least one branch")
            xs = [complex(b.xi) for b in self.branches]
            for x in xs:
                if abs(abs(x) - self.r) > 1e-9 * self.r:
                    raise ValueError("every branch point must lie on |t| = r")
            for i in range(len(xs)):
                for j in range(i):
                    if abs(xs[i] - xs[j]) <= 1e-12 * self.r:
                        raise ValueError("branch points must be distinct")

    @classmethod
    def multi(cls, branches: Sequence[Branch]) -> "SingularityDescriptor":
        branches = tuple(branches)
        r = abs(complex(branches[0].xi)) if branches else 1.0
        return cls(CLASS_MULTI, r=r, branches=branches)


@dataclass(frozen=True)
class ThetaSequence:
    """Strictly positive weights ``theta_k``, ``k >= 1``.

    ``evaluator`` maps an integer array of indices to weights.  The
    descriptor and closed form are certificates supplied by whoever builds
    the sequence; they are never inferred from the coefficients.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str
    descriptor: Optional[SingularityDescriptor] = None
    g_closed_form: Optional[Callable[[complex], complex]] = None
    constant: Optional[float] = None
    log_evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    _theta_r_bound: list = field(default_factory=list, repr=False, compare=False)

    def values(self, M: int) -> np.ndarray:
        """theta_1..theta_M as a float array."""
        k = np.arange(1, M + 1)
        vals = np.asarray(self.evaluator(k), dtype=float)
        if vals.shape != k.shape:
            vals = np.broadcast_to(vals, k.shape).astype(float)
        # with a log form, exact zeros can only be underflow
        bad = ~(vals >= 0) if self.log_evaluator is not None else ~(vals > 0)
        if np.any(bad):
            raise ValueError(f"{self.label}: weights must be strictly positive")
        return vals

    def log_values(self, M: int) -> np.ndarray:
        """log theta_1..log theta_M, exact even where theta_k underflows."""
        if self.log_evaluator is None:
            return np.log(self.values(M))
        return np.asarray(self.log_evaluator(np.arange(1, M + 1)), dtype=float)

    def __call__(self, k: int) -> float:
        return float(self.evaluator(np.array([k]))[0])

    @property
    def radius(self) -> float:
        return self.descriptor.r if self.descriptor is not None else 1.0

    @property
    def theta_r_bound(self) -> float:
        """max over k <= 10^4 of theta_k r^k (numerical proxy for O(r^-k))."""
        if not self._theta_r_bound:
            k = np.arange(1, THETA_R_CHECK_K + 1)
            vals = np.exp(self.log_values(THETA_R_CHECK_K) + k * math.log(self.radius))
            self._theta_r_bound.append(float(np.max(vals)))
        return self._theta_r_bound[0]

    def g(self, z: complex) -> complex:
        if self.g_closed_form is None:
            raise ValueError(f"{self.label}: no closed form for g_Theta")
        return complex(self.g_closed_form(z))

    def big_g(self, z: complex, power: complex = 1.0) -> complex:
        """``G_Theta(z)**power`` taken as ``exp(power * g_Theta(z))``."""
        return complex(np.exp(power * self.g(z)))

    def require_descriptor(self) -> SingularityDescriptor:
        if self.descriptor is None:
            raise ValueError(
                f"{self.label}: no singularity descriptor; asymptotic evaluation refused"
            )
        return self.descriptor


def _log_inv_one_minus(z: complex) -> complex:
    return -np.log1p(-complex(z))


def ewens(theta: float) -> ThetaSequence:
    """Classical Ewens weights theta_k = theta, G = (1 - t)^-theta."""
    theta = float(theta)
    if not theta > 0:
        raise ValueError("theta must be positive")
    return ThetaSequence(
        evaluator=lambda k: np.full(np.shape(k), theta),
        label=f"ewens:{theta:g}",
        descriptor=SingularityDescriptor(CLASS_F, r=1.0, vartheta=theta, bigk=0.0),
        g_closed_form=lambda z: theta * _log_inv_one_minus(z),
        constant=theta,
    )


def geometric_ewens(theta: float, rho: float) -> ThetaSequence:
    """theta_k = theta q^k with q = rho; singular at r = 1/q."""
    theta, q = float(theta), float(rho)
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return ThetaSequence(
        evaluator=lambda k: theta * np.exp(np.asarray(k) * math.log(q)),
        label=f"geom:{theta:g},{q:g}",
        descriptor=SingularityDescriptor(CLASS_F, r=1.0 / q, vartheta=theta, bigk=0.0),
        g_closed_form=lambda z: theta * _log_inv_one_minus(q * z),
        log_evaluator=lambda k: math.log(theta) + np.asarray(k) * math.log(q),
    )


def zeta_tail_sum(s: float, cutoff: int = 1000) -> tuple[float, float]:
    """sum_{k>=1} k^-s for s > 1: partial sum plus an Euler-Maclaurin tail.

    Returns ``(value, error_bound)``.  The tail from ``cutoff`` on uses the
    integral, the half end-point term and two Bernoulli corrections; the
    bound is the size of the next correction, which dominates the remainder
    for these monotone completely-monotone summands.
    """
    if not s > 1:
        raise ValueError("need s > 1")
    k = np.arange(1, cutoff, dtype=float)
    head = float(np.sum(k[::-1] ** -s))
    K = float(cutoff)
    tail = K ** (1 - s) / (s - 1) + 0.5 * K**-s
    # B2/2! f'(K) and B4/4! f'''(K) with f(x) = x^-s
    tail += (1 / 12) * s * K ** (-s - 1)
    tail -= (1 / 720) * s * (s + 1) * (s + 2) * K ** (-s - 3)
    err = (1 / 30240) * s * (s + 1) * (s + 2) * (s + 3) * (s + 4) * K ** (-s - 5)
    return head + tail, err


def perturbed_ewens(theta: float, c: float, gamma: float) -> ThetaSequence:
    """theta_k = theta (1 + c k^-gamma), certified in eF(1, theta, gamma).

    g_Theta = theta log(1/(1-t)) + g0 with g0 = theta c Li_{1+gamma}(t).
    """
    import mpmath

    theta, c, gamma = float(theta), float(c), float(gamma)
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not c > -1:
        raise ValueError("need c > -1 so that every weight stays positive")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    s = 1.0 + gamma
    zsum, _ = zeta_tail_sum(s)
    g0_r = theta * c * zsum

    def g_closed(z):
        z = complex(z)
        base = theta * _log_inv_one_minus(z)
        if c == 0:
            return base
        return base + theta * c * complex(mpmath.polylog(s, z))

    return ThetaSequence(
        evaluator=lambda k: theta * (1.0 + c * np.asarray(k, dtype=float) ** -gamma),
        label=f"perturbed:{theta:g},{c:g},{gamma:g}",
        descriptor=SingularityDescriptor(
            CLASS_EF, r=1.0, vartheta=theta, gamma=gamma, g0_at_r=complex(g0_r)
        ),
        g_closed_form=g_closed,
        constant=theta if c == 0 else None,
    )


def table_sequence(values: Sequence[float], label: Optional[str] = None) -> ThetaSequence:
    """User weights theta_1..theta_m; theta_k = theta_m for k > m.  No descriptor."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("need a non-empty list of weights")
    if np.any(~(arr > 0)):
        raise ValueError("weights must be strictly positive")
    arr = arr.copy()
    arr.setflags(write=False)

    def ev(k):
        idx = np.minimum(np.asarray(k), arr.size) - 1
        return arr[idx]

    const = float(arr[0]) if np.all(arr == arr[0]) else None
    return ThetaSequence(evaluator=ev, label=label or "table", constant=const)


def _floats(text: str, n: int, name: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")] if text.strip() else []
    if len(parts) != n:
        raise ValueError(f"model '{name}' takes {n} comma-separated parameter(s), got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise ValueError(f"model '{name}': {exc}") from None


def parse_model(spec: str) -> ThetaSequence:
    """Parse ``ewens:θ``, ``geom:θ,q``, ``perturbed:θ,c,γ`` or ``table:θ1,...``."""
    name, sep, rest = spec.partition(":")
    name = name.strip().lower()
    if not sep:
        raise ValueError(f"model spec {spec!r} lacks ':'")
    if name == "ewens":
        return ewens(*_floats(rest, 1, name))
    if name == "geom":
        return geometric_ewens(*_floats(rest, 2, name))
    if name == "perturbed":
        return perturbed_ewens(*_floats(rest, 3, name))
    if name == "table":
        vals = [float(p) for p in rest.split(",") if p.strip()]
        return table_sequence(vals, label=f"table:{rest}")
    raise ValueError(f"unknown model {name!r} (expected ewens, geom, perturbed or table)")
