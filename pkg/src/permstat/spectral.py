"""Linear eigenvalue statistics of random permutation matrices and of their
circle-marked (wreath product) extension.

A k-cycle carrying the mark y contributes the k-th roots of y as
eigenvalues, so every trace reduces to the root averages
``Delta_k(F, y) = (1/k) sum_{w^k = y} F(w)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import roots_legendre, zeta

from .models import ThetaSequence, ewens
from .sampler import (
    CycleBatch,
    CycleType,
    CycleTypeSampler,
    ZLaw,
    _gen,
    sample_batch_marks,
)
from .series import _exp_coeffs, _scaled_weights, compute_h

__all__ = [
    "CircleFunction",
    "CltQuantities",
    "FourierReport",
    "LimitValue",
    "TailNotControlled",
    "laurent_function",
    "arc_indicator",
    "cosine",
    "constant_function",
    "fourier_function",
    "linear_combination",
    "parse_function",
    "delta_k",
    "delta_k_marked",
    "delta_values",
    "eigenvalue_angles",
    "trace_power",
    "trace_f",
    "trace_f_wreath",
    "trace_f_batch",
    "trace_power_batch",
    "chi_k",
    "exact_char_trace",
    "exact_char_trace_power",
    "exact_char_trace_f",
    "limit_char_trace_power",
    "limit_char_trace_f",
    "sample_limit_y",
    "integer_limit_pmf",
    "fourier_coeff",
    "fourier_coeff_checked",
    "check_fourier_conditions",
    "clt_quantities",
    "standardized_trace",
    "bounded_variation_moment",
]

TWO_PI = 2.0 * math.pi
TAIL_TOL = 1e-8
# values this close to an integer count as the integer (root-of-unity hits)
_SNAP = 1e-9


class TailNotControlled(ValueError):
    """The truncation error of an infinite sum over k cannot be certified."""

    def __init__(self, message: str, k_max: Optional[int] = None, bound: float = math.inf):
        self.k_max = k_max
        self.bound = bound
        super().__init__(message)


@dataclass(frozen=True)
class CircleFunction:
    """A function F on the unit circle, evaluated at angles in radians.

    ``fourier`` holds c_m for m != 0 and ``mean`` holds c_0.  When
    ``fourier`` is complete (all other coefficients vanish, as for Laurent
    polynomials) ``fourier_complete`` is set.  ``root_average`` is an exact
    vectorised Delta_k(F, y) when one is known in closed form.
    ``coeff_decay = (C, alpha)`` certifies |c_m| <= C |m|^-alpha.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str
    mean: Optional[complex] = None
    fourier: Optional[dict] = None
    fourier_complete: bool = False
    laurent: Optional[dict] = None
    is_real: bool = False
    total_variation: Optional[float] = None
    sobolev_exponent: Optional[float] = None
    coeff_decay: Optional[tuple] = None
    root_average: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.laurent is not None:
            x = np.linspace(0.0, TWO_PI, 64, endpoint=False) + 0.1
            ref = sum(b * np.exp(1j * d * x) for d, b in self.laurent.items())
            got = self(x)
            if np.max(np.abs(got - ref), initial=0.0) > 1e-10:
                raise ValueError(f"{self.label}: evaluator disagrees with its Laurent data")

    def __call__(self, angles) -> np.ndarray:
        a = np.asarray(angles, dtype=float)
        return np.asarray(self.evaluator(a), dtype=complex) * np.ones(a.shape)

    def coefficient(self, m: int) -> Optional[complex]:
        """Known Fourier coefficient c_m, or None."""
        if m == 0:
            return self.mean
        if self.fourier is None:
            return None
        if m in self.fourier:
            return complex(self.fourier[m])
        return 0j if self.fourier_complete else None

    def shifted(self, c: complex) -> "CircleFunction":
        """F - c."""
        return linear_combination(1.0, self, -1.0, constant_function(c))


def _snap_int(x: np.ndarray) -> np.ndarray:
    r = np.round(x)
    return np.where(np.abs(x - r) < _SNAP, r, x)


def _laurent_root_average(coeffs: dict):
    items = [(int(d), complex(b)) for d, b in coeffs.items() if b != 0]

    def avg(k, y):
        k = np.asarray(k, dtype=np.int64)
        y = np.asarray(y, dtype=complex)
        out = np.zeros(np.broadcast(k, y).shape, dtype=complex)
        for d, b in items:
            if d == 0:
                out += b
                continue
            hit = (d % k) == 0
            if np.any(hit):
                e = np.where(hit, d // np.where(hit, k, 1), 0)
                out += np.where(hit, b * y**e, 0)
        return out

    return avg


def laurent_function(coeffs: dict, label: Optional[str] = None) -> CircleFunction:
    """F(x) = sum_d b_d x^d for a finite map d -> b_d."""
    c = {int(d): complex(b) for d, b in coeffs.items() if complex(b) != 0}
    items = list(c.items())

    def ev(a):
        return sum((b * np.exp(1j * d * a) for d, b in items), np.zeros(np.shape(a), dtype=complex))

    real = all(abs(c.get(-d, 0j) - b.conjugate()) < 1e-15 for d, b in items)
    label = label or "laurent:" + ",".join(f"{d}={_fmt(b)}" for d, b in sorted(items))
    return CircleFunction(
        evaluator=ev,
        label=label,
        mean=c.get(0, 0j),
        fourier={d: b for d, b in c.items() if d != 0},
        fourier_complete=True,
        laurent=c,
        is_real=real,
        total_variation=sum(TWO_PI * abs(d) * abs(b) for d, b in items),
        sobolev_exponent=math.inf,
        root_average=_laurent_root_average(c),
    )


def _fmt(b: complex) -> str:
    return f"{b.real:g}" if b.imag == 0 else f"{b.real:g}{b.imag:+g}j"


def cosine() -> CircleFunction:
    return laurent_function({1: 0.5, -1: 0.5}, label="cos")


def constant_function(c: complex) -> CircleFunction:
    return laurent_function({0: c}, label=f"const:{_fmt(complex(c))}")


def arc_indicator(a: float, b: float) -> CircleFunction:
    """Indicator of the arc of angles [a, b), with 0 <= b - a <= 2 pi."""
    a, b = float(a), float(b)
    if not 0 <= b - a <= TWO_PI:
        raise ValueError("need 0 <= b - a <= 2 pi")
    A = (a / TWO_PI) % 1.0
    L = (b - a) / TWO_PI
    B = A + L

    def ev(x):
        t = np.asarray(x, dtype=float) / TWO_PI
        # arc [A, B) in turns, possibly wrapping past 1
        rel = _snap_int(t - A) % 1.0
        rel = np.where(np.abs(rel - 1.0) < _SNAP, 0.0, rel)
        return np.where(rel < L - _SNAP, 1.0, 0.0) if L < 1 else np.ones_like(t)

    def avg(k, y):
        k = np.asarray(k, dtype=np.int64)
        t = (np.angle(np.asarray(y, dtype=complex)) / TWO_PI) % 1.0
        hi = np.ceil(_snap_int(k * B - t))
        lo = np.ceil(_snap_int(k * A - t))
        return (hi - lo) / k + 0j

    fourier = _ArcCoefficients(a, b)
    return CircleFunction(
        evaluator=ev,
        label=f"arc:{a:g},{b:g}",
        mean=complex(L),
        fourier=fourier,
        fourier_complete=True,
        is_real=True,
        total_variation=0.0 if L in (0.0, 1.0) else 2.0,
        sobolev_exponent=0.5,
        coeff_decay=(1.0 / math.pi, 1.0),
        root_average=avg,
    )


class _ArcCoefficients(dict):
    """Lazy closed-form Fourier coefficients of an arc indicator."""

    def __init__(self, a: float, b: float):
        super().__init__()
        self.a, self.b = a, b

    def __contains__(self, m) -> bool:
        return isinstance(m, (int, np.integer)) and m != 0

    def __getitem__(self, m):
        m = int(m)
        return (cmath.exp(-1j * m * self.a) - cmath.exp(-1j * m * self.b)) / (TWO_PI * 1j * m)

    def get(self, m, default=None):
        return self[m] if m in self else default


def fourier_function(coeffs: dict, mean: complex = 0.0, label: str = "fourier") -> CircleFunction:
    """Function with finitely many Fourier coefficients (a Laurent polynomial)."""
    c = {int(m): complex(v) for m, v in coeffs.items() if int(m) != 0}
    c[0] = complex(mean)
    return laurent_function(c, label=label)


def linear_combination(alpha: complex, f: CircleFunction, beta: complex, g: CircleFunction) -> CircleFunction:
    """alpha F + beta G with every piece of metadata that survives."""
    alpha, beta = complex(alpha), complex(beta)

    def ev(x):
        return alpha * f(x) + beta * g(x)

    laurent = None
    if f.laurent is not None and g.laurent is not None:
        laurent = {}
        for d, b in f.laurent.items():
            laurent[d] = laurent.get(d, 0j) + alpha * b
        for d, b in g.laurent.items():
            laurent[d] = laurent.get(d, 0j) + beta * b
        laurent = {d: b for d, b in laurent.items() if b != 0}
    fa, ga = _root_avg(f), _root_avg(g)
    root = None
    if fa is not None and ga is not None:
        root = _combined_average(alpha, fa, beta, ga)
    fourier = None
    complete = f.fourier_complete and g.fourier_complete
    if f.fourier is not None and g.fourier is not None:
        fourier = _SumCoefficients(alpha, f, beta, g)
    mean = None if f.mean is None or g.mean is None else alpha * f.mean + beta * g.mean
    tv = None
    if f.total_variation is not None and g.total_variation is not None:
        tv = abs(alpha) * f.total_variation + abs(beta) * g.total_variation
    decay = None
    if f.coeff_decay and g.coeff_decay:
        (c1, a1), (c2, a2) = f.coeff_decay, g.coeff_decay
        decay = (abs(alpha) * c1 + abs(beta) * c2, min(a1, a2))
    elif f.coeff_decay and g.laurent is not None:
        decay = _decay_with_poly(f.coeff_decay, alpha, beta, g.laurent)
    elif g.coeff_decay and f.laurent is not None:
        decay = _decay_with_poly(g.coeff_decay, beta, alpha, f.laurent)
    real = f.is_real and g.is_real and alpha.imag == 0 and beta.imag == 0
    return CircleFunction(
        evaluator=ev,
        label=f"({_fmt(alpha)})*{f.label}+({_fmt(beta)})*{g.label}",
        mean=mean,
        fourier=fourier,
        fourier_complete=complete,
        laurent=laurent,
        is_real=real,
        total_variation=tv,
        sobolev_exponent=_min_opt(f.sobolev_exponent, g.sobolev_exponent),
        coeff_decay=decay,
        root_average=root,
    )


def _combined_average(alpha, fa, beta, ga):
    def avg(k, y):
        return alpha * fa(k, y) + beta * ga(k, y)

    return avg


def _decay_with_poly(decay, a, b, poly):
    # a Laurent part only alters finitely many coefficients
    C, alpha = decay
    extra = max((abs(b * v) * abs(d) ** alpha for d, v in poly.items() if d != 0), default=0.0)
    return (abs(a) * C + extra, alpha)


def _min_opt(a, b):
    if a is None or b is None:
        return None
    return min(a, b)


class _SumCoefficients(dict):
    def __init__(self, alpha, f, beta, g):
        super().__init__()
        self._parts = (alpha, f, beta, g)

    def __contains__(self, m) -> bool:
        alpha, f, beta, g = self._parts
        return f.coefficient(m) is not None and g.coefficient(m) is not None

    def __getitem__(self, m):
        alpha, f, beta, g = self._parts
        return alpha * f.coefficient(m) + beta * g.coefficient(m)

    def get(self, m, default=None):
        return self[m] if m in self else default


def parse_function(spec: str) -> CircleFunction:
    """``laurent:d1=c1,d2=c2``, ``arc:a,b``, ``fourier:file.json`` or ``cos``.

    A trailing ``-mean`` on an arc (``arc:0,3.14159-mean``) subtracts the
    arc's mean so that the statistic is centred.
    """
    import json

    spec = spec.strip()
    if spec == "cos":
        return cosine()
    name, sep, rest = spec.partition(":")
    if not sep:
        raise ValueError(f"function spec {spec!r} lacks ':'")
    if name == "laurent":
        coeffs = {}
        for item in rest.split(","):
            if not item.strip():
                continue
            d, eq, c = item.partition("=")
            if not eq:
                raise ValueError(f"Laurent term {item!r} should read degree=coefficient")
            coeffs[int(d)] = complex(c.strip().replace("i", "j"))
        if not coeffs:
            raise ValueError("Laurent spec needs at least one term")
        return laurent_function(coeffs)
    if name == "arc":
        centred = rest.endswith("-mean")
        if centred:
            rest = rest[: -len("-mean")]
        parts = [p.strip() for p in rest.split(",")]
        if len(parts) != 2:
            raise ValueError("arc spec takes two angles: arc:a,b")
        a, b = (_angle(p) for p in parts)
        f = arc_indicator(a, b)
        return f.shifted(f.mean) if centred else f
    if name == "fourier":
        with open(rest, encoding="utf-8") as fh:
            data = json.load(fh)
        coeffs = {int(m): _json_complex(v) for m, v in data["coefficients"].items()}
        mean = coeffs.pop(0, 0j)
        return fourier_function(coeffs, mean, label=f"fourier:{rest}")
    raise ValueError(f"unknown function kind {name!r} (expected laurent, arc, fourier or cos)")


def _angle(text: str) -> float:
    t = text.strip().lower()
    if t.endswith("pi"):
        head = t[:-2].rstrip("*")
        return (float(head) if head else 1.0) * math.pi
    return float(t)


def _json_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1] if len(v) > 1 else 0.0)
    return complex(v)


# -- root averages -----------------------------------------------------------


def _root_avg(f: CircleFunction):
    if f.root_average is not None:
        return f.root_average
    if f.laurent is not None:
        return _laurent_root_average(f.laurent)
    return None


def _direct_root_average(f: CircleFunction, k: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.empty(k.shape, dtype=complex)
    phi = np.angle(y)
    for kk in np.unique(k):
        sel = k == kk
        m = np.arange(kk)
        ang = (phi[sel][:, None] + TWO_PI * m[None, :]) / kk
        out[sel] = f(ang).mean(axis=1)
    return out


def delta_values(f: CircleFunction, k, y=1.0) -> np.ndarray:
    """Vectorised Delta_k(F, y) over broadcast arrays ``k`` and ``y``."""
    k, y = np.broadcast_arrays(np.asarray(k, dtype=np.int64), np.asarray(y, dtype=complex))
    if np.any(k < 1):
        raise ValueError("k must be positive")
    avg = _root_avg(f)
    if avg is not None:
        return np.asarray(avg(k, y), dtype=complex) * np.ones(k.shape)
    return _direct_root_average(f, k.ravel(), y.ravel()).reshape(k.shape)


def delta_k_marked(f: CircleFunction, k: int, y: complex) -> complex:
    """(1/k) sum over the k-th roots w of y of F(w)."""
    if k < 1:
        raise ValueError("k must be positive")
    y = complex(y)
    if abs(abs(y) - 1.0) > 1e-12:
        raise ValueError(f"mark {y} is not on the unit circle")
    return complex(delta_values(f, np.array([k]), np.array([y]))[0])


def delta_k(f: CircleFunction, k: int) -> complex:
    """Average of F over the k-th roots of unity."""
    return delta_k_marked(f, k, 1.0)


def eigenvalue_angles(c: CycleType, marks: Optional[dict] = None) -> np.ndarray:
    """All eigenvalue angles in [0, 2 pi): each k-cycle gives the k-th roots of its mark."""
    out = []
    for k, cnt in c.counts.items():
        for m in range(1, cnt + 1):
            y = 1.0 if marks is None else marks[(k, m)]
            phi = cmath.phase(y)
            out.append((phi + TWO_PI * np.arange(k)) / k)
    if not out:
        return np.zeros(0)
    return np.sort(np.concatenate(out) % TWO_PI)


# -- traces --------------------------------------------------------------------


def trace_power(c: CycleType, d: int) -> int:
    """tr(sigma^d) = sum over k dividing d of k C_k."""
    if d < 1:
        raise ValueError("d must be positive")
    return sum(k * cnt for k, cnt in c.counts.items() if d % k == 0)


def trace_f(c: CycleType, f: CircleFunction) -> complex:
    """tr F = sum_k k C_k Delta_k(F)."""
    if not c.counts:
        return 0j
    ks = np.array(list(c.counts), dtype=np.int64)
    cnt = np.array(list(c.counts.values()))
    return complex(np.sum(ks * cnt * delta_values(f, ks)))


def trace_f_wreath(c: CycleType, marks: dict, f: CircleFunction) -> complex:
    """sum_k sum_{m <= C_k} k Delta_k(F, Z_{k,m})."""
    slots = {(k, m) for k, cnt in c.counts.items() for m in range(1, cnt + 1)}
    if set(marks) != slots:
        raise ValueError("marks must cover exactly the cycle slots (k, m) of the cycle type")
    if not slots:
        return 0j
    keys = sorted(slots)
    ks = np.array([k for k, _ in keys], dtype=np.int64)
    ys = np.array([marks[s] for s in keys], dtype=complex)
    if np.any(np.abs(np.abs(ys) - 1.0) > 1e-12):
        raise ValueError("marks must lie on the unit circle")
    return complex(np.sum(ks * delta_values(f, ks, ys)))


def trace_f_batch(batch: CycleBatch, f: CircleFunction, marks: Optional[np.ndarray] = None) -> np.ndarray:
    """tr F for every draw of a batch (complex array)."""
    L = batch.lengths
    if L.size == 0:
        return np.zeros(L.shape[0], dtype=complex)
    if marks is None:
        table = np.zeros(batch.n + 1, dtype=complex)
        if batch.n:
            table[1:] = delta_values(f, np.arange(1, batch.n + 1))
        return np.sum(L * table[L], axis=1)
    live = L > 0
    vals = np.zeros(L.shape, dtype=complex)
    vals[live] = L[live] * delta_values(f, L[live], marks[live])
    return vals.sum(axis=1)


def trace_power_batch(batch: CycleBatch, d: int) -> np.ndarray:
    L = batch.lengths
    hit = (L > 0) & (d % np.where(L > 0, L, 1) == 0)
    return np.sum(np.where(hit, L, 0), axis=1)


# -- characteristic functions ----------------------------------------------------


def chi_k(f: CircleFunction, z: ZLaw, k: int, s: float) -> complex:
    """E[exp(i s k Delta_k(F, Z_k))], Z_k the product of k marks."""
    if k < 1:
        raise ValueError("k must be positive")
    if s == 0:
        return 1 + 0j
    kk = int(k)
    return z.expect(kk, lambda y: np.exp(1j * s * kk * delta_values(f, kk, y)))


def _rho_for(theta: ThetaSequence) -> float:
    return theta.radius if theta.descriptor is not None else 1.0


def exact_char_trace(theta: ThetaSequence, n: int, chi: np.ndarray) -> complex:
    """[t^n] exp(sum_k theta_k chi_k t^k / k) / h_n for given chi_1..chi_n."""
    chi = np.asarray(chi, dtype=complex)
    if chi.size < n:
        raise ValueError("need chi_k for k = 1..n")
    rho = _rho_for(theta)
    w = _scaled_weights(theta, max(n, 1), rho)[: n + 1]
    a = np.zeros(n + 1, dtype=complex)
    k = np.arange(1, n + 1)
    a[1:] = w[1:] * chi[:n] / k
    h = compute_h(theta, n, rho)
    return complex(_exp_coeffs(a)[n] / h.h_scaled[n])


def exact_char_trace_power(theta: ThetaSequence, n: int, d: int, s: float) -> complex:
    """E_Theta[exp(i s tr(sigma^d))] at finite n, through the cycle index."""
    k = np.arange(1, n + 1)
    chi = np.where(d % k == 0, np.exp(1j * s * k), 1.0 + 0j)
    return exact_char_trace(theta, n, chi)


def exact_char_trace_f(theta: ThetaSequence, n: int, f: CircleFunction, z: ZLaw, s: float) -> complex:
    chi = np.array([chi_k(f, z, k, s) for k in range(1, n + 1)])
    return exact_char_trace(theta, n, chi)


def limit_char_trace_power(theta: ThetaSequence, r: float, d: int, s: float) -> complex:
    """exp(sum over k dividing d of (theta_k / k)(e^{isk} - 1) r^k)."""
    if d < 1:
        raise ValueError("d must be positive")
    acc = 0j
    for k in range(1, d + 1):
        if d % k == 0:
            acc += theta(k) / k * (cmath.exp(1j * s * k) - 1) * r**k
    return cmath.exp(acc)


@dataclass(frozen=True)
class LimitValue:
    value: complex
    tail_bound: float
    k_max: int


def _theta_r_sup(theta: ThetaSequence, r: float) -> float:
    # sup_k theta_k r^k, checked numerically over k <= 10^4
    K = 10_000
    k = np.arange(1, K + 1)
    return float(np.max(np.exp(theta.log_values(K) + k * math.log(r))))


def _delta_sup_tail(f: CircleFunction, K: int) -> float:
    """Certified bound on sum_{k > K} sup_y |Delta_k(F, y)|; inf if unknown."""
    if f.laurent is not None:
        if abs(f.laurent.get(0, 0j)) > 0:
            return math.inf
        degs = [abs(d) for d in f.laurent if d != 0]
        D = max(degs, default=0)
        total = 0.0
        for k in range(K + 1, D + 1):
            total += sum(abs(b) for d, b in f.laurent.items() if d != 0 and d % k == 0)
        return total
    if f.coeff_decay is not None and f.mean is not None and abs(f.mean) <= 1e-14:
        C, alpha = f.coeff_decay
        if alpha <= 1:
            return math.inf
        return 2 * C * float(zeta(alpha)) * K ** (1 - alpha) / (alpha - 1)
    return math.inf


def _auto_kmax(f: CircleFunction, scale: float) -> int:
    if f.laurent is not None:
        return max([abs(d) for d in f.laurent if d != 0], default=1)
    if f.coeff_decay is not None and f.coeff_decay[1] > 1:
        K = 16
        while scale * _delta_sup_tail(f, K) > TAIL_TOL / 2 and K < 10**7:
            K *= 2
        return K
    return 1000


def limit_char_trace_f(
    theta: ThetaSequence,
    r: float,
    f: CircleFunction,
    z: ZLaw,
    s: float,
    k_max: Optional[int] = None,
) -> LimitValue:
    """exp(sum_k (theta_k / k)(chi_k(s) - 1) r^k), truncated at k_max.

    The omitted part of the exponent is at most
    |s| sup_k(theta_k r^k) sum_{k > k_max} sup|Delta_k|, which is turned
    into a bound on the value; uncertifiable tails raise TailNotControlled.
    """
    if s == 0:
        return LimitValue(1 + 0j, 0.0, 0)
    B = _theta_r_sup(theta, r)
    if k_max is None:
        k_max = _auto_kmax(f, abs(s) * B)
    tail = abs(s) * B * _delta_sup_tail(f, k_max)
    if not math.isfinite(tail):
        raise TailNotControlled(
            f"tail beyond k_max={k_max} is not certified (no summable bound on sup|Delta_k|); "
            "F needs zero mean and summable root averages",
            k_max, math.inf,
        )
    acc = 0j
    for k in range(1, k_max + 1):
        acc += theta(k) / k * (chi_k(f, z, k, s) - 1) * r**k
    value = cmath.exp(acc)
    bound = abs(value) * math.expm1(tail)
    if not bound <= TAIL_TOL:
        raise TailNotControlled(
            f"tail beyond k_max={k_max} is not certified below {TAIL_TOL:g} "
            f"(bound {bound:.3g}); F needs zero mean and summable root averages",
            k_max, bound,
        )
    return LimitValue(value, bound, k_max)


@dataclass(frozen=True)
class YSample:
    values: np.ndarray
    tail_bound: float
    k_max: int


def sample_limit_y(
    theta: ThetaSequence,
    r: float,
    f: CircleFunction,
    z: ZLaw,
    rng,
    k_max: Optional[int] = None,
    size: int = 1,
) -> YSample:
    """Draws of Y = sum_k sum_{m <= P_k} k Delta_k(F, Z_{k,m}), P_k ~ Poisson(theta_k r^k / k).

    ``tail_bound`` bounds E|omitted part| by sup(theta_k r^k) sum_{k > k_max} sup|Delta_k|.
    """
    B = _theta_r_sup(theta, r)
    if k_max is None:
        k_max = _auto_kmax(f, B)
    tail = B * _delta_sup_tail(f, k_max)
    if not tail <= TAIL_TOL:
        raise TailNotControlled(
            f"expected tail of Y beyond k_max={k_max} is not certified (bound {tail:.3g})",
            k_max, tail,
        )
    g = _gen(rng)
    k = np.arange(1, k_max + 1)
    lam = np.exp(theta.log_values(k_max) + k * math.log(r)) / k
    P = g.poisson(np.broadcast_to(lam, (size, k_max)))
    rows, cols = np.nonzero(P)
    reps = P[rows, cols]
    rr = np.repeat(rows, reps)
    kk = np.repeat(cols + 1, reps)
    y = z.sample_product(kk, g)
    contrib = kk * delta_values(f, kk, y) if kk.size else np.zeros(0, dtype=complex)
    vals = np.bincount(rr, weights=contrib.real, minlength=size) + 1j * np.bincount(
        rr, weights=contrib.imag, minlength=size
    )
    return YSample(vals, tail, k_max)


def integer_limit_pmf(means: Sequence[float], steps: Sequence[int], tol: float = 1e-14):
    """Law of sum_j steps[j] * P_j with independent P_j ~ Poisson(means[j]).

    Returns ``(offset, pmf)`` with ``pmf[i] = P[sum = offset + i]``; each
    factor is cut where its Poisson tail drops below ``tol``.
    """
    from scipy.stats import poisson

    offset, pmf = 0, np.ones(1)
    for lam, a in zip(means, steps):
        a = int(a)
        if lam <= 0 or a == 0:
            continue
        top = int(poisson.isf(tol, lam)) + 1
        p = poisson.pmf(np.arange(top + 1), lam)
        comp = np.zeros(abs(a) * top + 1)
        comp[:: abs(a)] = p
        if a < 0:
            comp = comp[::-1]
            offset -= abs(a) * top
        pmf = np.convolve(pmf, comp)
    return offset, pmf


# -- Fourier analysis -------------------------------------------------------------


def fourier_coeff_checked(f: CircleFunction, m: int, nodes: int) -> tuple:
    """Trapezoidal c_m and the change observed when doubling the nodes."""
    if nodes < 4 * abs(m) + 16:
        raise ValueError(f"need at least {4 * abs(m) + 16} nodes for m = {m}")

    def trap(n):
        x = TWO_PI * np.arange(n) / n
        return complex(np.mean(f(x) * np.exp(-1j * m * x)))

    v = trap(nodes)
    return v, abs(trap(2 * nodes) - v)


def fourier_coeff(f: CircleFunction, m: int, nodes: int) -> complex:
    """c_m(F) = (1/2 pi) int e^{-imx} F(e^{ix}) dx on equispaced nodes."""
    return fourier_coeff_checked(f, m, nodes)[0]


@dataclass(frozen=True)
class FourierReport:
    mean: complex
    mean_zero: bool
    decay_exponent: float
    decay_ok: bool
    s_admissible: bool
    partial_sums: tuple
    sobolev_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_zero and self.decay_ok and self.sobolev_ok


def _coefficient_table(f: CircleFunction, m_max: int) -> np.ndarray:
    """c_m for m = -m_max..m_max (index m + m_max)."""
    ms = np.arange(-m_max, m_max + 1)
    known = [f.coefficient(int(m)) for m in ms]
    if all(c is not None for c in known):
        return np.array(known, dtype=complex)
    nodes = 8 * m_max + 64
    x = TWO_PI * np.arange(nodes) / nodes
    spec = np.fft.fft(f(x)) / nodes
    return spec[ms % nodes]


def check_fourier_conditions(
    f: CircleFunction,
    delta: float,
    s: float,
    vartheta: float,
    m_max: int = 512,
    cauchy_tol: float = 1e-3,
) -> FourierReport:
    """Report-only numerical checks of the Fourier hypotheses on F.

    (a) c_0 = 0.  (b) the envelope of |c_m| over the last three octaves
    decays at least like |m|^-(1 + delta).  (c) s > (1 - vartheta)_+ and the
    partial sums of |m|^s |c_m| settle over the last octave.
    """
    if m_max < 16:
        raise ValueError("m_max must be at least 16")
    c = _coefficient_table(f, m_max)
    mean = complex(c[m_max])
    mean_zero = abs(mean) <= 1e-10
    m = np.arange(1, m_max + 1)
    a = np.maximum(np.abs(c[m_max + 1 :]), np.abs(c[m_max - 1 :: -1][:m_max]))
    env = np.maximum.accumulate(a[::-1])[::-1]
    lo = max(1, m_max // 8)
    sel = slice(lo - 1, m_max)
    scale = max(float(np.max(a)), 1e-300)
    if np.all(env[sel] <= 1e-14 * scale):
        exponent = math.inf
    else:
        keep = env[sel] > 1e-14 * scale
        x = np.log(m[sel][keep])
        y = np.log(env[sel][keep])
        exponent = -float(np.polyfit(x, y, 1)[0]) if keep.sum() >= 2 else math.inf
    decay_ok = exponent >= 1 + delta - 1e-6
    s_ok = s > max(1.0 - vartheta, 0.0)
    terms = m.astype(float) ** s * a
    cums = np.cumsum(terms)
    octaves = [2**j for j in range(0, int(math.log2(m_max)) + 1)]
    partial = tuple(float(cums[o - 1]) for o in octaves)
    last, prev = float(cums[-1]), float(cums[m_max // 2 - 1])
    settled = abs(last - prev) <= cauchy_tol * max(1.0, abs(last))
    return FourierReport(mean, mean_zero, exponent, decay_ok, s_ok, partial, s_ok and settled)


# -- CLT quantities -------------------------------------------------------------


@dataclass(frozen=True)
class CltQuantities:
    n: int
    v_n: float
    e_n: float
    p_used: float
    lyapunov_ratio: float

    def __post_init__(self):
        if self.v_n < 0:
            raise ValueError("V_N must be non-negative")


def _delta_moments(f: CircleFunction, z: ZLaw, n: int, p: float):
    """E[Delta_k], E[Delta_k^2], E|Delta_k|^p for k = 1..n (real F)."""
    k = np.arange(1, n + 1)
    if z.is_point:
        d = delta_values(f, k).real
        return d, d * d, np.abs(d) ** p
    if z.kind == "uniform_circle":
        def moments(nodes):
            x, w = roots_legendre(nodes)
            y = np.exp(1j * math.pi * (x + 1.0))
            w = w / 2.0
            m1 = np.empty(n)
            m2 = np.empty(n)
            mp = np.empty(n)
            step = max(1, 2_000_000 // nodes)
            for start in range(0, n, step):
                kk = k[start : start + step]
                d = delta_values(f, kk[:, None], y[None, :]).real
                m1[start : start + step] = d @ w
                m2[start : start + step] = (d * d) @ w
                mp[start : start + step] = (np.abs(d) ** p) @ w
            return m1, m2, mp

        return moments(256)
    m1 = np.empty(n)
    m2 = np.empty(n)
    mp = np.empty(n)
    for i, kk in enumerate(k):
        ang, pr = z.product_law(int(kk))
        d = delta_values(f, int(kk), np.exp(1j * ang)).real
        m1[i], m2[i], mp[i] = pr @ d, pr @ (d * d), pr @ np.abs(d) ** p
    return m1, m2, mp


def clt_quantities(theta_const: float, f: CircleFunction, z: ZLaw, n: int, p: float) -> CltQuantities:
    """V_N = theta sum_k k E[Delta_k^2], E_N = theta sum_k E[Delta_k] and the
    ratio sum_k k^{p-1} E|Delta_k|^p / V_N^{p/2}."""
    theta = float(theta_const)
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not f.is_real:
        raise ValueError(f"{f.label}: the CLT quantities are defined for real F only")
    if not p > max(1.0 / theta, 2.0):
        raise ValueError(f"p must exceed max(1/theta, 2) = {max(1.0 / theta, 2.0):g}")
    if n < 1:
        raise ValueError("n must be positive")
    m1, m2, mp = _delta_moments(f, z, n, p)
    k = np.arange(1, n + 1, dtype=float)
    v = theta * float(np.sum(k * m2))
    e = theta * float(np.sum(m1))
    num = float(np.sum(k ** (p - 1) * mp))
    ratio = num / v ** (p / 2) if v > 0 else math.inf
    return CltQuantities(n, v, e, float(p), ratio)


def default_p(theta: float) -> float:
    return max(1.0 / theta, 2.0) + 1.0


def standardized_trace(
    theta_const: float,
    f: CircleFunction,
    z: ZLaw,
    n: int,
    samples: int,
    rng,
    q: Optional[CltQuantities] = None,
) -> np.ndarray:
    """(tr F - E_N) / sqrt(V_N) for ``samples`` draws under Ewens(theta)."""
    theta = float(theta_const)
    if q is None:
        q = clt_quantities(theta, f, z, n, default_p(theta))
    if not q.v_n > 0:
        raise ValueError("V_N = 0: the statistic is degenerate and cannot be standardised")
    model = ewens(theta)
    batch = CycleTypeSampler(model, compute_h(model, n), n).sample(samples, rng)
    g = _gen(rng)
    marks = None if z.is_point else sample_batch_marks(batch, z, g)
    tr = trace_f_batch(batch, f, marks).real
    return (tr - q.e_n) / math.sqrt(q.v_n)


def bounded_variation_moment(theta: ThetaSequence, f: CircleFunction, n: int, d: int) -> tuple:
    """Limit (int F)^d of E[(tr F)^d] / n^d and the error scale vartheta log(n) / n."""
    if f.total_variation is None:
        raise ValueError(f"{f.label}: total variation unknown")
    if d < 1 or n < 2:
        raise ValueError("need d >= 1 and n >= 2")
    desc = theta.require_descriptor()
    mean = f.mean
    if mean is None:
        nodes = 1 << 16
        mean = complex(np.mean(f(TWO_PI * np.arange(nodes) / nodes)))
    value = complex(mean) ** d
    if f.is_real:
        value = value.real
    return value, desc.vartheta * math.log(n) / n
