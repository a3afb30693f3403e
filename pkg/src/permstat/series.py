"""Truncated formal power series and the normalisation table h_N.

A series is stored as its first ``M + 1`` complex coefficients.  All
operations take the truncation order explicitly; nothing is global.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TruncatedSeries",
    "HTable",
    "series_mul",
    "series_exp",
    "series_log",
    "series_pow",
    "g_theta_series",
    "compute_h",
]


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients ``coeffs[n]`` of ``t**n`` for ``n = 0..M``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size < 1:
            raise ValueError("a truncated series needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("series coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def truncation_order(self) -> int:
        return self.coeffs.size - 1

    def __getitem__(self, n):
        return self.coeffs[n]

    def __len__(self):
        return self.coeffs.size

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        m = min(self.truncation_order, other.truncation_order)
        return TruncatedSeries(self.coeffs[: m + 1] + other.coeffs[: m + 1])

    def __sub__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        m = min(self.truncation_order, other.truncation_order)
        return TruncatedSeries(self.coeffs[: m + 1] - other.coeffs[: m + 1])

    def scale(self, w: complex) -> "TruncatedSeries":
        return TruncatedSeries(w * self.coeffs)

    def padded(self, M: int) -> np.ndarray:
        """Coefficient array of length ``M + 1``, zero-padded or cut."""
        out = np.zeros(M + 1, dtype=complex)
        n = min(M + 1, self.coeffs.size)
        out[:n] = self.coeffs[:n]
        return out

    @classmethod
    def one(cls, M: int) -> "TruncatedSeries":
        c = np.zeros(M + 1, dtype=complex)
        c[0] = 1.0
        return cls(c)


def _as_array(a, M: int) -> np.ndarray:
    if isinstance(a, TruncatedSeries):
        return a.padded(M)
    out = np.zeros(M + 1, dtype=complex)
    arr = np.asarray(a, dtype=complex).ravel()[: M + 1]
    out[: arr.size] = arr
    return out


def series_mul(a: TruncatedSeries, b: TruncatedSeries, M: int) -> TruncatedSeries:
    """Cauchy product modulo ``t**(M+1)``; shorter inputs are zero-padded."""
    x = _as_array(a, M)
    y = _as_array(b, M)
    return TruncatedSeries(np.convolve(x, y)[: M + 1])


def _exp_coeffs(a: np.ndarray) -> np.ndarray:
    # n b_n = sum_{k=1..n} k a_k b_{n-k}
    M = a.size - 1
    ka = np.arange(M + 1) * a
    b = np.zeros(M + 1, dtype=a.dtype)
    b[0] = 1.0
    for n in range(1, M + 1):
        b[n] = np.dot(ka[1 : n + 1], b[n - 1 :: -1]) / n
    return b


def series_exp(a: TruncatedSeries, M: int) -> TruncatedSeries:
    """``exp(a)`` for a series without constant term."""
    x = _as_array(a, M)
    if x[0] != 0:
        raise ValueError("series_exp needs a[0] == 0 (formal exponential)")
    return TruncatedSeries(_exp_coeffs(x))


def series_log(a: TruncatedSeries, M: int) -> TruncatedSeries:
    """``log(a)`` for a series with ``a[0] == 1``."""
    x = _as_array(a, M)
    if x[0] != 1:
        raise ValueError("series_log needs a[0] == 1")
    # n c_n = n a_n - sum_{k=1..n-1} k c_k a_{n-k}
    c = np.zeros(M + 1, dtype=complex)
    kc = np.zeros(M + 1, dtype=complex)
    for n in range(1, M + 1):
        acc = n * x[n]
        if n > 1:
            acc -= np.dot(kc[1:n], x[n - 1 : 0 : -1])
        c[n] = acc / n
        kc[n] = n * c[n]
    return TruncatedSeries(c)


def series_pow(a: TruncatedSeries, w: complex, M: int) -> TruncatedSeries:
    """``a**w := exp(w log a)`` for ``a[0] == 1``."""
    x = _as_array(a, M)
    if x[0] != 1:
        raise ValueError("series_pow needs a[0] == 1")
    if w == 0:
        return TruncatedSeries.one(M)
    return series_exp(series_log(x, M).scale(w), M)


def _scaled_weights(theta, M: int, rho: float = 1.0) -> np.ndarray:
    """``theta_k * rho**k`` for ``k = 0..M`` (entry 0 is zero)."""
    k = np.arange(1, M + 1)
    if rho != 1.0:
        vals = np.exp(theta.log_values(M) + k * np.log(rho))
    else:
        vals = np.asarray(theta.values(M), dtype=float)
    return np.concatenate(([0.0], vals))


def g_theta_series(theta, M: int, rho: float = 1.0) -> TruncatedSeries:
    """The log-generating series ``sum theta_k rho**k t**k / k``."""
    if M < 1:
        raise ValueError("g_theta_series needs M >= 1")
    w = _scaled_weights(theta, M, rho)
    k = np.arange(M + 1, dtype=float)
    k[0] = 1.0
    return TruncatedSeries(w / k)


@dataclass(frozen=True)
class HTable:
    """Normalisation constants, stored as ``h_scaled[N] = h_N * rho**N``.

    With ``rho`` equal to the singularity radius the stored values grow
    only polynomially, which keeps very long tables inside double range.
    """

    theta_id: str
    h_scaled: np.ndarray
    rho: float = 1.0
    theta_scaled: np.ndarray = field(repr=False, default=None)

    @property
    def M(self) -> int:
        return self.h_scaled.size - 1

    @property
    def h(self) -> np.ndarray:
        """Unscaled ``h_N``; may under/overflow when ``rho != 1``."""
        if self.rho == 1.0:
            return self.h_scaled
        n = np.arange(self.h_scaled.size)
        return self.h_scaled * np.exp(-n * np.log(self.rho))

    def log_h(self, N: int) -> float:
        return float(np.log(self.h_scaled[N]) - N * np.log(self.rho))

    def ratio(self, N: int, k: int) -> float:
        """``h_{N-k} / h_N`` computed without leaving the scaled range."""
        return float(self.h_scaled[N - k] / self.h_scaled[N] * self.rho**k)


def compute_h(theta, M: int, rho: float = 1.0) -> HTable:
    """h_0..h_M from ``N h_N = sum_{k<=N} theta_k h_{N-k}``.

    ``rho`` rescales to ``h_N rho**N``; the same recursion holds with
    ``theta_k`` replaced by ``theta_k rho**k``.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if rho <= 0:
        raise ValueError("rho must be positive")
    w = _scaled_weights(theta, max(M, 1), rho)[: M + 1]
    h = np.zeros(M + 1)
    h[0] = 1.0
    for n in range(1, M + 1):
        h[n] = np.dot(w[1 : n + 1], h[n - 1 :: -1]) / n
    h.setflags(write=False)
    w.setflags(write=False)
    return HTable(theta_id=getattr(theta, "label", "custom"), h_scaled=h, rho=float(rho), theta_scaled=w)
