"""Brute-force ground truth by enumerating integer partitions.

Every statistic handled by the package is a class function, so averaging
over S_n reduces to a weighted sum over cycle types.  Only meant for small
``n``; the enumeration is capped.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

__all__ = [
    "PARTITION_CAP",
    "Partition",
    "partitions",
    "z_of",
    "class_weight",
    "expect_class_function",
    "cycle_type_law",
    "h_oracle",
]

PARTITION_CAP = 45


@dataclass(frozen=True)
class Partition:
    parts: tuple

    def __post_init__(self):
        p = tuple(int(x) for x in self.parts)
        if any(x <= 0 for x in p):
            raise ValueError("parts must be positive")
        if any(p[i] < p[i + 1] for i in range(len(p) - 1)):
            raise ValueError("parts must be non-increasing")
        object.__setattr__(self, "parts", p)

    @property
    def n(self) -> int:
        return sum(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def multiplicities(self) -> dict[int, int]:
        """Cycle counts C_k."""
        return dict(Counter(self.parts))


def _gen(n: int, largest: int) -> Iterator[tuple]:
    if n == 0:
        yield ()
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _gen(n - first, first):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _partition_tuple(n: int) -> tuple:
    return tuple(Partition(p) for p in _gen(n, n))


def partitions(n: int) -> Iterator[Partition]:
    """All partitions of ``n`` in reverse lexicographic order, (n) first."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > PARTITION_CAP:
        raise ValueError(f"partition enumeration is capped at n = {PARTITION_CAP}")
    return iter(_partition_tuple(n))


def z_of(lam: Partition) -> float:
    """z_lambda = prod_k k^{C_k} C_k!  (|S_n| / size of the conjugacy class)."""
    out = 1
    for k, c in lam.multiplicities().items():
        out *= k**c * math.factorial(c)
    return float(out)


def class_weight(theta, lam: Partition, _vals=None) -> float:
    """(1/z_lambda) prod_m theta_{lambda_m}."""
    if _vals is None:
        _vals = theta.values(max(lam.n, 1))
    w = 1.0 / z_of(lam)
    for part in lam.parts:
        w *= float(_vals[part - 1])
    return w


def expect_class_function(theta, n: int, u: Callable[[Partition], complex]) -> complex:
    """E_Theta[u] on S_n, summed over cycle types."""
    vals = theta.values(max(n, 1))
    total = 0j
    norm = 0.0
    for lam in partitions(n):
        w = class_weight(theta, lam, vals)
        norm += w
        total += w * u(lam)
    return total / norm


def cycle_type_law(theta, n: int) -> dict[tuple, float]:
    """Exact probability of each cycle type under P_Theta."""
    vals = theta.values(max(n, 1))
    weights = {lam.parts: class_weight(theta, lam, vals) for lam in partitions(n)}
    h = sum(weights.values())
    return {k: v / h for k, v in weights.items()}


def h_oracle(theta, n: int) -> float:
    """h_n = sum over lambda |- n of (1/z_lambda) prod theta_{lambda_m}."""
    vals = theta.values(max(n, 1))
    return sum(class_weight(theta, lam, vals) for lam in partitions(n))
