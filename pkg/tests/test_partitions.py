import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from permstat import models
from permstat.partitions import (
    PARTITION_CAP,
    Partition,
    class_weight,
    cycle_type_law,
    expect_class_function,
    h_oracle,
    partitions,
    z_of,
)


def pentagonal_count(n: int) -> int:
    p = [1] + [0] * n
    for m in range(1, n + 1):
        j, total = 1, 0
        while True:
            g1 = j * (3 * j - 1) // 2
            if g1 > m:
                break
            sign = 1 if j % 2 else -1
            total += sign * p[m - g1]
            g2 = j * (3 * j + 1) // 2
            if g2 <= m:
                total += sign * p[m - g2]
            j += 1
        p[m] = total
    return p[n]


def test_counts():
    assert [p.parts for p in partitions(0)] == [()]
    assert len(list(partitions(5))) == 7
    assert len(list(partitions(20))) == 627 == pentagonal_count(20)


def test_order_and_cap():
    first = [p.parts for p in partitions(4)]
    assert first == [(4,), (3, 1), (2, 2), (2, 1, 1), (1, 1, 1, 1)]
    with pytest.raises(ValueError):
        partitions(PARTITION_CAP + 1)
    with pytest.raises(ValueError):
        Partition((1, 2))


def test_z():
    assert z_of(Partition((1, 1, 1))) == 6
    assert z_of(Partition((2,))) == 2
    for n in range(11):
        assert sum(math.factorial(n) / z_of(p) for p in partitions(n)) == pytest.approx(math.factorial(n))


def _cycle_type(perm):
    seen, parts = set(), []
    for i in range(len(perm)):
        if i in seen:
            continue
        j, length = i, 0
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        parts.append(length)
    return tuple(sorted(parts, reverse=True))


def test_expectations():
    theta = models.table_sequence([0.7, 1.9, 0.4])
    assert expect_class_function(theta, 7, lambda lam: 1.0) == pytest.approx(1.0)
    fixed = expect_class_function(models.ewens(1), 4, lambda lam: lam.multiplicities().get(1, 0))
    perms = list(itertools.permutations(range(4)))
    brute = np.mean([sum(p[i] == i for i in range(4)) for p in perms])
    assert fixed == pytest.approx(1.0) and brute == pytest.approx(1.0)
    th = 2.6
    got = expect_class_function(models.ewens(th), 2, lambda lam: float(lam.parts == (1, 1)))
    assert got == pytest.approx(th / (th + 1))


def test_uniform_law_matches_enumeration():
    law = cycle_type_law(models.ewens(1), 5)
    counts = {}
    for p in itertools.permutations(range(5)):
        t = _cycle_type(p)
        counts[t] = counts.get(t, 0) + 1
    for t, c in counts.items():
        assert law[t] == pytest.approx(c / 120)


@given(st.lists(st.floats(0.1, 3.0), min_size=1, max_size=8), st.integers(1, 12))
def test_law_sums_to_one_and_h_positive(vals, n):
    theta = models.table_sequence(vals)
    law = cycle_type_law(theta, n)
    assert sum(law.values()) == pytest.approx(1.0)
    assert h_oracle(theta, n) > 0
    lam = next(partitions(n))
    assert class_weight(theta, lam) == pytest.approx(theta(n) / n)
