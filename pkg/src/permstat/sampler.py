"""Sampling cycle types under P_Theta, the Feller coupling and mark laws.

Only cycle types are ever drawn: every statistic in the package is a class
function of the permutation, plus independent marks for the wreath case.
Batches are stored as a padded matrix of cycle lengths (zeros mark unused
slots), which keeps traces and cycle counts vectorised.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, roots_legendre

from .models import ThetaSequence
from .series import HTable

__all__ = [
    "CycleType",
    "CycleBatch",
    "RandomStream",
    "ZLaw",
    "CycleTypeSampler",
    "FellerBatch",
    "sample_cycle_type",
    "sample_cycle_types",
    "expected_cycle_count",
    "feller_coupling",
    "feller_coupling_batch",
    "feller_tail_bound",
    "psi_n",
    "sample_poisson_field",
    "sample_wreath_marks",
    "parse_zlaw",
]

log = logging.getLogger(__name__)

# largest n for which the full table of conditional cycle-length laws is kept
TABLE_CAP = 3000


@dataclass(frozen=True)
class CycleType:
    """Cycle counts ``C_k`` of a permutation of ``n`` elements."""

    n: int
    counts: dict

    def __post_init__(self):
        clean = {}
        for k, c in dict(self.counts).items():
            k, c = int(k), int(c)
            if k < 1 or c < 0:
                raise ValueError(f"invalid cycle count C_{k} = {c}")
            if c:
                clean[k] = c
        if sum(k * c for k, c in clean.items()) != self.n:
            raise ValueError(f"sum k C_k must equal n = {self.n}")
        object.__setattr__(self, "counts", dict(sorted(clean.items())))

    @classmethod
    def from_lengths(cls, lengths) -> "CycleType":
        counts: dict = {}
        total = 0
        for k in lengths:
            k = int(k)
            if k:
                counts[k] = counts.get(k, 0) + 1
                total += k
        return cls(total, counts)

    @property
    def total_cycles(self) -> int:
        return sum(self.counts.values())

    def count(self, k: int) -> int:
        return self.counts.get(k, 0)

    @property
    def parts(self) -> tuple:
        """The cycle type as a non-increasing partition."""
        out = []
        for k in sorted(self.counts, reverse=True):
            out.extend([k] * self.counts[k])
        return tuple(out)

    def __str__(self) -> str:
        if not self.counts:
            return "-"
        return " ".join(f"{k}^{c}" if c > 1 else str(k) for k, c in self.counts.items())


class RandomStream:
    """A reproducible generator identified by ``(seed, stream_id)``.

    Streams with the same pair give identical draws; distinct stream ids
    are statistically independent (numpy ``SeedSequence`` spawn keys).
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(seed, spawn_key=(stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, stream_id: int) -> "RandomStream":
        return RandomStream(self.seed, stream_id)


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be a RandomStream or numpy Generator")


POINT = "point_mass_one"
UNIFORM = "uniform_circle"
ATOMS = "discrete_atoms"

_MAX_PRODUCT_SUPPORT = 200_000


@dataclass(frozen=True)
class ZLaw:
    """Law of the i.i.d. unit-modulus matrix entries ``z_j``."""

    kind: str
    atoms: tuple = ()

    def __post_init__(self):
        if self.kind not in (POINT, UNIFORM, ATOMS):
            raise ValueError(f"unknown mark law {self.kind!r}")
        if self.kind == ATOMS:
            atoms = tuple((float(a) % (2 * math.pi), float(p)) for a, p in self.atoms)
            if not atoms:
                raise ValueError("discrete law needs at least one atom")
            if any(p < 0 for _, p in atoms):
                raise ValueError("atom probabilities must be non-negative")
            if abs(sum(p for _, p in atoms) - 1.0) > 1e-12:
                raise ValueError("atom probabilities must sum to 1")
            object.__setattr__(self, "atoms", atoms)
        elif self.atoms:
            raise ValueError(f"{self.kind} takes no atoms")

    @classmethod
    def point(cls) -> "ZLaw":
        return cls(POINT)

    @classmethod
    def uniform(cls) -> "ZLaw":
        return cls(UNIFORM)

    @classmethod
    def discrete(cls, atoms: Sequence) -> "ZLaw":
        return cls(ATOMS, tuple(atoms))

    @property
    def is_point(self) -> bool:
        return self.kind == POINT or (
            self.kind == ATOMS and len(self.atoms) == 1 and self.atoms[0][0] == 0.0
        )

    def sample(self, size, rng) -> np.ndarray:
        return self.sample_product(np.ones(size, dtype=np.int64), rng)

    def sample_product(self, k, rng) -> np.ndarray:
        """Independent draws of ``z_1 ... z_k`` for each entry of ``k``.

        Uniform and point laws are closed under products; atoms use the
        multinomial count of each atom among the k factors.
        """
        k = np.asarray(k, dtype=np.int64)
        g = _gen(rng)
        if self.kind == POINT:
            return np.ones(k.shape, dtype=complex)
        if self.kind == UNIFORM:
            return np.exp(2j * math.pi * g.random(k.shape))
        angles = np.array([a for a, _ in self.atoms])
        probs = np.array([p for _, p in self.atoms])
        if len(angles) == 1:
            return np.exp(1j * angles[0] * k)
        counts = g.multinomial(k.ravel(), probs)
        phase = (counts @ angles).reshape(k.shape)
        return np.exp(1j * phase)

    def product_law(self, k: int) -> Optional[tuple]:
        """Exact law of ``z_1 ... z_k`` as (angles, probabilities); None if continuous."""
        if self.kind == UNIFORM:
            return None
        if self.kind == POINT:
            return np.zeros(1), np.ones(1)
        law = {0.0: 1.0}
        step = {a: p for a, p in self.atoms}
        # repeated squaring on a dict keyed by rounded angle
        def conv(x, y):
            out: dict = {}
            for a, p in x.items():
                for b, q in y.items():
                    c = round((a + b) % (2 * math.pi), 12)
                    if c >= round(2 * math.pi, 12):
                        c = 0.0
                    out[c] = out.get(c, 0.0) + p * q
            if len(out) > _MAX_PRODUCT_SUPPORT:
                raise ValueError("exact product law has too many atoms")
            return out

        base = step
        e = int(k)
        while e:
            if e & 1:
                law = conv(law, base)
            e >>= 1
            if e:
                base = conv(base, base)
        angles = np.array(sorted(law))
        return angles, np.array([law[a] for a in angles])

    def expect(self, k: int, func, nodes: int = 256) -> complex:
        """``E[func(Z_k)]`` for a vectorised ``func`` of unit-circle points.

        Uniform marks use Gauss-Legendre on the angle with a node-doubling
        check; a change above 1e-9 triggers further doubling (up to 4096
        nodes) and a warning if it persists.
        """
        law = self.product_law(k)
        if law is not None:
            angles, probs = law
            return complex(np.sum(probs * func(np.exp(1j * angles))))
        return _gauss_legendre_circle(func, nodes)

    def label(self) -> str:
        if self.kind == ATOMS:
            return "atoms:" + ",".join(f"{a:g}={p:g}" for a, p in self.atoms)
        return {POINT: "point", UNIFORM: "uniform"}[self.kind]


@lru_cache(maxsize=16)
def _gl_circle_nodes(nodes: int):
    x, w = roots_legendre(nodes)
    y = np.exp(1j * math.pi * (x + 1.0))
    y.setflags(write=False)
    w.setflags(write=False)
    return y, w


def _gl_once(func, nodes: int) -> complex:
    y, w = _gl_circle_nodes(nodes)
    return complex(np.sum(w * func(y)) / 2.0)


def _gauss_legendre_circle(func, nodes: int = 256, tol: float = 1e-9) -> complex:
    prev = _gl_once(func, nodes)
    while True:
        nodes *= 2
        cur = _gl_once(func, nodes)
        if abs(cur - prev) < tol:
            return cur
        if nodes >= 4096:
            log.warning("circle quadrature not settled: change %.2e at %d nodes", abs(cur - prev), nodes)
            return cur
        prev = cur


def parse_zlaw(spec: str) -> ZLaw:
    """``point``, ``uniform`` or ``atoms:angle=prob,angle=prob,...``."""
    spec = spec.strip()
    if spec == "point":
        return ZLaw.point()
    if spec == "uniform":
        return ZLaw.uniform()
    if spec.startswith("atoms:"):
        atoms = []
        for item in spec[len("atoms:"):].split(","):
            if not item.strip():
                continue
            a, sep, p = item.partition("=")
            if not sep:
                raise ValueError(f"atom {item!r} should read angle=probability")
            atoms.append((float(a), float(p)))
        return ZLaw.discrete(atoms)
    raise ValueError(f"unknown mark law {spec!r} (expected point, uniform or atoms:...)")


@dataclass(frozen=True)
class CycleBatch:
    """Cycle lengths of many independent permutations of ``n``.

    ``lengths[i]`` lists the cycle lengths of draw ``i`` in the order they
    were produced, padded with zeros.
    """

    n: int
    lengths: np.ndarray

    def __len__(self) -> int:
        return self.lengths.shape[0]

    def counts(self, k_max: Optional[int] = None) -> np.ndarray:
        """Matrix of cycle counts, column ``k - 1`` holding ``C_k``."""
        k_max = self.n if k_max is None else k_max
        S = len(self)
        rows = np.repeat(np.arange(S), self.lengths.shape[1])
        flat = self.lengths.ravel()
        keep = (flat > 0) & (flat <= k_max)
        idx = rows[keep] * k_max + flat[keep] - 1
        return np.bincount(idx, minlength=S * k_max).reshape(S, k_max)

    def total_cycles(self) -> np.ndarray:
        return np.count_nonzero(self.lengths, axis=1)

    def cycle_types(self) -> list:
        return [CycleType.from_lengths(row) for row in self.lengths]

    def parts(self) -> list:
        """Partition tuples (non-increasing) per draw."""
        srt = -np.sort(-self.lengths, axis=1)
        return [tuple(int(x) for x in row if x) for row in srt]


class CycleTypeSampler:
    """Sequential sampler: the cycle through a marked point has length k with
    probability ``theta_k h_{m-k} / (m h_m)`` when ``m`` points remain.

    For ``n <= TABLE_CAP`` every conditional law is tabulated once (as one
    increasing array ``m + F_m(k)``, so a single ``searchsorted`` serves a
    whole batch); above the cap rows are built per round for the distinct
    remaining sizes.
    """

    def __init__(self, theta: ThetaSequence, h: HTable, n: int, use_table: Optional[bool] = None):
        n = int(n)
        if n < 0:
            raise ValueError("n must be non-negative")
        if h.M < n:
            raise ValueError(f"HTable covers N <= {h.M}, need {n}")
        self.theta = theta
        self.n = n
        self._h = np.asarray(h.h_scaled, dtype=float)
        w = h.theta_scaled
        if w is None or len(w) < n + 1:
            from .series import _scaled_weights
            w = _scaled_weights(theta, max(n, 1), h.rho)
        self._w = np.asarray(w, dtype=float)
        if use_table is None:
            use_table = n <= TABLE_CAP
        self._table = self._build_table() if (use_table and n > 0) else None

    def _row(self, m: int) -> np.ndarray:
        cum = np.cumsum(self._w[1 : m + 1] * self._h[m - 1 :: -1][:m])
        cum /= cum[-1]
        cum[-1] = 1.0
        return cum

    def _build_table(self):
        n = self.n
        offsets = np.zeros(n + 2, dtype=np.int64)
        offsets[2:] = np.cumsum(np.arange(1, n + 1))
        flat = np.empty(offsets[-1])
        for m in range(1, n + 1):
            flat[offsets[m] : offsets[m + 1]] = m + self._row(m)
        return offsets, flat

    def _draw(self, rem: np.ndarray, u: np.ndarray) -> np.ndarray:
        if self._table is not None:
            offsets, flat = self._table
            pos = np.searchsorted(flat, rem + u, side="right")
            k = pos - offsets[rem] + 1
        else:
            k = np.empty_like(rem)
            for m in np.unique(rem):
                sel = rem == m
                k[sel] = np.searchsorted(self._row(int(m)), u[sel], side="right") + 1
        return np.minimum(k, rem)

    def sample(self, size: int, rng) -> CycleBatch:
        g = _gen(rng)
        size = int(size)
        if size < 0:
            raise ValueError("size must be non-negative")
        rem = np.full(size, self.n, dtype=np.int64)
        cols = []
        active = np.nonzero(rem)[0]
        while active.size:
            u = g.random(active.size)
            k = self._draw(rem[active], u)
            col = np.zeros(size, dtype=np.int64)
            col[active] = k
            cols.append(col)
            rem[active] -= k
            active = active[rem[active] > 0]
        lengths = np.stack(cols, axis=1) if cols else np.zeros((size, 0), dtype=np.int64)
        return CycleBatch(self.n, lengths)


def sample_cycle_types(theta: ThetaSequence, h: HTable, n: int, size: int, rng) -> CycleBatch:
    return CycleTypeSampler(theta, h, n).sample(size, rng)


def sample_cycle_type(theta: ThetaSequence, h: HTable, n: int, rng) -> CycleType:
    """One cycle type drawn exactly from P_Theta on S_n."""
    batch = CycleTypeSampler(theta, h, n, use_table=False).sample(1, rng)
    return CycleType.from_lengths(batch.lengths[0]) if n else CycleType(0, {})


def expected_cycle_count(theta: ThetaSequence, h: HTable, n: int, k: int) -> float:
    """E_Theta[C_k] = (theta_k / k) h_{n-k} / h_n, zero for k > n."""
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        return 0.0
    if h.M < n:
        raise ValueError(f"HTable covers N <= {h.M}, need {n}")
    return theta(k) / k * h.ratio(n, k)


def psi_n(theta: float, n: int, k: int) -> float:
    """binom(n-k+theta-1, n-k) / binom(n+theta-1, n) through log-gamma."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    if not theta > 0:
        raise ValueError("theta must be positive")

    def log_binom(m):
        return gammaln(m + theta) - gammaln(theta) - gammaln(m + 1)

    return float(math.exp(log_binom(n - k) - log_binom(n)))


def _constant_theta(theta) -> float:
    if isinstance(theta, ThetaSequence):
        if theta.constant is None:
            raise ValueError(
                f"{theta.label}: the Feller coupling exists only for constant weights"
            )
        return float(theta.constant)
    theta = float(theta)
    if not theta > 0:
        raise ValueError("theta must be positive")
    return theta


def default_feller_cutoff(theta: float, n: int) -> int:
    return n + 50 * math.ceil(theta)


def feller_tail_bound(theta: float, cutoff: int, k: int) -> float:
    """Bound on the expected number of k-spacings missed by stopping at ``cutoff``.

    A missed spacing ends at some j > cutoff with 1s at j - k and j, so the
    expectation is at most sum_{j > cutoff} theta^2 / ((theta+j-1)(theta+j-k-1)),
    which telescopes to at most theta^2 / (theta + cutoff - k - 1).
    """
    a = theta + cutoff - k - 1
    if a <= 0:
        return math.inf
    return theta * theta / a


@dataclass(frozen=True)
class FellerBatch:
    """Coupled cycle counts ``c[:, k-1] = C_k(n)`` and Poisson counts ``p[:, k-1]``."""

    n: int
    theta: float
    cutoff: int
    c: np.ndarray
    p: np.ndarray

    def tail_bound(self, k: int) -> float:
        return feller_tail_bound(self.theta, self.cutoff, k)


def _spacing_counts(rows, cols, S, k_max):
    same = rows[1:] == rows[:-1]
    d = (cols[1:] - cols[:-1])[same]
    r = rows[1:][same]
    keep = d <= k_max
    idx = r[keep] * k_max + d[keep] - 1
    return np.bincount(idx, minlength=S * k_max).reshape(S, k_max)


def feller_coupling_batch(
    theta,
    n: int,
    size: int,
    rng,
    k_max: Optional[int] = None,
    cutoff: Optional[int] = None,
    chunk: int = 20_000,
) -> FellerBatch:
    """Feller coupling for classical Ewens weights.

    Indicators xi_i ~ Bernoulli(theta / (theta + i - 1)) are drawn for
    i = 1..cutoff.  C_k(n) counts k-spacings between consecutive 1s in
    ``xi_1..xi_n`` followed by a forced 1 at n + 1; P_k counts k-spacings
    in ``xi_1..xi_cutoff`` and is Poisson(theta/k) up to the truncation
    reported by :func:`feller_tail_bound`.
    """
    th = _constant_theta(theta)
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    k_max = n if k_max is None else int(k_max)
    cutoff = default_feller_cutoff(th, n) if cutoff is None else int(cutoff)
    if cutoff < n:
        raise ValueError("cutoff must be at least n")
    g = _gen(rng)
    i = np.arange(1, cutoff + 1)
    prob = th / (th + i - 1)
    cs, ps = [], []
    for start in range(0, size, chunk):
        S = min(chunk, size - start)
        xi = g.random((S, cutoff)) < prob
        # C: first n indicators plus the sentinel at position n + 1
        head = np.concatenate([xi[:, :n], np.ones((S, 1), dtype=bool)], axis=1)
        r, col = np.nonzero(head)
        cs.append(_spacing_counts(r, col, S, k_max))
        r, col = np.nonzero(xi)
        ps.append(_spacing_counts(r, col, S, k_max))
    c = np.concatenate(cs) if cs else np.zeros((0, k_max), dtype=np.int64)
    p = np.concatenate(ps) if ps else np.zeros((0, k_max), dtype=np.int64)
    log.debug(
        "feller coupling n=%d cutoff=%d: missed 1-spacings <= %.3g per run",
        n, cutoff, feller_tail_bound(th, cutoff, 1),
    )
    return FellerBatch(n, th, cutoff, c, p)


def feller_coupling(theta, n: int, rng, cutoff: Optional[int] = None):
    """One coupled draw: ``(CycleType, {k: P_k})`` with P_k reported for k <= n."""
    b = feller_coupling_batch(theta, n, 1, rng, cutoff=cutoff)
    counts = {k + 1: int(v) for k, v in enumerate(b.c[0]) if v}
    return CycleType(n, counts), {k + 1: int(v) for k, v in enumerate(b.p[0])}


def sample_poisson_field(
    theta: ThetaSequence, r: float, k_max: int, rng, size: Optional[int] = None
) -> np.ndarray:
    """Independent P_k ~ Poisson(theta_k r^k / k), k = 1..k_max (last axis)."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    k = np.arange(1, k_max + 1)
    lam = np.exp(theta.log_values(k_max) + k * math.log(r)) / k
    shape = (k_max,) if size is None else (int(size), k_max)
    return _gen(rng).poisson(np.broadcast_to(lam, shape))


def sample_wreath_marks(c: CycleType, z: ZLaw, rng) -> dict:
    """Independent marks Z_{k,m} ~ z_1...z_k for every cycle slot (k, m)."""
    slots = [(k, m) for k, cnt in c.counts.items() for m in range(1, cnt + 1)]
    ks = np.array([k for k, _ in slots], dtype=np.int64)
    vals = z.sample_product(ks, rng)
    return {slot: complex(v) for slot, v in zip(slots, vals)}


def sample_batch_marks(batch: CycleBatch, z: ZLaw, rng) -> np.ndarray:
    """Marks aligned with ``batch.lengths``; padded slots get 1."""
    marks = np.ones(batch.lengths.shape, dtype=complex)
    if z.kind == POINT:
        return marks
    live = batch.lengths > 0
    marks[live] = z.sample_product(batch.lengths[live], rng)
    return marks
