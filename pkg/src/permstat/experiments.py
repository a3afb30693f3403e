"""Experiment runners behind the ``permstat`` command line.

Each runner takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentResult` holding named tables and pass/fail verdicts.
Monte Carlo work is cut into fixed replica blocks; block ``i`` always uses
stream id ``i``, so the rows do not depend on the number of workers.
"""
from __future__ import annotations

import cmath
import json
import math
import os
import platform
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import h_asym
from .models import CLASS_EF, CLASS_F, ThetaSequence, parse_model
from .moments import (
    asym_moment_circle,
    asym_moment_inside,
    charpoly_expand,
    exact_moments,
)
from .partitions import cycle_type_law
from .sampler import (
    CycleBatch,
    CycleTypeSampler,
    RandomStream,
    ZLaw,
    parse_zlaw,
    sample_batch_marks,
)
from .series import compute_h
from .spectral import (
    CircleFunction,
    TailNotControlled,
    clt_quantities,
    default_p,
    delta_values,
    eigenvalue_angles,
    exact_char_trace_power,
    integer_limit_pmf,
    limit_char_trace_f,
    limit_char_trace_power,
    parse_function,
    sample_limit_y,
    trace_f_batch,
    trace_power_batch,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "Table",
    "Verdict",
    "ConfigError",
    "REPLICA_BLOCK",
    "draw_batch",
    "run_command",
    "write_result",
]

REPLICA_BLOCK = 10_000
DEFAULT_SEED = 20240607
COMMANDS = ("hn", "sample", "trace-dist", "clt", "moments", "autocorr", "selftest")


class ConfigError(ValueError):
    """A configuration problem detected before any computation."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"--{field_name.replace('_', '-')}: {message}")


@dataclass
class ExperimentConfig:
    command: str
    model: str = "ewens:1"
    n: int = 100
    samples: int = 10_000
    seed: int = DEFAULT_SEED
    workers: int = 1
    output_format: str = "csv"
    out: Optional[str] = None
    d: Optional[int] = None
    s_grid: str = "0:1:11"
    x1: Optional[str] = None
    x2: Optional[str] = None
    s1: int = 1
    s2: int = 0
    function: Optional[str] = None
    zlaw: str = "point"
    p: Optional[float] = None
    kmax: Optional[int] = None
    asym: bool = False
    step: int = 1
    only: Optional[str] = None

    def echo(self) -> dict:
        # the output path is not part of the experiment, so two runs to
        # different files echo the same config
        return {k: v for k, v in asdict(self).items() if v is not None and k != "out"}


@dataclass
class Parsed:
    theta: ThetaSequence
    function: Optional[CircleFunction]
    zlaw: ZLaw
    s_values: np.ndarray
    x1: Optional[complex]
    x2: Optional[complex]


def _parse_complex(text: str, name: str) -> complex:
    """``re,im`` or ``turn:t`` for e^{2 pi i t}."""
    if text.startswith("turn:"):
        try:
            return cmath.exp(2j * math.pi * float(text[5:]))
        except ValueError:
            raise ConfigError(name, f"expected turn:<float>, got {text!r}") from None
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(name, f"expected 're,im', got {text!r}")


def parse_s_grid(text: str) -> np.ndarray:
    try:
        a, b, steps = text.split(":")
        a, b, steps = float(a), float(b), int(steps)
    except ValueError:
        raise ConfigError("s_grid", f"expected a:b:steps, got {text!r}") from None
    if steps < 1:
        raise ConfigError("s_grid", "steps must be at least 1")
    return np.linspace(a, b, steps)


def validate(cfg: ExperimentConfig) -> Parsed:
    """Parse and check everything; raises ConfigError before any heavy work."""
    if cfg.command not in COMMANDS:
        raise ConfigError("command", f"unknown command {cfg.command!r}")
    if cfg.n < 1:
        raise ConfigError("n", "must be at least 1")
    if cfg.samples < 1:
        raise ConfigError("samples", "must be at least 1")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be at least 1")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed", "must be an unsigned 64-bit integer")
    if cfg.output_format not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    if cfg.step < 1:
        raise ConfigError("step", "must be at least 1")
    try:
        theta = parse_model(cfg.model)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    f = None
    if cfg.function is not None:
        try:
            f = parse_function(cfg.function)
        except (ValueError, OSError, KeyError) as exc:
            raise ConfigError("function", str(exc)) from None
    try:
        z = parse_zlaw(cfg.zlaw)
    except ValueError as exc:
        raise ConfigError("zlaw", str(exc)) from None
    s_values = parse_s_grid(cfg.s_grid)
    x1 = _parse_complex(cfg.x1, "x1") if cfg.x1 is not None else None
    x2 = _parse_complex(cfg.x2, "x2") if cfg.x2 is not None else None
    if cfg.command == "trace-dist":
        if (cfg.d is None) == (f is None):
            raise ConfigError("d", "trace-dist needs exactly one of --d or --function")
        if cfg.d is not None and cfg.d < 1:
            raise ConfigError("d", "must be at least 1")
    if cfg.command == "clt":
        if f is None:
            raise ConfigError("function", "clt needs --function")
        if not f.is_real:
            raise ConfigError("function", "the CLT path accepts real-valued F only")
        if theta.constant is None:
            raise ConfigError("model", "the CLT path needs constant weights (ewens:theta)")
        p = cfg.p if cfg.p is not None else default_p(theta.constant)
        if not p > max(1.0 / theta.constant, 2.0):
            raise ConfigError("p", f"must exceed max(1/theta, 2) = {max(1.0 / theta.constant, 2.0):g}")
    if cfg.command in ("moments", "autocorr"):
        if x1 is None:
            raise ConfigError("x1", f"{cfg.command} needs --x1")
        if cfg.command == "autocorr" and x2 is None:
            raise ConfigError("x2", "autocorr needs --x2")
        if cfg.s1 < 0 or cfg.s2 < 0:
            raise ConfigError("s1", "powers must be non-negative")
        if cfg.command == "moments" and cfg.s2 > 0 and x2 is None:
            raise ConfigError("x2", "--s2 > 0 needs --x2")
    if cfg.kmax is not None and cfg.kmax < 1:
        raise ConfigError("kmax", "must be at least 1")
    return Parsed(theta, f, z, s_values, x1, x2)


@dataclass
class Table:
    columns: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


@dataclass
class Verdict:
    name: str
    passed: bool
    observed: float
    threshold: float
    note: str = ""


@dataclass
class ExperimentResult:
    command: str
    config: dict
    tables: dict = field(default_factory=dict)
    verdicts: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)


# -- replica sampling -----------------------------------------------------------


def _block_sizes(samples: int) -> list:
    full, rest = divmod(samples, REPLICA_BLOCK)
    return [REPLICA_BLOCK] * full + ([rest] if rest else [])


def _draw_block(args):
    model, n, count, seed, stream_id, zlaw = args
    theta = parse_model(model)
    rng = RandomStream(seed, stream_id)
    batch = CycleTypeSampler(theta, compute_h(theta, n, _rho(theta)), n).sample(count, rng)
    z = parse_zlaw(zlaw)
    marks = None if z.is_point else sample_batch_marks(batch, z, rng)
    return batch.lengths, marks


def _rho(theta: ThetaSequence) -> float:
    return theta.radius if theta.descriptor is not None else 1.0


def draw_batch(model: str, n: int, samples: int, seed: int, zlaw: str = "point", workers: int = 1):
    """Cycle lengths (and marks) for ``samples`` draws, merged in replica order."""
    jobs = [(model, n, c, seed, i, zlaw) for i, c in enumerate(_block_sizes(samples))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_draw_block, jobs))
    else:
        parts = [_draw_block(j) for j in jobs]
    width = max(p[0].shape[1] for p in parts)
    lengths = np.concatenate([np.pad(p[0], ((0, 0), (0, width - p[0].shape[1]))) for p in parts])
    marks = None
    if parts[0][1] is not None:
        marks = np.concatenate(
            [np.pad(p[1], ((0, 0), (0, width - p[1].shape[1])), constant_values=1) for p in parts]
        )
    return CycleBatch(n, lengths), marks


# -- commands -------------------------------------------------------------------


def cmd_hn(cfg: ExperimentConfig, parsed: Parsed) -> ExperimentResult:
    theta = parsed.theta
    res = ExperimentResult("hn", cfg.echo())
    desc = theta.descriptor
    if cfg.asym and desc is None:
        raise ConfigError("asym", f"{theta.label}: no singularity descriptor; asymptotic evaluation refused")
    with_asym = desc is not None
    rho = _rho(theta)
    h = compute_h(theta, cfg.n, rho)
    start = 2 if (with_asym and desc.class_tag == CLASS_EF) else 1
    grid = list(range(start, cfg.n + 1, cfg.step))
    if grid and grid[-1] != cfg.n:
        grid.append(cfg.n)
    cols = ["N", "h_exact_scaled"]
    if with_asym:
        cols += ["h_asym_scaled", "ratio", "n_abs_ratio_minus_1"]
    rows = []
    for N in grid:
        exact = float(h.h_scaled[N])
        row = [N, exact]
        if with_asym:
            a = h_asym(theta, N, rho=rho).value.real
            ratio = a / exact
            row += [a, ratio, N * abs(ratio - 1)]
        rows.append(row)
    res.tables["hn"] = Table(cols, rows)
    res.meta["scale"] = f"values are h_N * {rho:g}^N"
    big = [r for r in rows if r[0] >= 128]
    if with_asym and big:
        if desc.class_tag == CLASS_F:
            worst = max(r[4] for r in big)
            res.verdicts.append(Verdict("hwang_F_rate", worst <= 10, worst, 10.0, "max N|ratio-1| over N >= 128"))
        elif desc.class_tag == CLASS_EF:
            worst = max(abs(r[3] - 1) / (math.log(r[0]) / r[0]) for r in big)
            res.verdicts.append(
                Verdict("hwang_eF_envelope", worst <= 50, worst, 50.0, "max |rel err| N / log N over N >= 128")
            )
    return res


def _chi2_against_oracle(parts: list, theta: ThetaSequence, n: int):
    law = cycle_type_law(theta, n)
    cnt = Counter(parts)
    keys = list(law)
    obs = np.array([cnt.get(k, 0) for k in keys], dtype=float)
    exp = np.array([law[k] for k in keys]) * len(parts)
    if len(keys) < 2:
        return law, cnt, 0.0, 1.0
    stat, pval = stats.chisquare(obs, exp)
    return law, cnt, float(stat), float(pval)


def cmd_sample(cfg: ExperimentConfig, parsed: Parsed) -> ExperimentResult:
    res = ExperimentResult("sample", cfg.echo())
    batch, marks = draw_batch(cfg.model, cfg.n, cfg.samples, cfg.seed, cfg.zlaw, cfg.workers)
    types = batch.cycle_types()
    show_angles = not parsed.zlaw.is_point
    cols = ["index", "cycle_type", "total_cycles"] + (["eigen_angles"] if show_angles else [])
    rows = []
    for i, c in enumerate(types):
        row = [i, str(c), c.total_cycles]
        if show_angles:
            slot_marks = _slot_marks(batch.lengths[i], marks[i])
            ang = eigenvalue_angles(c, slot_marks)
            row.append(";".join(f"{a:.12g}" for a in ang))
        rows.append(row)
    res.tables["samples"] = Table(cols, rows)
    if cfg.n <= 12:
        law, cnt, stat, pval = _chi2_against_oracle([c.parts for c in types], parsed.theta, cfg.n)
        lrows = [
            [" ".join(map(str, k)), cnt.get(k, 0), cnt.get(k, 0) / cfg.samples, p]
            for k, p in law.items()
        ]
        res.tables["law"] = Table(["partition", "count", "frequency", "oracle_probability"], lrows)
        min_expected = min(law.values()) * cfg.samples
        if cfg.n <= 8 and min_expected >= 5:
            res.verdicts.append(Verdict("cycle_type_chi2", pval >= 1e-3, pval, 1e-3, f"chi2 = {stat:.4g}"))
    return res


def _slot_marks(lengths_row, marks_row) -> dict:
    out, seen = {}, Counter()
    for k, y in zip(lengths_row, marks_row):
        if k:
            seen[int(k)] += 1
            out[(int(k), seen[int(k)])] = complex(y)
    return out


def _tv_to_pmf(values: np.ndarray, offset: int, pmf: np.ndarray) -> float:
    vals = values.astype(np.int64)
    lo = min(int(vals.min()), offset)
    hi = max(int(vals.max()), offset + len(pmf) - 1)
    emp = np.bincount(vals - lo, minlength=hi - lo + 1) / len(vals)
    lim = np.zeros(hi - lo + 1)
    lim[offset - lo : offset - lo + len(pmf)] = pmf
    return 0.5 * float(np.sum(np.abs(emp - lim))) + 0.5 * max(0.0, 1.0 - float(pmf.sum()))


def cmd_trace_dist(cfg: ExperimentConfig, parsed: Parsed) -> ExperimentResult:
    res = ExperimentResult("trace-dist", cfg.echo())
    theta, f, z = parsed.theta, parsed.function, parsed.zlaw
    batch, marks = draw_batch(cfg.model, cfg.n, cfg.samples, cfg.seed, cfg.zlaw, cfg.workers)
    has_limit = theta.descriptor is not None
    r = theta.radius
    integer_valued = False
    if cfg.d is not None:
        tr = trace_power_batch(batch, cfg.d).astype(float) + 0j
        integer_valued = True
        if has_limit:
            lim_fn = lambda s: limit_char_trace_power(theta, r, cfg.d, s)  # noqa: E731
            ks = [k for k in range(1, cfg.d + 1) if cfg.d % k == 0]
            means = [theta(k) * r**k / k for k in ks]
            steps = ks
            lim_mean = sum(theta(k) * r**k for k in ks)
    else:
        tr = trace_f_batch(batch, f, marks)
        if has_limit:
            lim_fn = lambda s: limit_char_trace_f(theta, r, f, z, s, cfg.kmax).value  # noqa: E731
            kmax = cfg.kmax or _laurent_degree(f)
            if kmax is not None:
                lim_mean = sum(
                    theta(k) * r**k * z.expect(k, lambda y, k=k: delta_values(f, k, y))
                    for k in range(1, kmax + 1)
                )
            else:
                lim_mean = None
            if z.is_point and f.laurent is not None and kmax is not None:
                kd = [k * delta_values(f, k).real[()] for k in range(1, kmax + 1)]
                if all(abs(v - round(v)) < 1e-12 for v in kd) and np.allclose(tr.imag, 0):
                    integer_valued = True
                    means = [theta(k) * r**k / k for k in range(1, kmax + 1)]
                    steps = [int(round(v)) for v in kd]
    rows = []
    for s in parsed.s_values:
        emp = complex(np.mean(np.exp(1j * s * tr)))
        row = [float(s), emp.real, emp.imag]
        if has_limit:
            try:
                lv = lim_fn(float(s))
            except TailNotControlled as exc:
                raise ConfigError("kmax", f"{exc} (k_max = {exc.k_max})") from None
            row += [lv.real, lv.imag, abs(emp - lv)]
        rows.append(row)
    cols = ["s", "emp_re", "emp_im"] + (["limit_re", "limit_im", "abs_diff"] if has_limit else [])
    res.tables["charfn"] = Table(cols, rows)
    if cfg.d is not None and cfg.n <= 2000:
        exact = [exact_char_trace_power(theta, cfg.n, cfg.d, float(s)) for s in parsed.s_values]
        res.tables["charfn_exact"] = Table(
            ["s", "exact_re", "exact_im"], [[float(s), e.real, e.imag] for s, e in zip(parsed.s_values, exact)]
        )
    if has_limit:
        sup = max(r_[5] for r_ in rows)
        res.verdicts.append(Verdict("charfn_sup_distance", sup <= 0.015, sup, 0.015, "sup over the s-grid"))
        if lim_mean is not None:
            se = float(np.std(tr.real, ddof=1)) / math.sqrt(len(tr)) if len(tr) > 1 else math.inf
            dev = abs(float(np.mean(tr.real)) - float(np.real(lim_mean)))
            ratio = dev / se if se > 0 else (0.0 if dev == 0 else math.inf)
            res.verdicts.append(Verdict("mean_within_3se", ratio <= 3, ratio, 3.0, f"limit mean {float(np.real(lim_mean)):.6g}"))
    if integer_valued:
        vals = np.rint(tr.real).astype(np.int64)
        cnt = np.bincount(vals - vals.min())
        hrows = [[int(v + vals.min()), int(c), c / len(vals)] for v, c in enumerate(cnt) if c]
        hcols = ["value", "count", "frequency"]
        if has_limit:
            offset, pmf = integer_limit_pmf(means, steps)
            for row in hrows:
                i = row[0] - offset
                row.append(float(pmf[i]) if 0 <= i < len(pmf) else 0.0)
            hcols.append("limit_probability")
            tv = _tv_to_pmf(vals, offset, pmf)
            res.verdicts.append(Verdict("total_variation", tv <= 0.02, tv, 0.02, "empirical law vs Poisson limit"))
        res.tables["histogram"] = Table(hcols, hrows)
    return res


def _laurent_degree(f: CircleFunction) -> Optional[int]:
    if f.laurent is None:
        return None
    return max([abs(d) for d in f.laurent if d != 0], default=1)


def clt_draws(theta_const: float, f: CircleFunction, z_spec: str, n: int, samples: int, seed: int, workers: int = 1):
    batch, marks = draw_batch(f"ewens:{theta_const!r}", n, samples, seed, z_spec, workers)
    return trace_f_batch(batch, f, marks).real


def cmd_clt(cfg: ExperimentConfig, parsed: Parsed) -> ExperimentResult:
    res = ExperimentResult("clt", cfg.echo())
    theta = float(parsed.theta.constant)
    f, z = parsed.function, parsed.zlaw
    p = cfg.p if cfg.p is not None else default_p(theta)
    q = clt_quantities(theta, f, z, cfg.n, p)
    if not q.v_n > 0:
        raise ConfigError("function", "V_N = 0: degenerate statistic cannot be standardised")
    tr = clt_draws(theta, f, cfg.zlaw, cfg.n, cfg.samples, cfg.seed, cfg.workers)
    x = (tr - q.e_n) / math.sqrt(q.v_n)
    ks = stats.kstest(x, "norm")
    res.tables["summary"] = Table(
        ["n", "v_n", "e_n", "p", "lyapunov_ratio", "ks", "ks_pvalue", "mean", "var"],
        [[cfg.n, q.v_n, q.e_n, p, q.lyapunov_ratio, float(ks.statistic), float(ks.pvalue),
          float(np.mean(x)), float(np.var(x, ddof=1)) if len(x) > 1 else 0.0]],
    )
    trend = []
    m = 10
    while m < cfg.n:
        qm = clt_quantities(theta, f, z, m, p)
        trend.append([m, qm.v_n, qm.e_n, qm.lyapunov_ratio])
        m *= 10
    trend.append([cfg.n, q.v_n, q.e_n, q.lyapunov_ratio])
    res.tables["trend"] = Table(["n", "v_n", "e_n", "lyapunov_ratio"], trend)
    res.tables["samples"] = Table(["index", "standardized"], [[i, float(v)] for i, v in enumerate(x)])
    bounded = _bounded_variance(f)
    if bounded:
        # negative control: the limit is the compound Poisson Y, not a Gaussian
        res.verdicts.append(Verdict("non_gaussian", ks.statistic > 0.1, float(ks.statistic), 0.1, "expected-fail of the Gaussian claim"))
        y = sample_limit_y(
            parsed.theta, 1.0, f, z, RandomStream(cfg.seed, 2**32), k_max=cfg.kmax, size=cfg.samples
        ).values.real
        y = (y - q.e_n) / math.sqrt(q.v_n)
        two = stats.ks_2samp(x, y)
        res.verdicts.append(Verdict("matches_y_limit", two.pvalue >= 1e-3, float(two.pvalue), 1e-3, "two-sample KS p-value"))
    else:
        res.verdicts.append(Verdict("gaussian_ks", ks.statistic <= 0.03, float(ks.statistic), 0.03, "KS vs standard normal"))
    return res


def _bounded_variance(f: CircleFunction) -> bool:
    return f.laurent is not None and abs(f.laurent.get(0, 0j)) == 0


def _decay_verdicts(res: ExperimentResult, N: np.ndarray, diff: np.ndarray, n: int, absolute: Optional[float]):
    ref = max(1, n // 8)
    if n >= 16:
        d_ref, d_n = float(diff[ref - 1]), float(diff[n - 1])
        ok = d_n <= max(0.5 * d_ref, 1e-9)
        res.verdicts.append(Verdict("decay", ok, d_n, max(0.5 * d_ref, 1e-9), f"|diff| at N={n} vs half of N={ref}"))
    if absolute is not None:
        d_n = float(diff[n - 1])
        res.verdicts.append(Verdict("absolute", d_n <= absolute, d_n, absolute, f"|diff| at N={n}"))


def _moment_rows(values, pred, step, n):
    rows = []
    for N in range(1, n + 1):
        if (N - 1) % step and N != n:
            continue
        e, a = values[N], pred[N - 1]
        rows.append([N, e.real, e.imag, a.real, a.imag, abs(e - a), N * abs(e - a)])
    return rows


def cmd_moments(cfg: ExperimentConfig, parsed: Parsed, autocorr: bool = False) -> ExperimentResult:
    res = ExperimentResult("autocorr" if autocorr else "moments", cfg.echo())
    theta = parsed.theta
    s1, s2 = (1, 1) if autocorr else (cfg.s1, cfg.s2)
    x1 = parsed.x1
    p = charpoly_expand(s1, s2)
    on_circle = abs(abs(x1) - 1) <= 1e-12
    if s2 > 0 or autocorr:
        x2 = parsed.x2
        if (abs(abs(x2) - 1) <= 1e-12) != on_circle:
            raise ConfigError("x2", "x1 and x2 must both lie inside the disc or both on the circle")
    else:
        x2 = 1.0 + 0j if on_circle else 0j
    if not on_circle and abs(x1) > 1:
        raise ConfigError("x1", "|x1| must not exceed 1")
    values = exact_moments(theta, p, x1, x2, cfg.n)
    if on_circle:
        pred = asym_moment_circle(theta, p, x1, x2)
        if autocorr:
            pred = pred.dominant()
        regime = "circle"
    else:
        pred = asym_moment_inside(theta, p, x1, x2)
        regime = "inside"
    predicted = np.array([pred.value(N) for N in range(1, cfg.n + 1)])
    diff = np.abs(values[1:] - predicted)
    res.meta["regime"] = regime
    res.tables["moments"] = Table(
        ["N", "exact_re", "exact_im", "asym_re", "asym_im", "abs_diff", "n_abs_diff"],
        _moment_rows(values, predicted, cfg.step, cfg.n),
    )
    res.tables["terms"] = Table(
        ["k1", "k2", "b", "e2_re", "e2_im", "exponent", "phase_re", "phase_im"],
        [[t.k1, t.k2, t.b.real, t.e2.real, t.e2.imag, t.exponent.real, t.phase_base.real, t.phase_base.imag]
         for t in pred.terms],
    )
    _decay_verdicts(res, np.arange(1, cfg.n + 1), diff, cfg.n, 0.1 if autocorr else None)
    return res


def cmd_selftest(cfg: ExperimentConfig, parsed: Parsed) -> ExperimentResult:
    from .acceptance import format_outcome, run_acceptance

    res = ExperimentResult("selftest", cfg.echo())
    only = None
    if cfg.only:
        only = [int(x) for x in cfg.only.split(",") if x.strip()]
    outcomes = run_acceptance(seed=cfg.seed, only=only, report=lambda o: print(format_outcome(o), file=sys.stderr))
    rows = []
    for o in outcomes:
        shown = [v if math.isfinite(v) else "n/a" for v in (o.observed, o.threshold)]
        rows.append([o.number, o.name, int(o.passed), *shown, o.seconds, o.limit_seconds])
        res.verdicts.append(Verdict(f"criterion_{o.number}", o.passed, o.observed, o.threshold, o.detail))
    res.tables["acceptance"] = Table(
        ["criterion", "name", "passed", "observed", "threshold", "seconds", "limit_seconds"], rows
    )
    return res


def run_command(cfg: ExperimentConfig) -> ExperimentResult:
    parsed = validate(cfg)
    t0 = time.perf_counter()
    if cfg.command == "hn":
        res = cmd_hn(cfg, parsed)
    elif cfg.command == "sample":
        res = cmd_sample(cfg, parsed)
    elif cfg.command == "trace-dist":
        res = cmd_trace_dist(cfg, parsed)
    elif cfg.command == "clt":
        res = cmd_clt(cfg, parsed)
    elif cfg.command == "moments":
        res = cmd_moments(cfg, parsed)
    elif cfg.command == "autocorr":
        res = cmd_moments(cfg, parsed, autocorr=True)
    else:
        res = cmd_selftest(cfg, parsed)
    res.meta.update(
        {
            "permstat": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "wall_seconds": round(time.perf_counter() - t0, 3),
        }
    )
    _check_finite(res)
    return res


def _check_finite(res: ExperimentResult):
    for name, t in res.tables.items():
        for row in t.rows:
            for v in row:
                if isinstance(v, float) and not math.isfinite(v):
                    raise ArithmeticError(f"non-finite value in table {name!r}")


# -- output ---------------------------------------------------------------------


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    text = str(v)
    return f'"{text}"' if ("," in text or '"' in text) else text


def to_json(res: ExperimentResult) -> str:
    config = dict(res.config)
    config["meta"] = res.meta
    rows = {
        name: [dict(zip(t.columns, [_plain(v) for v in r])) for r in t.rows]
        for name, t in res.tables.items()
    }
    verdicts = [
        {"name": v.name, "passed": bool(v.passed), "observed": _plain(v.observed),
         "threshold": _plain(v.threshold), "note": v.note}
        for v in res.verdicts
    ]
    return json.dumps({"config": config, "rows": rows, "verdicts": verdicts}, indent=1)


def _plain(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def to_csv(res: ExperimentResult) -> str:
    lines = [f"# permstat {res.command}", "# config: " + json.dumps(res.config, sort_keys=True)]
    lines.append("# meta: " + json.dumps(res.meta, sort_keys=True))
    for v in res.verdicts:
        lines.append(
            f"# verdict: {v.name} {'PASS' if v.passed else 'FAIL'} observed={_num(v.observed)} "
            f"threshold={_num(v.threshold)} {v.note}".rstrip()
        )
    for name, t in res.tables.items():
        lines.append(f"# table: {name} columns: {','.join(t.columns)}")
        lines.append(",".join(t.columns))
        lines.extend(",".join(_num(v) for v in r) for r in t.rows)
    return "\n".join(lines) + "\n"


def write_result(res: ExperimentResult, fmt: str, out: Optional[str]):
    text = to_json(res) if fmt == "json" else to_csv(res)
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    tmp = out + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, out)
