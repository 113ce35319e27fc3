"""Monte Carlo engine: percolation probabilities, critical-probability estimation, sweeps.

Trial ``i`` of a run with base seed ``s`` draws its sites from the Philox
stream keyed by ``philox_key(s, i)`` (see :mod:`perclab.lattice`), so every
estimate depends only on ``(n, p, trials, rule, seed)`` and not on how the
trials are split over threads.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import _kernels as K
from .analytic import LAMBDA
from .dynamics import STANDARD, UpdateRule, _as_rule, crosses_left_right, internally_spans, spans_with_helper
from .lattice import SEED_RULE_ID, Rectangle, philox_key, sample_configuration, site_uniforms

SCHEMA_VERSION = 1
CSV_COLUMNS = ["n", "rule", "p_hat", "se", "ci_lo", "ci_hi", "trials_total", "seed", "delta", "schema_version"]


def _version() -> str:
    from . import __version__
    return __version__


@dataclass
class ExperimentConfig:
    rule: str = "standard"
    n: Sequence[int] = (64,)
    p: Sequence[float] = ()
    trials: int = 10_000
    seed: int = 0
    confidence: float = 0.95
    tol: float = 1e-3
    max_rounds: int = 20
    max_trials: int = 1_000_000
    threads: int = 1

    def __post_init__(self):
        self.n = tuple(int(v) for v in np.atleast_1d(self.n))
        self.p = tuple(float(v) for v in np.atleast_1d(self.p)) if len(np.atleast_1d(self.p)) else ()
        _as_rule(self.rule)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(v < 2 for v in self.n):
            raise ValueError("n must be >= 2")
        if any(not 0 < v < 1 for v in self.p):
            raise ValueError("grid values of p must lie in (0, 1)")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass
class ResultRecord:
    """One estimate with its provenance.

    ``p_hat`` is the estimated probability (``kind`` "probability" or
    "event") or the estimated critical probability (``kind`` "pc").
    ``wall_time`` is kept out of serialised output unless asked for, so
    repeated runs write identical bytes.
    """

    kind: str
    n: Optional[int]
    rule: str
    p_hat: float
    se: float
    ci_lo: float
    ci_hi: float
    trials_total: int
    seed: int
    delta: Optional[float] = None
    schema_version: int = SCHEMA_VERSION
    config: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    seed_rule: str = SEED_RULE_ID
    version: str = field(default_factory=_version)
    wall_time: float = 0.0

    def __post_init__(self):
        if not self.ci_lo <= self.p_hat <= self.ci_hi:
            raise ValueError(f"estimate {self.p_hat} outside its interval [{self.ci_lo}, {self.ci_hi}]")
        if self.se < 0:
            raise ValueError("negative standard error")

    def to_dict(self, timing: bool = False) -> dict:
        d = asdict(self)
        if not timing:
            d.pop("wall_time")
        return d


# -- intervals -------------------------------------------------------------------

def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2))
    phat = k / n
    den = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / den
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


def _proportion_record(kind, n, rule, k, trials, seed, conf, config, t0, **kw) -> ResultRecord:
    phat = k / trials
    lo, hi = wilson_interval(k, trials, conf)
    return ResultRecord(kind, n, str(rule), phat, math.sqrt(phat * (1 - phat) / trials),
                        min(lo, phat), max(hi, phat), trials, seed, config=config,
                        wall_time=time.perf_counter() - t0, **kw)


# -- trial engine ------------------------------------------------------------------

def _chunks(trials: int, threads: int, start: int = 0):
    size = max(1, math.ceil((trials - start) / max(1, threads)))
    return [(a, min(a + size, trials)) for a in range(start, trials, size)]


def _parallel(fn, trials: int, threads: int, start: int = 0) -> np.ndarray:
    parts = _chunks(trials, threads, start)
    if threads <= 1 or len(parts) == 1:
        out = [fn(a, b) for a, b in parts]
    else:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(lambda ab: fn(*ab), parts))
    return np.concatenate(out) if out else np.zeros(0)


def percolation_indicators(n: int, p: float, trials: int, rule=STANDARD, seed: int = 0,
                           threads: int = 1) -> np.ndarray:
    """Per-trial percolation outcomes on ``[n]^2`` by direct closure."""
    rule = _as_rule(rule)

    def run(a, b):
        out = np.zeros(b - a, dtype=bool)
        for i in range(a, b):
            grid = (site_uniforms((n, n), philox_key(seed, i)) < p).astype(np.uint8)
            out[i - a] = K.closure_inplace(grid, rule.code, rule.k) == n * n
        return out

    return _parallel(run, trials, threads).astype(bool)


def mc_percolation_probability(n: int, p: float, trials: int, rule=STANDARD, seed: int = 0,
                               threads: int = 1, confidence: float = 0.95) -> ResultRecord:
    """Fraction of ``trials`` Bernoulli(``p``) samples on ``[n]^2`` that percolate."""
    rule = _as_rule(rule)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if trials < 1 or n < 1:
        raise ValueError("need n >= 1 and trials >= 1")
    t0 = time.perf_counter()
    k = int(percolation_indicators(n, p, trials, rule, seed, threads).sum())
    cfg = {"n": n, "p": p, "trials": trials, "rule": str(rule), "seed": seed, "confidence": confidence}
    return _proportion_record("probability", n, rule, k, trials, seed, confidence, cfg, t0)


class ThresholdBank:
    """Per-trial critical draws on ``[n]^2``, computed lazily and kept in trial order.

    Trial ``i`` percolates at ``p`` iff ``thresholds[i] < p``; this is the
    same outcome :func:`percolation_indicators` gives for the same seed, so
    every probability estimate at every ``p`` reuses the same samples.
    """

    def __init__(self, n: int, rule=STANDARD, seed: int = 0, threads: int = 1):
        self.n, self.rule, self.seed, self.threads = n, _as_rule(rule), seed, threads
        self.values = np.zeros(0)

    def _compute(self, a: int, b: int) -> np.ndarray:
        out = np.empty(b - a)
        for i in range(a, b):
            u = site_uniforms((self.n, self.n), philox_key(self.seed, i))
            out[i - a] = K.percolation_threshold(u, self.rule.code, self.rule.k)
        return out

    def ensure(self, trials: int) -> np.ndarray:
        have = len(self.values)
        if trials > have:
            extra = _parallel(self._compute, trials, self.threads, start=have)
            self.values = np.concatenate([self.values, extra])
        return self.values[:trials]

    def count_below(self, p: float, trials: int) -> int:
        return int(np.count_nonzero(self.ensure(trials) < p))


def _median_interval(values: np.ndarray, confidence: float) -> tuple[float, float, float]:
    """Distribution-free order-statistic interval for the median, and its implied SE."""
    v = np.sort(values)
    m = len(v)
    z = stats.norm.ppf(0.5 + confidence / 2)
    lo = int(max(0, math.floor(m / 2 - z * math.sqrt(m) / 2)))
    hi = int(min(m - 1, math.ceil(m / 2 + z * math.sqrt(m) / 2)))
    return float(v[lo]), float(v[hi]), float((v[hi] - v[lo]) / (2 * z))


def estimate_pc(n: int, rule=STANDARD, trials_per_round: int = 10_000, tol: float = 1e-3,
                seed: int = 0, confidence: float = 0.95, max_rounds: int = 20,
                max_trials: int = 1_000_000, threads: int = 1,
                bank: Optional[ThresholdBank] = None) -> ResultRecord:
    """Stochastic bisection for the ``p`` at which percolation has probability 1/2.

    Each round tests the midpoint of ``[lo, hi]``: if the Wilson interval of
    the percolation frequency excludes 1/2 the bracket is halved, otherwise
    the trial count is doubled (up to ``max_trials``).  All rounds reuse the
    same trials.  Exhausting the trial budget or ``max_rounds`` before the
    bracket is narrower than ``tol`` sets a flag.  The reported interval is
    the union of the final bracket and the order-statistic interval of the
    per-trial critical draws, whose half-width also gives the SE.
    """
    rule = _as_rule(rule)
    if tol <= 0:
        raise ValueError("tol must be positive")
    t0 = time.perf_counter()
    bank = bank or ThresholdBank(n, rule, seed, threads)
    lo, hi, trials, flags, rounds = 0.0, 1.0, int(trials_per_round), [], 0
    while hi - lo > tol:
        if rounds == max_rounds:
            flags.append("max_rounds")
            break
        mid = 0.5 * (lo + hi)
        k = bank.count_below(mid, trials)
        a, b = wilson_interval(k, trials, confidence)
        if b < 0.5:
            lo = mid
        elif a > 0.5:
            hi = mid
        elif 2 * trials <= max_trials:
            trials *= 2
            continue
        else:
            flags.append("trial_budget")
            break
        rounds += 1
    values = bank.ensure(trials)
    m_lo, m_hi, se = _median_interval(values, confidence)
    est = 0.5 * (lo + hi)
    ci_lo, ci_hi = min(lo, m_lo, est), max(hi, m_hi, est)
    cfg = {"n": n, "rule": str(rule), "trials_per_round": trials_per_round, "tol": tol, "seed": seed,
           "confidence": confidence, "max_rounds": max_rounds, "max_trials": max_trials,
           "bracket": [lo, hi], "rounds": rounds}
    return ResultRecord("pc", n, str(rule), est, se, ci_lo, ci_hi, trials, seed, config=cfg,
                        flags=flags, wall_time=time.perf_counter() - t0)


# -- second-term diagnostics -------------------------------------------------------------

@dataclass
class SweepResult:
    records: list[ResultRecord]
    exponent: float                 # gamma in  Delta ~ (log n)^(-gamma)
    exponent_se: float
    residuals: dict                 # fixed-exponent RSS: {1.2: ..., 1.5: ...}
    note: str

    def table(self) -> list[dict]:
        return [{c: r.to_dict()[c] for c in CSV_COLUMNS} for r in self.records]


SWEEP_NOTE = ("Delta(n) = pi^2/(18 log n) - p_hat(n). The fitted exponent describes desk-scale n only; "
              "the asymptotic exponent 3/2 is not expected to be recovered here.")


def sweep_second_term(n_list: Sequence[int], rule=STANDARD, config: Optional[ExperimentConfig] = None,
                      ) -> SweepResult:
    """``p_hat(n)`` and ``Delta(n)`` for each ``n``, with a power fit of ``Delta`` in ``log n``."""
    n_list = [int(v) for v in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    config = config or ExperimentConfig(rule=str(rule), n=n_list)
    records = []
    for n in n_list:
        r = estimate_pc(n, rule, config.trials, config.tol, config.seed, config.confidence,
                        config.max_rounds, config.max_trials, config.threads)
        r.delta = LAMBDA / math.log(n) - r.p_hat
        records.append(r)
    deltas = np.array([r.delta for r in records])
    x = np.log(np.log(np.array(n_list, dtype=float)))
    exponent = exponent_se = float("nan")
    residuals = {}
    if len(n_list) >= 2 and np.all(deltas > 0):
        y = np.log(deltas)
        if len(n_list) >= 3:
            fit = stats.linregress(x, y)
            exponent, exponent_se = -float(fit.slope), float(fit.stderr)
        else:
            exponent = -float((y[1] - y[0]) / (x[1] - x[0]))
        for gamma in (1.2, 1.5):
            c = float(np.mean(y + gamma * x))
            residuals[gamma] = float(np.sum((y - (c - gamma * x)) ** 2))
    return SweepResult(records, exponent, exponent_se, residuals, SWEEP_NOTE)


# -- single events ------------------------------------------------------------------

def mc_event_probability(event: str, geometry, p: float, trials: int, seed: int = 0,
                         rule=STANDARD, confidence: float = 0.95, threads: int = 1) -> ResultRecord:
    """Monte Carlo frequency of ``I(S)``, ``D(S, R)`` or a left-right crossing.

    ``geometry`` is ``S`` for ``"I"``, ``(S, R)`` for ``"D"`` and ``R`` for
    ``"crossing"`` (standard rule only).
    """
    rule = _as_rule(rule)
    if event == "I":
        box = geometry
        test = lambda A: internally_spans(A, box, rule)
    elif event == "D":
        S, box = geometry
        if not box.contains(S):
            raise ValueError(f"{S} is not contained in {box}")
        test = lambda A: spans_with_helper(A, S, box, rule)
    elif event == "crossing":
        box = geometry
        test = lambda A: crosses_left_right(A, box)
    else:
        raise ValueError(f"unknown event {event!r}")
    if not isinstance(box, Rectangle):
        raise ValueError("geometry must be built from Rectangles")
    t0 = time.perf_counter()

    def run(a, b):
        return np.array([test(sample_configuration(box, p, seed, i)) for i in range(a, b)], dtype=bool)

    k = int(_parallel(run, trials, threads).sum())
    geo = [str(g) for g in geometry] if isinstance(geometry, tuple) else str(geometry)
    cfg = {"event": event, "geometry": geo, "p": p, "trials": trials, "seed": seed, "rule": str(rule)}
    return _proportion_record("event", None, rule, k, trials, seed, confidence, cfg, t0)


# -- output ------------------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def records_to_csv(records: Sequence[ResultRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        d = r.to_dict()
        w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def records_to_jsonl(records: Sequence[ResultRecord], timing: bool = False) -> str:
    return "".join(json.dumps(r.to_dict(timing), sort_keys=True) + "\n" for r in records)


def write_records(records: Sequence[ResultRecord], path, fmt: str = "jsonl", timing: bool = False):
    text = records_to_csv(records) if fmt == "csv" else records_to_jsonl(records, timing)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return text
