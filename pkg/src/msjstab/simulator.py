"""
msjstab.simulator

Discrete-event simulation of the two-class FCFS multiserver-job system, in
saturated mode (an inexhaustible queue whose classes are sampled only when
the head job matters) or open mode (Poisson arrivals at rate lambda).

FcfsSystem yields one Snapshot per event; BatchCollector integrates the
snapshots over time into post-warmup batches for batch-means estimates.
"""

from __future__ import annotations

import heapq
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np
import scipy.stats

from .config import parallel_map
from .errors import ConsistencyError, ParameterError
from .model import MsjParams, Verdict, enumerate_states, validate
from .stability import lambda_naive, lambda_star

log = logging.getLogger(__name__)

SATURATED = "saturated"
OPEN = "open"

DEFAULT_BATCHES = 20
WARMUP_FRACTION = 0.1
RANDOM_BLOCK = 1 << 16

ARRIVAL = 0
COMPLETION = 1


@dataclass(frozen=True)
class SimConfig:
    params: MsjParams
    mode: str = SATURATED
    lam: float | None = None
    seed: int = 0
    horizon: float = 1e5
    warmup: float | None = None      # default: WARMUP_FRACTION of the horizon
    batches: int = DEFAULT_BATCHES

    def __post_init__(self):
        validate(self.params)
        if self.mode not in (SATURATED, OPEN):
            raise ParameterError(f"mode must be {SATURATED!r} or {OPEN!r}, got {self.mode!r}")
        if self.mode == OPEN and not (self.lam is not None and self.lam > 0):
            raise ParameterError(f"open mode needs lambda > 0, got {self.lam!r}")
        if self.warmup is None:
            object.__setattr__(self, "warmup", WARMUP_FRACTION * self.horizon)
        if not self.horizon > self.warmup >= 0:
            raise ParameterError(f"need horizon > warmup >= 0, got horizon={self.horizon}, warmup={self.warmup}")
        if self.batches < 2:
            raise ParameterError(f"batch means needs at least 2 batches, got {self.batches}")


# ---------- random numbers ----------

class _RandomStream:
    """Block-buffered draws from a counter-based Philox generator; the seed fixes the run."""

    def __init__(self, seed: int, block: int = RANDOM_BLOCK):
        self._rng = np.random.Generator(np.random.Philox(seed))
        self._block = block
        self._exp = np.empty(0)
        self._ie = 0
        self._uni = np.empty(0)
        self._iu = 0

    def exponential(self, rate: float) -> float:
        if self._ie >= len(self._exp):
            self._exp = self._rng.standard_exponential(self._block)
            self._ie = 0
        x = self._exp[self._ie]
        self._ie += 1
        return float(x) / rate

    def uniform(self) -> float:
        if self._iu >= len(self._uni):
            self._uni = self._rng.random(self._block)
            self._iu = 0
        u = self._uni[self._iu]
        self._iu += 1
        return float(u)


# ---------- event loop ----------

class Snapshot(NamedTuple):
    time: float
    kind: int          # ARRIVAL or COMPLETION
    cls: int           # class of the arriving / completing job
    response: float    # response time of a completing job (open mode), else nan
    q: int             # non-blocking jobs waiting (0 in saturated mode)
    h: int
    a: int
    b: int
    idle: int


class FcfsSystem:
    """
    Iterate over the events of one run up to the horizon.

    After every completion (and arrival), the head of the queue is admitted
    while it fits. A class-2 head facing at least n1 but fewer than n2 free
    servers blocks the queue. In saturated mode the head's class is drawn only
    when at least n1 servers are free.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.params = config.params
        self._rs = _RandomStream(config.seed)
        self._events: list[tuple[float, int, int, int, float]] = []
        self._seq = 0
        self._queue: deque[tuple[float, int]] = deque()   # open mode: (arrival time, class)
        self._head: int | None = None                      # saturated mode: sampled head class
        self.a = 0
        self.b = 0
        self.now = 0.0
        self.count = 0

    def _draw_class(self) -> int:
        return 1 if self._rs.uniform() < self.params.p1 else 2

    def _push(self, t: float, kind: int, cls: int, arrived: float) -> None:
        heapq.heappush(self._events, (t, self._seq, kind, cls, arrived))
        self._seq += 1

    @property
    def idle(self) -> int:
        p = self.params
        return p.n - self.a * p.n1 - self.b * p.n2

    def queue_length(self) -> int:
        return len(self._queue)

    def _head_class(self) -> int | None:
        if self.config.mode == SATURATED:
            if self._head is None:
                self._head = self._draw_class()
            return self._head
        return self._queue[0][1] if self._queue else None

    def _admit(self) -> None:
        p = self.params
        while self.idle >= p.n1:
            cls = self._head_class()
            if cls is None:
                return
            if cls == 2 and self.idle < p.n2:
                return   # blocked
            if self.config.mode == SATURATED:
                self._head = None
                arrived = self.now
            else:
                arrived, _ = self._queue.popleft()
            if cls == 1:
                self.a += 1
                self._push(self.now + self._rs.exponential(p.mu1), COMPLETION, 1, arrived)
            else:
                self.b += 1
                self._push(self.now + self._rs.exponential(p.mu2), COMPLETION, 2, arrived)

    def blocking(self) -> int:
        if self.idle < self.params.n1:
            return 0
        if self.config.mode == SATURATED:
            waiting = self._head
        else:
            waiting = self._queue[0][1] if self._queue else None
        if waiting is None:
            return 0
        if waiting != 2 or self.idle >= self.params.n2:
            raise ConsistencyError(
                f"head class {waiting} left waiting with {self.idle} idle servers at t={self.now}")
        return 1

    def _snapshot(self, kind: int, cls: int, response: float) -> Snapshot:
        h = self.blocking()
        q = len(self._queue) - h if self.config.mode == OPEN else 0
        return Snapshot(self.now, kind, cls, response, q, h, self.a, self.b, self.idle)

    def start(self) -> Snapshot:
        """Schedule the first arrival (open) or fill the servers (saturated); the t=0 snapshot."""
        if self.config.mode == OPEN:
            self._push(self._rs.exponential(self.config.lam), ARRIVAL, 0, 0.0)
        else:
            self._admit()
        return self._snapshot(ARRIVAL, 0, math.nan)

    def __iter__(self) -> Iterator[Snapshot]:
        cfg = self.config
        while self._events:
            t, _, kind, cls, arrived = heapq.heappop(self._events)
            if t > cfg.horizon:
                return
            self.now = t
            self.count += 1
            response = math.nan
            if kind == ARRIVAL:
                cls = self._draw_class()
                self._queue.append((t, cls))
                self._push(t + self._rs.exponential(cfg.lam), ARRIVAL, 0, 0.0)
            elif cls == 1:
                self.a -= 1
                response = t - arrived
            else:
                self.b -= 1
                response = t - arrived
            self._admit()
            yield self._snapshot(kind, cls, response)


# ---------- statistics ----------

@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    batches: int = 0

    @classmethod
    def from_batches(cls, values: Sequence[float]) -> "Estimate":
        v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
        if v.size == 0:
            return cls(math.nan, math.nan)
        if v.size == 1:
            return cls(float(v[0]), math.nan, 1)
        return cls(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), int(v.size))

    def interval(self, level: float = 0.95) -> tuple[float, float]:
        """Student-t confidence interval over the batch means."""
        if self.batches < 2:
            return math.nan, math.nan
        half = float(scipy.stats.t.ppf(0.5 + level / 2, self.batches - 1)) * self.stderr
        return self.mean - half, self.mean + half


@dataclass(frozen=True)
class SimStats:
    mode: str
    throughput: Estimate
    mean_response_time: Estimate | None
    mean_queue_length: Estimate | None
    mean_in_system: Estimate | None
    time_avg_wastage_saturated: Estimate | None
    time_avg_wastage_conditional: Estimate | None
    completions_by_class: tuple[int, int]
    blocked_fraction: float
    state_time: dict[tuple[int, int, int], float] = field(repr=False)
    n_in_system_trace: tuple[int, ...] = field(repr=False)
    final_queue_length: int = 0
    events: int = 0

    def as_dict(self) -> dict:
        def est(e: Estimate | None):
            return None if e is None else {"mean": e.mean, "stderr": e.stderr, "ci95": list(e.interval())}
        return {
            "mode": self.mode,
            "throughput": est(self.throughput),
            "mean_response_time": est(self.mean_response_time),
            "mean_queue_length": est(self.mean_queue_length),
            "mean_in_system": est(self.mean_in_system),
            "time_avg_wastage_saturated": est(self.time_avg_wastage_saturated),
            "time_avg_wastage_conditional": est(self.time_avg_wastage_conditional),
            "completions_by_class": list(self.completions_by_class),
            "blocked_fraction": self.blocked_fraction,
            "state_time": {str(list(k)): v for k, v in sorted(self.state_time.items())},
            "final_queue_length": self.final_queue_length,
            "events": self.events,
        }


class BatchCollector:
    """Integrates piecewise-constant snapshots over equal-length post-warmup batches."""

    def __init__(self, config: SimConfig, first: Snapshot):
        self.config = config
        self.B = config.batches
        self.start = config.warmup
        self.length = (config.horizon - config.warmup) / self.B
        B = self.B
        self.area_q = np.zeros(B)
        self.area_sys = np.zeros(B)
        self.area_idle = np.zeros(B)
        self.area_idle_waiting = np.zeros(B)
        self.time_waiting = np.zeros(B)
        self.completions = np.zeros(B)
        self.resp_sum = np.zeros(B)
        self.resp_count = np.zeros(B)
        self.blocked_time = 0.0
        self.by_class = [0, 0]
        self.state_time: dict[tuple[int, int, int], float] = {}
        self.trace: list[int] = []
        self._k = -1                 # -1 while in warmup
        self._boundary = self.start
        self._prev = first

    def _n_in_system(self, s: Snapshot) -> int:
        return s.q + s.h + s.a + s.b

    def _integrate(self, t1: float) -> None:
        s = self._prev
        t0 = s.time
        saturated = self.config.mode == SATURATED
        while t0 < t1:
            if t1 >= self._boundary and self._k < self.B:
                seg_end = self._boundary
            else:
                seg_end = t1
            dt = seg_end - t0
            if self._k >= 0 and dt > 0:
                k = self._k
                self.area_q[k] += dt * (s.q + s.h)
                self.area_sys[k] += dt * self._n_in_system(s)
                self.area_idle[k] += dt * s.idle
                waiting = saturated or s.q + s.h > 0
                if waiting:
                    self.area_idle_waiting[k] += dt * s.idle
                    self.time_waiting[k] += dt
                if s.h:
                    self.blocked_time += dt
                key = (s.h, s.a, s.b)
                self.state_time[key] = self.state_time.get(key, 0.0) + dt
            t0 = seg_end
            if seg_end == self._boundary and self._k < self.B:
                self.trace.append(self._n_in_system(s))
                self._k += 1
                self._boundary = self.start + (self._k + 1) * self.length
                if self._k == self.B - 1:
                    self._boundary = self.config.horizon
            if self._k >= self.B:
                break

    def add(self, snap: Snapshot) -> None:
        self._integrate(snap.time)
        self._prev = snap
        if snap.kind == COMPLETION and 0 <= self._k < self.B:
            k = self._k
            self.completions[k] += 1
            self.by_class[snap.cls - 1] += 1
            if math.isfinite(snap.response):
                self.resp_sum[k] += snap.response
                self.resp_count[k] += 1

    def finish(self, system: FcfsSystem) -> SimStats:
        cfg = self.config
        self._integrate(cfg.horizon)
        L = self.length
        saturated = cfg.mode == SATURATED
        with np.errstate(invalid="ignore", divide="ignore"):
            resp = self.resp_sum / self.resp_count
            cond = self.area_idle_waiting / self.time_waiting
        total = sum(self.state_time.values())
        return SimStats(
            mode=cfg.mode,
            throughput=Estimate.from_batches(self.completions / L),
            mean_response_time=None if saturated else Estimate.from_batches(resp),
            mean_queue_length=None if saturated else Estimate.from_batches(self.area_q / L),
            mean_in_system=None if saturated else Estimate.from_batches(self.area_sys / L),
            time_avg_wastage_saturated=Estimate.from_batches(self.area_idle / L) if saturated else None,
            time_avg_wastage_conditional=None if saturated else Estimate.from_batches(cond),
            completions_by_class=(self.by_class[0], self.by_class[1]),
            blocked_fraction=self.blocked_time / total if total > 0 else 0.0,
            state_time={k: v / total for k, v in self.state_time.items()} if total > 0 else {},
            n_in_system_trace=tuple(self.trace),
            final_queue_length=system.queue_length(),
            events=system.count,
        )


def simulate(config: SimConfig) -> SimStats:
    """Run one simulation; deterministic given the config (seed included)."""
    system = FcfsSystem(config)
    collector = BatchCollector(config, system.start())
    for snap in system:
        collector.add(snap)
    stats = collector.finish(system)

    if config.mode == SATURATED:
        known = enumerate_states(config.params).index_of
        off = [s for s in stats.state_time if s not in known]
        if off:
            raise ConsistencyError(f"saturated run visited states outside the state space: {off}")
    log.info("simulated %s run seed=%d: %d events, throughput %.6g",
             config.mode, config.seed, stats.events, stats.throughput.mean)
    return stats


def simulate_many(configs: Sequence[SimConfig], workers: int | None = None) -> list[SimStats]:
    return parallel_map(simulate, configs, workers)


# ---------- stability from simulation ----------

def drift(stats: SimStats, config: SimConfig) -> float:
    """Growth rate of the number in system over the second half of the measured window."""
    trace = stats.n_in_system_trace
    if len(trace) < 3:
        raise ParameterError("need at least 2 batches of trace to estimate drift")
    mid = len(trace) // 2
    span = (len(trace) - 1 - mid) * (config.horizon - config.warmup) / config.batches
    return (trace[-1] - trace[mid]) / span


def empirical_verdict(params: MsjParams, lam: float, tolerance: float,
                      events: int, seed: int) -> Verdict:
    """UNSTABLE when the number in system grows faster than tolerance*lam/2 per unit time,
    STABLE when it grows slower than a quarter of that, BOUNDARY in between."""
    cfg = SimConfig(params, OPEN, lam=lam, seed=seed, horizon=events / lam)
    d = drift(simulate(cfg), cfg)
    threshold = tolerance * lam / 2
    log.debug("lambda=%.6g drift=%.6g threshold=%.6g", lam, d, threshold)
    if d > threshold:
        return Verdict.UNSTABLE
    if d < threshold / 4:
        return Verdict.STABLE
    return Verdict.BOUNDARY


def estimate_lambda_star_empirical(params: MsjParams, tolerance: float = 0.05,
                                   events: int = 200_000, seed: int = 0,
                                   max_steps: int = 20) -> tuple[float, float]:
    """Bisect lambda between simulated stable and unstable verdicts.

    Stops early on an inconclusive verdict. The returned interval is the
    final bracket widened by tolerance on each side to absorb verdicts that
    land within the noise of lambda*.
    """
    validate(params)
    lo, hi = 0.0, lambda_naive(params) * (1 + tolerance)
    for _ in range(8):
        v = empirical_verdict(params, hi, tolerance, events, seed)
        if v is Verdict.UNSTABLE:
            break
        if v is Verdict.STABLE:
            lo = hi
        hi *= 1.5
        log.info("upper bracket not unstable, widening to %.6g", hi)

    step = 0
    while hi - lo > tolerance * hi and step < max_steps:
        step += 1
        mid = 0.5 * (lo + hi)
        v = empirical_verdict(params, mid, tolerance, events, seed + step)
        if v is Verdict.UNSTABLE:
            hi = mid
        elif v is Verdict.STABLE:
            lo = mid
        else:
            log.info("inconclusive at lambda=%.6g, stopping with [%.6g, %.6g]", mid, lo, hi)
            break
    return max(0.0, lo * (1 - tolerance)), hi * (1 + tolerance)


@dataclass(frozen=True)
class ResponseRow:
    fraction: float
    lam: float
    mean_response_time: float
    stderr: float
    mean_queue_length: float


def response_time_curve(params: MsjParams, fractions: Sequence[float], events: int = 200_000,
                        seed: int = 0, batches: int = DEFAULT_BATCHES,
                        workers: int | None = None) -> list[ResponseRow]:
    """Simulated E[T] at lambda = fraction * lambda* for each fraction in (0, 1)."""
    x = lambda_star(params)
    for f in fractions:
        if not 0 < f < 1:
            raise ParameterError(f"load fractions must lie in (0, 1), got {f}")
    configs = [SimConfig(params, OPEN, lam=f * x, seed=seed + i,
                         horizon=events / (f * x), batches=batches)
               for i, f in enumerate(fractions)]
    rows = []
    for f, cfg, st in zip(fractions, configs, simulate_many(configs, workers)):
        rows.append(ResponseRow(fraction=float(f), lam=cfg.lam,
                                mean_response_time=st.mean_response_time.mean,
                                stderr=st.mean_response_time.stderr,
                                mean_queue_length=st.mean_queue_length.mean))
    return rows
