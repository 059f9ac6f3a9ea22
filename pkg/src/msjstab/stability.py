"""
msjstab.stability

Stability threshold lambda* (= saturated throughput), the naive bound
n/E[S], limiting wastage and utilization, and the parameter sweeps over class
mix, service-rate ratio and server count.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence, TypeVar

import numpy as np

from .config import BOUNDARY_TOL, parallel_map
from .errors import ConsistencyError, ParameterError
from .model import MsjParams, Verdict, class_probs, mean_server_seconds, validate
from .saturated import ctmc_steady_state, idle_servers

log = logging.getLogger(__name__)

WASTAGE_TOL = 1e-9

DEFAULT_MIX_POINTS = 512
DEFAULT_RATIO_POINTS = 400
DEFAULT_RATIO_RANGE = (1e-3, 1e3)

T = TypeVar("T")


@dataclass(frozen=True)
class StabilityReport:
    lambda_star: float
    lambda_naive: float
    mean_server_seconds: float
    limiting_wastage: float
    utilization: float
    params: MsjParams
    class2_work_share: float

    @property
    def busy_servers(self) -> float:
        return self.params.n - self.limiting_wastage

    @property
    def throughput_by_class(self) -> tuple[float, float]:
        p1, p2 = class_probs(self.params)
        return p1 * self.lambda_star, p2 * self.lambda_star

    def as_dict(self) -> dict:
        d = asdict(self)
        d["params"] = self.params.as_dict()
        d["busy_servers"] = self.busy_servers
        d["lambda1_star"], d["lambda2_star"] = self.throughput_by_class
        return d


def lambda_star(params: MsjParams) -> float:
    """Stable iff lambda < lambda*; lambda* is the saturated throughput X."""
    return ctmc_steady_state(params)[1]


def lambda_naive(params: MsjParams) -> float:
    """n / E[S]: the threshold if servers could always be packed perfectly."""
    validate(params)
    return params.n / mean_server_seconds(params)


def report(params: MsjParams) -> StabilityReport:
    validate(params)
    p, X = ctmc_steady_state(params)
    ES = mean_server_seconds(params)
    naive = params.n / ES
    wastage = float(p.probs @ idle_servers(params, p.space))
    via_gap = (naive - X) * ES
    if abs(wastage - via_gap) > WASTAGE_TOL:
        raise ConsistencyError(
            f"wastage {wastage!r} disagrees with (lambda_naive - lambda*) E[S] = {via_gap!r}")
    return StabilityReport(
        lambda_star=X,
        lambda_naive=naive,
        mean_server_seconds=ES,
        limiting_wastage=wastage,
        utilization=1.0 - wastage / params.n,
        params=params,
        class2_work_share=params.p2 * params.n2 / params.mu2 / ES,
    )


def classify(params: MsjParams, lam: float) -> Verdict:
    if lam < 0:
        raise ParameterError(f"arrival rate must be >= 0, got {lam}")
    x = lambda_star(params)
    if abs(lam - x) <= BOUNDARY_TOL * max(1.0, x):
        return Verdict.BOUNDARY
    return Verdict.STABLE if lam < x else Verdict.UNSTABLE


# ---------- grids ----------

def grid(lo: float, hi: float, scale: str, count: int) -> np.ndarray:
    if count < 1:
        raise ParameterError(f"grid needs at least one point, got {count}")
    if scale == "lin":
        return np.linspace(lo, hi, count)
    if scale == "log":
        if lo <= 0 or hi <= 0:
            raise ParameterError(f"log grid bounds must be positive, got {lo}:{hi}")
        return np.geomspace(lo, hi, count)
    raise ParameterError(f"grid scale must be 'lin' or 'log', got {scale!r}")


def default_ratio_grid() -> np.ndarray:
    return grid(*DEFAULT_RATIO_RANGE, "log", DEFAULT_RATIO_POINTS)


def default_mix_grid() -> np.ndarray:
    return grid(0.0, 1.0, "lin", DEFAULT_MIX_POINTS)


# ---------- sweeps ----------

@dataclass(frozen=True)
class MixRow:
    p2: float
    lambda1_star: float
    lambda2_star: float
    wastage: float
    utilization: float
    naive_lambda1: float
    naive_lambda2: float


@dataclass(frozen=True)
class RatioRow:
    ratio: float
    wastage: float


@dataclass(frozen=True)
class ServersRow:
    n: int
    lambda_star: float
    wastage: float
    utilization: float


def sweep_mix(params: MsjParams, p2_grid: Sequence[float] | None = None,
              workers: int | None = None) -> list[MixRow]:
    """One row per class mix; (naive_lambda1, naive_lambda2) traces the perfect-packing frontier."""
    p2_grid = default_mix_grid() if p2_grid is None else p2_grid
    for p2 in p2_grid:
        if not 0.0 <= p2 <= 1.0:
            raise ParameterError(f"p2 grid values must lie in [0, 1], got {p2}")

    def row(p2: float) -> MixRow:
        r = report(params.with_mix(1.0 - float(p2)))
        l1, l2 = r.throughput_by_class
        p1 = r.params.p1
        return MixRow(p2=float(p2), lambda1_star=l1, lambda2_star=l2,
                      wastage=r.limiting_wastage, utilization=r.utilization,
                      naive_lambda1=p1 * r.lambda_naive, naive_lambda2=(1.0 - p1) * r.lambda_naive)

    rows = parallel_map(row, p2_grid, workers)
    log.info("mix sweep: %d rows for n1=%d n2=%d n=%d", len(rows), params.n1, params.n2, params.n)
    return rows


def sweep_ratio(params: MsjParams, ratios: Sequence[float] | None = None,
                workers: int | None = None) -> list[RatioRow]:
    """Wastage against mu2/mu1 with mu1 fixed at 1; wastage depends on the ratio only."""
    ratios = default_ratio_grid() if ratios is None else ratios
    for r in ratios:
        if not r > 0:
            raise ParameterError(f"service rate ratios must be > 0, got {r}")

    def row(r: float) -> RatioRow:
        return RatioRow(ratio=float(r), wastage=report(params.with_rates(1.0, float(r))).limiting_wastage)

    rows = parallel_map(row, ratios, workers)
    log.info("ratio sweep: %d rows for n1=%d n2=%d n=%d", len(rows), params.n1, params.n2, params.n)
    return rows


def sweep_servers(params: MsjParams, ns: Sequence[int], workers: int | None = None) -> list[ServersRow]:
    def row(n: int) -> ServersRow:
        r = report(params.with_servers(int(n)))
        return ServersRow(n=int(n), lambda_star=r.lambda_star,
                          wastage=r.limiting_wastage, utilization=r.utilization)

    return parallel_map(row, ns, workers)


# ---------- asymptotics and shape ----------

class Limit(enum.Enum):
    ZERO_RATIO = "zero-ratio"          # mu2/mu1 -> 0
    INFINITE_RATIO = "infinite-ratio"  # mu2/mu1 -> infinity


def asymptotic_wastage(params: MsjParams, limit: Limit) -> float:
    """Limiting wastage as mu2/mu1 -> 0 (exact: n mod n2) or -> infinity.

    The infinite-ratio value n2 - n1/p2 is an approximation that assumes
    n2 >> n1 (extra class-1 jobs beyond the minimum are roughly geometric).
    """
    validate(params)
    if limit is Limit.ZERO_RATIO:
        return float(params.n % params.n2)
    if params.p2 <= 0:
        raise ParameterError("infinite-ratio limit needs p2 > 0")
    return params.n2 - params.n1 / params.p2


def dominant_class1_count(params: MsjParams) -> int:
    """Fewest class-1 jobs that leave no room for a class-2 job: ceil((n - n2 + 1) / n1)."""
    return math.ceil((params.n - params.n2 + 1) / params.n1)


def local_maxima(values: Sequence[float]) -> list[int]:
    """Indices i with values[i-1] < values[i] > values[i+1]."""
    v = list(values)
    return [i for i in range(1, len(v) - 1) if v[i - 1] < v[i] > v[i + 1]]


def local_minima(values: Sequence[float]) -> list[int]:
    v = list(values)
    return [i for i in range(1, len(v) - 1) if v[i - 1] > v[i] < v[i + 1]]


def is_nondecreasing(values: Sequence[float], tol: float = 0.0) -> bool:
    return all(b >= a - tol for a, b in zip(values, values[1:]))


def peak(rows: Sequence[T], key: str) -> T:
    return max(rows, key=lambda r: getattr(r, key))
