"""
msjstab.phases

Single-service-rate multiserver-job model: each job needs k servers with
probability p_k and an Exp(mu) time. The saturated state is the phase vector
of the n oldest jobs' demands; sigma(m) of them are in service under strict
FCFS (service stops at the first job that does not fit). The embedded chain
has product form pi_m = prod p_{m_j}, so X = mu / E[1 / sigma(m)].
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import BOUNDARY_TOL, parallel_map
from .errors import EnumerationTooLarge, ParameterError
from .model import MsjParams, Verdict, validate

log = logging.getLogger(__name__)

ENUMERATION_LIMIT = 10**7
BALANCE_LIMIT = 10**4


@dataclass(frozen=True)
class RmParams:
    n: int
    mu: float
    demands: tuple[tuple[int, float], ...]   # (k, p_k), p_k > 0, sorted by k

    @classmethod
    def create(cls, n: int, mu: float, class_probs: Mapping[int, float] | Sequence[float]) -> "RmParams":
        """class_probs maps k -> p_k; a plain sequence is read as p_1, p_2, ..."""
        if not isinstance(class_probs, Mapping):
            class_probs = {k: p for k, p in enumerate(class_probs, start=1)}
        if not isinstance(n, int) or n < 1:
            raise ParameterError(f"n must be a positive integer, got {n!r}")
        if not (math.isfinite(mu) and mu > 0):
            raise ParameterError(f"mu must be a positive finite rate, got {mu!r}")
        for k, p in class_probs.items():
            if p < 0:
                raise ParameterError(f"p_{k} must be >= 0, got {p}")
            if p > 0 and not 1 <= k <= n:
                raise ParameterError(f"demand k={k} must lie in [1, {n}]")
        total = math.fsum(class_probs.values())
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"class probabilities must sum to 1, got {total!r}")
        demands = tuple(sorted((int(k), float(p)) for k, p in class_probs.items() if p > 0))
        return cls(n=n, mu=float(mu), demands=demands)

    @property
    def K(self) -> int:
        return len(self.demands)


@dataclass(frozen=True)
class PhaseVector:
    m: tuple[int, ...]
    sigma: int

    @classmethod
    def of(cls, m: Sequence[int], n: int) -> "PhaseVector":
        return cls(m=tuple(m), sigma=sigma(m, n))


def sigma(m: Sequence[int], n: int) -> int:
    """Jobs in service: longest prefix of m whose demands fit in n servers."""
    if m and m[0] > n:
        raise ParameterError(f"head job needs {m[0]} > {n} servers and can never run")
    used = 0
    for count, k in enumerate(m):
        if k < 1:
            raise ParameterError(f"server demands must be >= 1, got {k}")
        used += k
        if used > n:
            return count
    return len(m)


def _guard(params: RmParams, limit: int) -> int:
    size = params.K ** params.n
    if size > limit:
        raise EnumerationTooLarge(
            f"{params.K}^{params.n} = {size} phase vectors exceeds {limit}; use rm_throughput_dp")
    return size


def _partial_inverse_sigma(params: RmParams, first: tuple[int, float]) -> float:
    k0, p0 = first
    terms = []
    for rest in itertools.product(params.demands, repeat=params.n - 1):
        prob = p0
        for _, p in rest:
            prob *= p
        terms.append(prob / sigma((k0, *(k for k, _ in rest)), params.n))
    return math.fsum(terms)


def rm_throughput_enumerate(params: RmParams, limit: int = ENUMERATION_LIMIT,
                            workers: int | None = None) -> float:
    """X = (sum_m prod p_{m_j} / (mu sigma(m)))^-1 by exhaustive enumeration."""
    _guard(params, limit)
    partial = parallel_map(lambda d: _partial_inverse_sigma(params, d), params.demands, workers)
    return params.mu / math.fsum(partial)


def mean_inverse_sigma(params: RmParams) -> float:
    """E[1/sigma(m)] over i.i.d. demands, by dynamic programming over prefix sums."""
    n = params.n
    dist = np.zeros(n + 1)      # mass of unstopped prefixes by servers used
    dist[0] = 1.0
    acc = []
    for placed in range(n):
        nxt = np.zeros(n + 1)
        for k, p in params.demands:
            nxt[k:] += p * dist[: n + 1 - k]
            # prefixes that overflow stop with sigma = placed
            overflow = dist[n + 1 - k:].sum()
            if overflow > 0:
                acc.append(p * overflow / placed)
        dist = nxt
    acc.append(dist.sum() / n)
    return math.fsum(acc)


def rm_throughput_dp(params: RmParams) -> float:
    return params.mu / mean_inverse_sigma(params)


def rm_is_stable(params: RmParams, lam: float) -> Verdict:
    """Stable iff (lam/mu) E[1/sigma] < 1, i.e. lam < X; equality is undetermined."""
    if lam < 0:
        raise ParameterError(f"arrival rate must be >= 0, got {lam}")
    x = rm_throughput_dp(params)
    if abs(lam - x) <= BOUNDARY_TOL * max(1.0, x):
        return Verdict.BOUNDARY
    return Verdict.STABLE if lam < x else Verdict.UNSTABLE


def rm_from_two_class(params: MsjParams) -> RmParams:
    validate(params)
    if params.mu1 != params.mu2:
        raise ParameterError(f"single-rate model needs mu1 == mu2, got {params.mu1} and {params.mu2}")
    return RmParams.create(params.n, params.mu1, {params.n1: params.p1, params.n2: params.p2})


# ---------- embedded chain over phase vectors ----------

def phase_vectors(params: RmParams, limit: int = BALANCE_LIMIT) -> list[tuple[int, ...]]:
    _guard(params, limit)
    ks = [k for k, _ in params.demands]
    return list(itertools.product(ks, repeat=params.n))


def stationary_weight(m: Sequence[int], params: RmParams) -> float:
    probs = dict(params.demands)
    return math.prod(probs[k] for k in m)


def rm_transition_matrix(params: RmParams, limit: int = BALANCE_LIMIT) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Embedded chain: a uniformly chosen served job departs, a class-k job joins the tail w.p. p_k."""
    states = phase_vectors(params, limit)
    index = {m: i for i, m in enumerate(states)}
    P = np.zeros((len(states), len(states)))
    for i, m in enumerate(states):
        s = sigma(m, params.n)
        for pos in range(s):
            rest = m[:pos] + m[pos + 1:]
            for k, p in params.demands:
                P[i, index[rest + (k,)]] += p / s
    return states, P


def rm_verify_balance(params: RmParams, limit: int = BALANCE_LIMIT) -> float:
    """Max residual of pi_m = sum_m' pi_m' P(m', m) under the product form.

    Predecessors of m via a class-k departure are m^k(i): k inserted at
    position i of (m_1..m_{n-1}) for i up to sigma(m^k(1)); each insertion
    position counts once even when two insertions give the same vector.
    """
    n = params.n
    worst = 0.0
    for m in phase_vectors(params, limit):
        pi_m = stationary_weight(m, params)
        head, tail_k = m[:-1], m[-1]
        p_tail = dict(params.demands)[tail_k]
        inflow = []
        for k, _ in params.demands:
            s1 = sigma((k, *head), n)
            for pos in range(s1):
                pred = head[:pos] + (k,) + head[pos:]
                inflow.append(stationary_weight(pred, params) * p_tail / sigma(pred, n))
        worst = max(worst, abs(pi_m - math.fsum(inflow)))
    log.debug("phase-vector balance residual %g over %d states", worst, params.K ** n)
    return worst


def served_count_distribution(params: RmParams, limit: int = BALANCE_LIMIT) -> dict[int, float]:
    """P(sigma = s) under the embedded steady state, by enumeration."""
    out: dict[int, list[float]] = defaultdict(list)
    for m in phase_vectors(params, limit):
        out[sigma(m, params.n)].append(stationary_weight(m, params))
    return {s: math.fsum(v) for s, v in sorted(out.items())}
