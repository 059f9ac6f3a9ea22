"""
msjstab.saturated

The saturated system (an inexhaustible FCFS queue): product-form steady state
of the embedded chain sampled after each departure, its transition matrix,
the continuous-time steady state, throughput X and the expected number of
idle servers.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np
from scipy.special import logsumexp, xlogy

from . import oracle
from .errors import ConsistencyError
from .model import (
    MsjParams,
    SaturatedState,
    StateSpace,
    completion_fractions,
    completion_rate,
    enumerate_states,
    free_servers,
    s2,
    validate,
)

log = logging.getLogger(__name__)

EMBEDDED = "embedded"
CTMC = "ctmc"

BALANCE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Distribution:
    probs: np.ndarray
    kind: str
    space: StateSpace

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.shape != (len(self.space),):
            raise ConsistencyError(
                f"distribution has {probs.shape} entries for {len(self.space)} states")
        if np.any(probs < 0.0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ConsistencyError(f"not a probability vector (sum={probs.sum()!r})")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    def __getitem__(self, state: SaturatedState) -> float:
        return float(self.probs[self.space.index_of[tuple(state)]])

    def items(self) -> Iterator[tuple[SaturatedState, float]]:
        return zip(self.space.states, (float(p) for p in self.probs))


class Transition(NamedTuple):
    src: int
    dst: int
    case: str      # case label, "i" .. "viii"
    cls: int       # class of the completing job
    prob: float


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """P(s, s') with rows/cols in StateSpace order, split as P = P1 + P2 by completing class."""
    space: StateSpace
    P1: np.ndarray
    P2: np.ndarray
    transitions: tuple[Transition, ...] = ()

    @property
    def P(self) -> np.ndarray:
        return self.P1 + self.P2

    def support(self) -> set[tuple[int, int]]:
        return {(t.src, t.dst) for t in self.transitions}


# ---------- product form ----------

def log_weights(params: MsjParams, space: StateSpace | None = None) -> np.ndarray:
    """Unnormalised log pi over the state space; -inf where a class never arrives."""
    if space is None:
        space = enumerate_states(params)
    p1, p2 = params.p1, params.p2

    # cum1[a] = sum_{i<=a} log f1(s1(i)), cum2[b] = sum_{j<=b} log f2(s2(j))
    cum1 = np.zeros(params.a_max + 1)
    for i in range(1, params.a_max + 1):
        cum1[i] = cum1[i - 1] + np.log(completion_fractions(space[i], params)[0])
    cum2 = np.zeros(params.b_max + 1)
    for j in range(1, params.b_max + 1):
        cum2[j] = cum2[j - 1] + np.log(completion_fractions(s2(j, params), params)[1])

    out = np.empty(len(space))
    for idx, (h, a, b) in enumerate(space):
        out[idx] = xlogy(a, p1) + xlogy(b + h, p2) - cum1[a] - cum2[b]
    return out


def embedded_steady_state(params: MsjParams) -> Distribution:
    """pi of the embedded chain, from the product form evaluated in log space."""
    space = enumerate_states(params)
    lw = log_weights(params, space)
    probs = np.exp(lw - logsumexp(lw))
    return Distribution(probs / probs.sum(), EMBEDDED, space)


# ---------- transition matrix ----------

def transition_matrix(params: MsjParams) -> TransitionMatrix:
    """Embedded-chain transition matrix built from the eight transition cases.

    Non-blocking [0, a, b]:
      i    class-1 completion, class-1 enters           -> [0, a, b]       f1 p1
      ii   class-1 completion, class-2 next             -> s1(a-1)         f1 p2
      iii  class-2 completion, class-2 enters           -> [0, a, b]       f2 p2
      iv   class-2 completion, class-1 jobs fill up     -> s2(b-1)         f2 p1^J
      v    class-2 completion, j class-1 then blocked   -> [1, a+j, b-1]   f2 p1^j p2
    Blocking [1, a, b]:
      vi   class-1 completion                           -> s1(a-1)         f1
      vii  class-2 completion, class-1 jobs fill up     -> s2(b)           f2 p1^J
      viii class-2 completion, j class-1 then blocked   -> [1, a+j, b]     f2 p1^j p2
    """
    space = enumerate_states(params)
    p1, p2 = params.p1, params.p2
    N = len(space)
    trans: list[Transition] = []

    def blocked(a: int, b: int) -> int:
        if space[a] != SaturatedState(1, a, b):
            raise ConsistencyError(f"expected blocking state [1, {a}, {b}], found {space[a]}")
        return a

    for src, state in enumerate(space):
        h, a, b = state
        f1, f2 = completion_fractions(state, params)
        if h == 0:
            if a > 0:
                trans.append(Transition(src, src, "i", 1, f1 * p1))
                trans.append(Transition(src, a - 1, "ii", 1, f1 * p2))
            if b > 0:
                trans.append(Transition(src, src, "iii", 2, f2 * p2))
                top = s2(b - 1, params).a
                trans.append(Transition(src, top, "iv", 2, f2 * p1 ** (top - a)))
                for a2 in range(a + 1, top):
                    trans.append(Transition(src, blocked(a2, b - 1), "v", 2, f2 * p1 ** (a2 - a) * p2))
        else:
            if a > 0:
                trans.append(Transition(src, a - 1, "vi", 1, f1))
            if b > 0:
                top = s2(b, params).a
                trans.append(Transition(src, top, "vii", 2, f2 * p1 ** (top - a)))
                for a2 in range(a, top):
                    trans.append(Transition(src, blocked(a2, b), "viii", 2, f2 * p1 ** (a2 - a) * p2))

    P1 = np.zeros((N, N))
    P2 = np.zeros((N, N))
    for t in trans:
        (P1 if t.cls == 1 else P2)[t.src, t.dst] += t.prob

    rows = (P1 + P2).sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-12:
        raise ConsistencyError(f"transition matrix rows do not sum to 1 (worst {rows.min()!r})")
    return TransitionMatrix(space=space, P1=P1, P2=P2, transitions=tuple(trans))


def explore_transitions(params: MsjParams) -> TransitionMatrix:
    """Transition matrix by exhaustive branching over FCFS admissions.

    After each completion the blocking job (if any) is retried, then the head
    of the queue is sampled one job at a time while at least n1 servers are
    free. A class-2 head that does not fit stops admission and blocks.
    """
    space = enumerate_states(params)
    p1, p2 = params.p1, params.p2
    n1, n2 = params.n1, params.n2
    N = len(space)
    P1 = np.zeros((N, N))
    P2 = np.zeros((N, N))
    support: list[Transition] = []

    for src, state in enumerate(space):
        h, a, b = state
        f1, f2 = completion_fractions(state, params)
        for cls, f in ((1, f1), (2, f2)):
            if (a if cls == 1 else b) == 0:
                continue
            a0, b0 = (a - 1, b) if cls == 1 else (a, b - 1)
            free = free_servers(state, params) + (n1 if cls == 1 else n2)
            stack = []
            if h == 1 and free < n2:
                stack.append((f, a0, b0, free, True))   # still blocked, nothing else may enter
            elif h == 1:
                stack.append((f, a0, b0 + 1, free - n2, False))
            else:
                stack.append((f, a0, b0, free, False))
            while stack:
                prob, ca, cb, cfree, stuck = stack.pop()
                if stuck:
                    leaf = (1, ca, cb)
                elif cfree < n1:
                    leaf = (0, ca, cb)
                else:
                    stack.append((prob * p1, ca + 1, cb, cfree - n1, False))
                    if cfree >= n2:
                        stack.append((prob * p2, ca, cb + 1, cfree - n2, False))
                    else:
                        stack.append((prob * p2, ca, cb, cfree, True))
                    continue
                dst = space.index_of.get(leaf)
                if dst is None:
                    raise ConsistencyError(f"admission from {state} reached off-list state {list(leaf)}")
                (P1 if cls == 1 else P2)[src, dst] += prob
                support.append(Transition(src, dst, "explored", cls, prob))

    return TransitionMatrix(space=space, P1=P1, P2=P2, transitions=tuple(support))


def solve_dtmc_oracle(tm: TransitionMatrix, method: str = "solve") -> Distribution:
    """Steady state of an explicit matrix: dense solve (default), GTH, or power iteration."""
    P = tm.P
    if method == "solve":
        probs = oracle.solve_stationary(P)
    elif method == "gth":
        probs = oracle.solve_gth(P)
    elif method == "power":
        probs = oracle.power_iteration(P)
    else:
        raise ValueError(f"unknown oracle method {method!r}")
    return Distribution(probs / probs.sum(), EMBEDDED, tm.space)


# ---------- continuous time ----------

def completion_rates(params: MsjParams, space: StateSpace) -> np.ndarray:
    return np.array([completion_rate(s, params) for s in space])


def ctmc_steady_state(params: MsjParams) -> tuple[Distribution, float]:
    """(p, X): time-stationary distribution p_s = X pi_s / nu_s and throughput X."""
    pi = embedded_steady_state(params)
    nu = completion_rates(params, pi.space)
    mean_gap = float(np.sum(pi.probs / nu))   # mean time between departures
    X = 1.0 / mean_gap
    probs = X * pi.probs / nu
    return Distribution(probs / probs.sum(), CTMC, pi.space), X


def throughput(params: MsjParams) -> float:
    return ctmc_steady_state(params)[1]


def idle_servers(params: MsjParams, space: StateSpace) -> np.ndarray:
    return np.array([free_servers(s, params) for s in space], dtype=float)


def saturated_wastage(params: MsjParams) -> float:
    """Time-average number of idle servers in the saturated system."""
    p, _ = ctmc_steady_state(params)
    return float(p.probs @ idle_servers(params, p.space))


def mean_in_service(params: MsjParams) -> tuple[float, float]:
    p, _ = ctmc_steady_state(params)
    a = np.array([s.a for s in p.space], dtype=float)
    b = np.array([s.b for s in p.space], dtype=float)
    return float(p.probs @ a), float(p.probs @ b)


# ---------- balance checks ----------

@dataclass(frozen=True)
class BalanceReport:
    max_residual_full: float
    max_residual_class1: float
    max_residual_class2: float
    tol: float

    @property
    def ok(self) -> bool:
        return max(self.max_residual_full, self.max_residual_class1,
                   self.max_residual_class2) < self.tol

    def as_dict(self) -> dict:
        return {"max_residual_full": self.max_residual_full,
                "max_residual_class1": self.max_residual_class1,
                "max_residual_class2": self.max_residual_class2,
                "tol": self.tol, "ok": self.ok}


def verify_balance(params: MsjParams, tol: float = BALANCE_TOL,
                   pi: np.ndarray | None = None) -> BalanceReport:
    """Residuals of pi = pi P and of the per-class equations p_i pi = pi P_i."""
    validate(params)
    tm = transition_matrix(params)
    if pi is None:
        pi = embedded_steady_state(params).probs
    pi = np.asarray(pi, dtype=float)
    report = BalanceReport(
        max_residual_full=float(np.max(np.abs(pi @ tm.P - pi))),
        max_residual_class1=float(np.max(np.abs(pi @ tm.P1 - params.p1 * pi))),
        max_residual_class2=float(np.max(np.abs(pi @ tm.P2 - params.p2 * pi))),
        tol=tol,
    )
    log.debug("balance residuals for %s: %s", params, report)
    return report


def ctmc_balance_residual(params: MsjParams) -> float:
    """max_s |p_s nu_s - sum_s' p_s' nu_s' P(s', s)|."""
    p, _ = ctmc_steady_state(params)
    tm = transition_matrix(params)
    flow = p.probs * completion_rates(params, p.space)
    return float(np.max(np.abs(flow @ tm.P - flow)))
