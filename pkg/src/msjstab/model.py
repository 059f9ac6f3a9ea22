"""
msjstab.model

Two-class multiserver-job system: parameters, the saturated state space and
the completion fractions f1, f2.

A saturated state is the triple [h, a, b]: h = 1 when a class-2 job blocks the
head of the queue, a and b the numbers of class-1 and class-2 jobs in service.
There is exactly one saturated state per class-1 count a, so the state space
is indexed by a.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterator

from .errors import ConsistencyError, ParameterError


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    BOUNDARY = "boundary"  # lambda == lambda*: undetermined


@dataclass(frozen=True)
class MsjParams:
    """Class i jobs need n_i servers for an Exp(mu_i) time; p1 of arrivals are class 1."""
    n1: int
    n2: int
    n: int
    mu1: float
    mu2: float
    p1: float

    @property
    def p2(self) -> float:
        return 1.0 - self.p1

    @property
    def a_max(self) -> int:
        return self.n // self.n1

    @property
    def b_max(self) -> int:
        return self.n // self.n2

    def as_dict(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "n": self.n,
                "mu1": self.mu1, "mu2": self.mu2, "p1": self.p1, "p2": self.p2}

    def with_rates(self, mu1: float, mu2: float) -> "MsjParams":
        return replace(self, mu1=mu1, mu2=mu2)

    def with_mix(self, p1: float) -> "MsjParams":
        return replace(self, p1=p1)

    def with_servers(self, n: int) -> "MsjParams":
        return replace(self, n=n)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate(params: MsjParams) -> None:
    """Raise ParameterError unless every MsjParams invariant holds."""
    for name in ("n1", "n2", "n"):
        v = getattr(params, name)
        if not _is_int(v) or v < 1:
            raise ParameterError(f"{name} must be a positive integer, got {v!r}")
    if not params.n1 < params.n2:
        raise ParameterError(f"n1 must be < n2, got n1={params.n1}, n2={params.n2}")
    if not params.n2 <= params.n:
        raise ParameterError(f"n2 must be <= n, got n2={params.n2}, n={params.n}")
    for name in ("mu1", "mu2"):
        v = getattr(params, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise ParameterError(f"{name} must be a positive finite rate, got {v!r}")
    p1 = params.p1
    if not (isinstance(p1, (int, float)) and 0.0 <= p1 <= 1.0):
        raise ParameterError(f"p1 must lie in [0, 1], got {p1!r}")


@dataclass(frozen=True)
class SaturatedState:
    h: int
    a: int
    b: int

    def __iter__(self) -> Iterator[int]:
        return iter((self.h, self.a, self.b))

    def __str__(self) -> str:
        return f"[{self.h}, {self.a}, {self.b}]"


def free_servers(state: SaturatedState, params: MsjParams) -> int:
    return params.n - state.a * params.n1 - state.b * params.n2


def completion_rate(state: SaturatedState, params: MsjParams) -> float:
    """nu = a*mu1 + b*mu2, the rate of leaving the state (self-transitions included)."""
    return state.a * params.mu1 + state.b * params.mu2


def s1(a: int, params: MsjParams) -> SaturatedState:
    """The unique saturated state with exactly a class-1 jobs in service.

    Greedy fill with class-2 jobs until full or blocked, in closed form.
    """
    if not 0 <= a <= params.a_max:
        raise ParameterError(f"a must lie in [0, {params.a_max}], got {a}")
    left = params.n - a * params.n1
    b, rem = divmod(left, params.n2)
    h = 1 if rem >= params.n1 else 0
    return SaturatedState(h, a, b)


def s2(b: int, params: MsjParams) -> SaturatedState:
    """The unique non-blocking saturated state with exactly b class-2 jobs in service."""
    if not 0 <= b <= params.b_max:
        raise ParameterError(f"b must lie in [0, {params.b_max}], got {b}")
    return SaturatedState(0, (params.n - b * params.n2) // params.n1, b)


@dataclass(frozen=True)
class StateSpace:
    states: tuple[SaturatedState, ...]
    index_of: dict[tuple[int, int, int], int] = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self) -> Iterator[SaturatedState]:
        return iter(self.states)

    def __getitem__(self, a: int) -> SaturatedState:
        return self.states[a]


def enumerate_states(params: MsjParams) -> StateSpace:
    """[s1(0), s1(1), ..., s1(a_max)]; position equals the class-1 count."""
    validate(params)
    states = tuple(s1(a, params) for a in range(params.a_max + 1))
    index_of = {tuple(s): i for i, s in enumerate(states)}
    return StateSpace(states=states, index_of=index_of)


def completion_fractions(state: SaturatedState, params: MsjParams) -> tuple[float, float]:
    """(f1, f2): probabilities that the next completion is class 1 / class 2."""
    if state.a + state.b == 0:
        raise ConsistencyError(f"state {state} has no job in service")
    r1 = state.a * params.mu1
    r2 = state.b * params.mu2
    f1 = r1 / (r1 + r2)
    return f1, 1.0 - f1


def class_probs(params: MsjParams) -> tuple[float, float]:
    return params.p1, params.p2


def mean_server_seconds(params: MsjParams) -> float:
    """E[S] = p1*n1/mu1 + p2*n2/mu2."""
    return params.p1 * params.n1 / params.mu1 + params.p2 * params.n2 / params.mu2
