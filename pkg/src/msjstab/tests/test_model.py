import pytest

from msjstab.errors import ConsistencyError, ParameterError
from msjstab.model import (
    MsjParams,
    SaturatedState,
    completion_fractions,
    enumerate_states,
    free_servers,
    mean_server_seconds,
    s1,
    s2,
    validate,
)

LIST_3_10_30 = [
    (0, 0, 3), (1, 1, 2), (1, 2, 2), (0, 3, 2), (1, 4, 1), (1, 5, 1),
    (0, 6, 1), (1, 7, 0), (1, 8, 0), (1, 9, 0), (0, 10, 0),
]


def test_validate_accepts_3_10_30():
    validate(MsjParams(n1=3, n2=10, n=30, mu1=1.0, mu2=1.0, p1=0.5))


@pytest.mark.parametrize("kwargs, fragment", [
    (dict(n1=10, n2=10, n=30, mu1=1.0, mu2=1.0, p1=0.5), "n1 must be < n2"),
    (dict(n1=12, n2=10, n=30, mu1=1.0, mu2=1.0, p1=0.5), "n1 must be < n2"),
    (dict(n1=3, n2=40, n=30, mu1=1.0, mu2=1.0, p1=0.5), "n2 must be <= n"),
    (dict(n1=0, n2=10, n=30, mu1=1.0, mu2=1.0, p1=0.5), "n1 must be a positive integer"),
    (dict(n1=3, n2=10, n=30, mu1=0.0, mu2=1.0, p1=0.5), "mu1"),
    (dict(n1=3, n2=10, n=30, mu1=1.0, mu2=float("inf"), p1=0.5), "mu2"),
    (dict(n1=3, n2=10, n=30, mu1=1.0, mu2=1.0, p1=1.5), "p1"),
])
def test_validate_rejects(kwargs, fragment):
    with pytest.raises(ParameterError, match=fragment):
        validate(MsjParams(**kwargs))


def test_enumerate_3_10_30_matches_list(sys_3_10_30):
    space = enumerate_states(sys_3_10_30)
    assert [tuple(s) for s in space] == LIST_3_10_30
    assert len(space) == 11


def test_s1_s2_examples(sys_3_10_30):
    assert s1(4, sys_3_10_30) == SaturatedState(1, 4, 1)
    assert s1(6, sys_3_10_30) == SaturatedState(0, 6, 1)
    assert s2(2, sys_3_10_30) == SaturatedState(0, 3, 2)
    assert s2(0, sys_3_10_30) == SaturatedState(0, 10, 0)


def test_s1_out_of_range(sys_3_10_30):
    with pytest.raises(ParameterError):
        s1(11, sys_3_10_30)
    with pytest.raises(ParameterError):
        s2(-1, sys_3_10_30)


def test_tiny_states(tiny):
    assert [tuple(s) for s in enumerate_states(tiny)] == [(0, 0, 1), (1, 1, 0), (0, 2, 0)]


def test_single_class2_slot():
    params = MsjParams(n1=1, n2=7, n=7, mu1=1.0, mu2=1.0, p1=0.5)
    space = enumerate_states(params)
    assert len(space) == 8
    assert sum(1 for s in space if s.b == 1) == 1


@pytest.mark.parametrize("n1, n2, n", [(1, 2, 2), (3, 10, 30), (2, 7, 25), (5, 6, 41), (1, 67, 201)])
def test_state_invariants(n1, n2, n):
    params = MsjParams(n1=n1, n2=n2, n=n, mu1=1.0, mu2=1.0, p1=0.5)
    space = enumerate_states(params)
    assert [s.a for s in space] == list(range(params.a_max + 1))
    for s in space:
        idle = free_servers(s, params)
        assert 0 <= idle
        if s.h == 1:
            assert n1 <= idle < n2
        else:
            assert idle < n1
            assert s == s2(s.b, params)
    for b in range(params.b_max + 1):
        assert s2(b, params).h == 0


def test_completion_fractions(sys_3_10_30):
    f1, f2 = completion_fractions(SaturatedState(1, 4, 1), sys_3_10_30)
    assert f1 == pytest.approx(8 / 9)
    assert f1 + f2 == pytest.approx(1.0, abs=1e-16)
    assert completion_fractions(SaturatedState(1, 7, 0), sys_3_10_30) == (1.0, 0.0)
    assert completion_fractions(SaturatedState(0, 0, 3), sys_3_10_30) == (0.0, 1.0)
    with pytest.raises(ConsistencyError):
        completion_fractions(SaturatedState(0, 0, 0), sys_3_10_30)


def test_mean_server_seconds():
    blue = MsjParams(n1=1, n2=10, n=10, mu1=16.2, mu2=8.1, p1=0.2)
    red = MsjParams(n1=1, n2=10, n=10, mu1=8.6, mu2=4.3, p1=0.6)
    assert mean_server_seconds(blue) == pytest.approx(1.0)
    assert mean_server_seconds(red) == pytest.approx(1.0)
    single = MsjParams(n1=2, n2=3, n=6, mu1=4.0, mu2=1.0, p1=1.0)
    assert mean_server_seconds(single) == pytest.approx(0.5)


def test_with_helpers_keep_other_fields(sys_3_10_30):
    p = sys_3_10_30.with_rates(10.0, 5.0).with_mix(0.25).with_servers(40)
    assert (p.n1, p.n2, p.n, p.mu1, p.mu2, p.p1) == (3, 10, 40, 10.0, 5.0, 0.25)
    assert p.p2 == pytest.approx(0.75)
