import numpy as np
import pytest

from msjstab.errors import ParameterError
from msjstab.model import MsjParams, enumerate_states, free_servers, SaturatedState
from msjstab.saturated import ctmc_steady_state, saturated_wastage
from msjstab.simulator import (
    OPEN,
    SATURATED,
    Estimate,
    SimConfig,
    drift,
    estimate_lambda_star_empirical,
    response_time_curve,
    simulate,
    simulate_many,
)
from msjstab.stability import lambda_star


def test_config_validation(tiny):
    with pytest.raises(ParameterError):
        SimConfig(tiny, mode="closed")
    with pytest.raises(ParameterError):
        SimConfig(tiny, mode=OPEN)
    with pytest.raises(ParameterError):
        SimConfig(tiny, horizon=10.0, warmup=20.0)
    with pytest.raises(ParameterError):
        SimConfig(tiny, batches=1)
    assert SimConfig(tiny, horizon=100.0).warmup == pytest.approx(10.0)


def test_same_seed_same_result(tiny):
    cfg = SimConfig(tiny, SATURATED, seed=7, horizon=2_000.0)
    assert simulate(cfg).as_dict() == simulate(cfg).as_dict()
    other = simulate(SimConfig(tiny, SATURATED, seed=8, horizon=2_000.0))
    assert other.state_time != simulate(cfg).state_time


def test_open_mode_deterministic(sys_3_10_30):
    cfg = SimConfig(sys_3_10_30, OPEN, lam=2.0, seed=3, horizon=2_000.0)
    a, b = simulate(cfg), simulate(cfg)
    assert a.events == b.events
    assert a.n_in_system_trace == b.n_in_system_trace
    assert a.throughput == b.throughput


def test_saturated_throughput_tiny(tiny):
    stats = simulate(SimConfig(tiny, SATURATED, seed=1, horizon=200_000.0))
    est = stats.throughput
    assert est.stderr > 0
    assert abs(est.mean - 8 / 7) < 3 * est.stderr
    assert stats.time_avg_wastage_saturated.mean == pytest.approx(2 / 7, abs=0.02)
    assert sum(stats.completions_by_class) > 0


def test_saturated_states_on_list(sys_3_10_30):
    stats = simulate(SimConfig(sys_3_10_30, SATURATED, seed=5, horizon=20_000.0))
    known = enumerate_states(sys_3_10_30).index_of
    assert stats.state_time
    assert set(stats.state_time) <= set(known)


def test_blocked_head_leaves_servers_idle(tiny):
    stats = simulate(SimConfig(tiny, SATURATED, seed=2, horizon=20_000.0))
    assert stats.blocked_fraction > 0
    assert stats.state_time[(1, 1, 0)] > 0
    assert free_servers(SaturatedState(1, 1, 0), tiny) >= tiny.n1


def test_visit_fractions_converge(tiny):
    configs = [SimConfig(tiny, SATURATED, seed=s, horizon=200_000.0) for s in range(5)]
    p, _ = ctmc_steady_state(tiny)
    empirical = np.zeros(len(p.space))
    for stats in simulate_many(configs, workers=2):
        for i, s in enumerate(p.space):
            empirical[i] += stats.state_time.get(tuple(s), 0.0) / len(configs)
    assert 0.5 * np.abs(empirical - p.probs).sum() < 0.01


def test_open_below_threshold_is_bounded(tiny):
    lam = 0.8 * lambda_star(tiny)
    short = simulate(SimConfig(tiny, OPEN, lam=lam, seed=11, horizon=50_000.0))
    longer = simulate(SimConfig(tiny, OPEN, lam=lam, seed=11, horizon=100_000.0))
    q1, q2 = short.mean_queue_length.mean, longer.mean_queue_length.mean
    assert q1 < 20 and q2 < 20
    assert abs(q1 - q2) < 0.5 * max(q1, q2) + 1.0
    assert short.final_queue_length < 100
    assert short.throughput.mean == pytest.approx(lam, rel=0.05)
    assert short.mean_response_time.mean > 0
    assert 0 <= short.time_avg_wastage_conditional.mean < tiny.n2


def test_queue_length_counts_blocked_head(tiny):
    stats = simulate(SimConfig(tiny, OPEN, lam=1.0, seed=6, horizon=20_000.0))
    assert stats.blocked_fraction > 0
    in_service = sum(f * (a + b) for (h, a, b), f in stats.state_time.items())
    served = stats.mean_in_system.mean - stats.mean_queue_length.mean
    assert served == pytest.approx(in_service, rel=1e-9)


def test_open_above_threshold_grows(tiny):
    x = lambda_star(tiny)
    lam = 1.2 * x
    runs = {}
    for horizon in (20_000.0, 40_000.0):
        cfg = SimConfig(tiny, OPEN, lam=lam, seed=4, horizon=horizon)
        stats = simulate(cfg)
        runs[horizon] = stats
        assert stats.final_queue_length > 0.5 * (lam - x) * horizon
        assert drift(stats, cfg) > 0.5 * (lam - x)
    ratio = runs[40_000.0].final_queue_length / runs[20_000.0].final_queue_length
    assert 1.5 < ratio < 2.6


def test_open_wastage_given_waiting_matches_saturated(sys_3_10_30):
    lam = 1.3 * lambda_star(sys_3_10_30)
    stats = simulate(SimConfig(sys_3_10_30, OPEN, lam=lam, seed=9, horizon=50_000.0))
    assert stats.time_avg_wastage_conditional.mean == pytest.approx(
        saturated_wastage(sys_3_10_30), abs=0.1)


@pytest.mark.slow
@pytest.mark.parametrize("params", [
    MsjParams(n1=1, n2=2, n=2, mu1=1.0, mu2=1.0, p1=0.5),
    MsjParams(n1=3, n2=10, n=30, mu1=2.0, mu2=1.0, p1=0.5),
    MsjParams(n1=1, n2=10, n=10, mu1=16.2, mu2=8.1, p1=0.2),
    MsjParams(n1=2, n2=5, n=13, mu1=1.0, mu2=0.3, p1=0.7),
    MsjParams(n1=1, n2=10, n=30, mu1=1.0, mu2=3.0, p1=0.5),
])
def test_saturated_throughput_long(params):
    x = lambda_star(params)
    stats = simulate(SimConfig(params, SATURATED, seed=17, horizon=1_000_000 / x))
    assert abs(stats.throughput.mean - x) < 3 * stats.throughput.stderr


@pytest.mark.slow
@pytest.mark.parametrize("params", [
    MsjParams(n1=1, n2=2, n=2, mu1=1.0, mu2=1.0, p1=0.5),
    MsjParams(n1=3, n2=10, n=30, mu1=2.0, mu2=1.0, p1=0.5),
    MsjParams(n1=2, n2=3, n=6, mu1=1.0, mu2=1.0, p1=1.0),
])
def test_empirical_interval_contains_threshold(params):
    lo, hi = estimate_lambda_star_empirical(params, tolerance=0.05, events=200_000, seed=1)
    assert lo <= lambda_star(params) <= hi


@pytest.mark.slow
@pytest.mark.parametrize("p1, mu1, mu2", [(0.2, 16.2, 8.1), (0.6, 8.6, 4.3)])
def test_response_time_diverges_near_threshold(p1, mu1, mu2):
    params = MsjParams(n1=1, n2=10, n=10, mu1=mu1, mu2=mu2, p1=p1)
    rows = response_time_curve(params, [0.5, 0.98], events=1_000_000, seed=3)
    assert rows[1].mean_response_time > 5 * rows[0].mean_response_time


def test_batch_means_interval():
    est = Estimate.from_batches([1.0, 2.0, 3.0, 4.0])
    assert est.batches == 4
    assert est.mean == pytest.approx(2.5)
    lo, hi = est.interval(0.95)
    # t quantile with 3 degrees of freedom
    assert hi - est.mean == pytest.approx(3.182446 * est.stderr, rel=1e-5)
    assert lo < est.mean < hi
    single = Estimate.from_batches([1.0, float("nan")])
    assert single.batches == 1
    assert all(x != x for x in single.interval())
