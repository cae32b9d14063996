import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coiabr.media import ChunkRecord, ManifestConfig, VideoManifest, generate_manifest
from coiabr.sim import (
    ConstantWeight,
    Environment,
    ObserveAfterTerminal,
    RewardParams,
    SimConfig,
    StepAfterTerminal,
    chunk_log_csv,
    compute_download_time,
    compute_reward,
    interest_weight,
    reset,
)
from coiabr.trace import BandwidthTrace, TraceProfile, generate_synthetic_trace
from oracles import stepped_download_time


def one_chunk_manifest(interest=2.0):
    return VideoManifest(4.0, (350, 600, 1000, 2000, 3000),
                         (ChunkRecord(0, (1400, 2400, 4000, 8000, 12000), interest),))


def test_reset_initial_state(manifest, const_trace):
    env, obs = reset(manifest, const_trace)
    assert obs.buffer == 0
    assert obs.last_bitrate == 350
    assert env.state.wall_clock == 0 and env.state.next_chunk == 0
    np.testing.assert_array_equal(obs.predicted_throughput, [350, 350])
    np.testing.assert_array_equal(obs.next_sizes, manifest.size_table[0])


def test_single_chunk_padding(const_trace):
    env, obs = reset(one_chunk_manifest(3.5), const_trace)
    np.testing.assert_array_equal(obs.interest_window, [3.5, 3.5, 3.5])


def test_last_chunk_window(manifest, const_trace):
    env, obs = reset(manifest, const_trace)
    for _ in range(manifest.num_chunks - 1):
        obs = env.step(350).next_observation
    w_last = manifest.interest[-1]
    np.testing.assert_array_equal(obs.interest_window, [w_last] * 3)


def test_history_after_first_chunk():
    m = generate_manifest(ManifestConfig(num_chunks=3), 0)
    env, _ = reset(m, BandwidthTrace([0.0], [1500.0]))
    obs = env.step(1000).next_observation
    np.testing.assert_allclose(obs.predicted_throughput, [1500, 1500])


def test_download_time_examples():
    assert compute_download_time(BandwidthTrace([0], [1000]), 0, 4000) == pytest.approx(4.0)
    assert compute_download_time(BandwidthTrace([0, 2], [1000, 2000]), 0, 4000) == pytest.approx(3.0)


def test_download_time_matches_stepping_oracle(rng):
    for _ in range(100):
        n = rng.integers(1, 12)
        # millisecond-aligned breakpoints keep the oracle's midpoint rule exact per step
        times = np.concatenate([[0], np.cumsum(rng.integers(200, 5000, n - 1))]) / 1000.0
        kbps = rng.uniform(200, 5000, n)
        tr = BandwidthTrace(times, kbps)
        start = int(rng.integers(0, int(times[-1] * 1000) + 3000)) / 1000.0
        size = rng.uniform(100, 15000)
        assert abs(compute_download_time(tr, start, size) - stepped_download_time(times, kbps, start, size)) < 2e-3


def _env_with_buffer(buffer, d, cap=60.0):
    """Environment whose next download takes ``d`` seconds, with the given buffer."""
    m = one_chunk_manifest()
    env = Environment(m, BandwidthTrace([0.0], [4000.0 / d]), config=SimConfig(buffer_cap=cap))
    env.state.buffer = buffer
    return env


@pytest.mark.parametrize("buffer,d,exp_buffer,exp_rebuf,exp_wait", [
    (5.0, 3.0, 6.0, 0.0, 0.0),
    (2.0, 3.0, 4.0, 1.0, 0.0),
    (58.0, 1.0, 60.0, 0.0, 1.0),
])
def test_step_buffer_rules(buffer, d, exp_buffer, exp_rebuf, exp_wait):
    env = _env_with_buffer(buffer, d)
    out = env.step(1000)  # 4000 kbit at 4000/d kbps
    assert out.download_time == pytest.approx(d)
    assert out.rebuffer == pytest.approx(exp_rebuf)
    assert out.wait_time == pytest.approx(exp_wait)
    assert env.state.buffer == pytest.approx(exp_buffer)
    assert env.state.wall_clock == pytest.approx(d + exp_wait)


def test_step_after_terminal(const_trace):
    env, _ = reset(one_chunk_manifest(), const_trace)
    out = env.step(350)
    assert out.terminal
    with pytest.raises(StepAfterTerminal):
        env.step(350)
    with pytest.raises(ObserveAfterTerminal):
        env.observe()


def test_step_rejects_unknown_bitrate(manifest, const_trace):
    env, _ = reset(manifest, const_trace)
    with pytest.raises(ValueError):
        env.step(999)


@pytest.mark.parametrize("weight,b,prev,rebuf,expected", [
    (2.0, 1000, 1000, 0.0, 2000.0),
    (1.0, 350, 3000, 0.0, -2300.0),
    (1.5, 2000, 2000, 0.5, 1500.0),
])
def test_reward_examples(weight, b, prev, rebuf, expected):
    assert compute_reward(weight, b, prev, rebuf) == pytest.approx(expected)


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 3), st.floats(1, 3), st.sampled_from([350, 600, 1000, 2000, 3000]),
       st.sampled_from([350, 600, 1000, 2000, 3000]), st.floats(0, 10), st.floats(0, 10))
def test_reward_monotone(w1, w2, b, prev, r1, r2):
    lo_w, hi_w = sorted((w1, w2))
    assert compute_reward(lo_w, b, prev, r1) <= compute_reward(hi_w, b, prev, r1)
    lo_r, hi_r = sorted((r1, r2))
    assert compute_reward(w1, b, prev, hi_r) <= compute_reward(w1, b, prev, lo_r)


@pytest.mark.parametrize("w,f", [(1, 1.0), (5, 3.0), (3, 2.0)])
def test_interest_weight(w, f):
    assert interest_weight(w) == f


@pytest.mark.parametrize("w", [0.99, 5.01])
def test_interest_weight_range(w):
    with pytest.raises(ValueError):
        interest_weight(w)


def test_params_validation():
    for kwargs in ({"alpha": -1}, {"beta": -1}, {"gamma": 0}, {"gamma": 1.5}):
        with pytest.raises(ValueError):
            RewardParams(**kwargs)


def run_random_session(seed):
    rng = np.random.default_rng(seed)
    m = generate_manifest(ManifestConfig(num_chunks=60, size_noise=0.2), seed)
    tr = generate_synthetic_trace(TraceProfile(1500, 1200, 3.0, 200.0), seed)
    env = Environment(m, tr, config=SimConfig(buffer_cap=20.0))
    outs = []
    while not env.done:
        outs.append(env.step(m.bitrates[rng.integers(5)]))
        assert 0 <= env.state.buffer <= env.config.buffer_cap
    return m, env, outs


@pytest.mark.parametrize("seed", range(5))
def test_conservation(seed):
    m, env, outs = run_random_session(seed)
    clock = sum(o.download_time for o in outs) + sum(o.wait_time for o in outs)
    assert env.state.wall_clock == pytest.approx(clock, abs=1e-9)
    rebuf = sum(o.rebuffer for o in outs)
    played = env.state.wall_clock - rebuf
    assert played + env.state.buffer - 0.0 == pytest.approx(m.num_chunks * m.chunk_duration, abs=1e-9)


def test_step_deterministic():
    _, env_a, outs_a = run_random_session(11)
    _, env_b, outs_b = run_random_session(11)
    assert outs_a == outs_b


def test_constant_weight_map(manifest, const_trace):
    env = Environment(manifest, const_trace, RewardParams(weight_map=ConstantWeight(2.0)))
    out = env.step(350)
    assert out.chunk_log.weight == 2.0


def test_chunk_log_csv(manifest, const_trace):
    env, _ = reset(manifest, const_trace)
    env.step(350)
    env.step(600)
    lines = chunk_log_csv(env.log).splitlines()
    assert lines[0] == "chunk_index,chosen_bitrate_kbps,weight,rebuffer_s,download_time_s,reward"
    assert len(lines) == 3 and lines[2].startswith("1,600.0,")
