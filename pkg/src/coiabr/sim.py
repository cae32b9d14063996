"""Trace-driven streaming session: buffer dynamics, observation, reward."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .media import INTEREST_MAX, INTEREST_MIN, VideoManifest
from .trace import DEFAULT_COLD_START_KBPS, BandwidthTrace, ThroughputHistory, predict_throughput

WEIGHT_MIN = 1.0
WEIGHT_MAX = 3.0


class SessionError(RuntimeError):
    pass


class StepAfterTerminal(SessionError):
    pass


class ObserveAfterTerminal(SessionError):
    pass


def interest_weight(w: float) -> float:
    """Map interestingness in [1, 5] linearly onto a reward weight in [1, 3]."""
    if not (INTEREST_MIN <= w <= INTEREST_MAX):
        raise ValueError(f"interestingness {w} outside [1, 5]")
    return 1.0 + (w - 1.0) / 2.0


@dataclass(frozen=True)
class ConstantWeight:
    """Weight map ignoring interestingness (DQN-Constant ablation)."""

    value: float = 2.0

    def __call__(self, w: float) -> float:
        return self.value


def identity(x: float) -> float:
    return x


@dataclass(frozen=True)
class RewardParams:
    alpha: float = 3000.0
    beta: float = 1.0
    gamma: float = 0.8
    weight_map: Callable[[float], float] = interest_weight
    quality_map: Callable[[float], float] = identity

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")


def compute_reward(weight: float, bitrate: float, prev_bitrate: float, rebuffer: float,
                   params: RewardParams = RewardParams()) -> float:
    q = params.quality_map
    return (
        weight * q(bitrate)
        - params.alpha * rebuffer
        - params.beta * abs(q(bitrate) - q(prev_bitrate))
    )


def compute_download_time(trace: BandwidthTrace, start: float, size: float) -> float:
    if size <= 0 or start < 0:
        raise ValueError("size must be positive and start non-negative")
    return trace.time_to_deliver(start, size)


@dataclass(frozen=True)
class SimConfig:
    k: int = 2
    h: int = 3
    buffer_cap: float = 60.0
    cold_start: float = DEFAULT_COLD_START_KBPS
    history_window: int = 5

    def __post_init__(self):
        if self.k < 1 or self.h < 1 or self.history_window < 1:
            raise ValueError("k, h and history_window must be >= 1")
        if not self.buffer_cap > 0:
            raise ValueError("buffer_cap must be positive")


@dataclass
class PlayerState:
    buffer: float = 0.0
    last_bitrate: float = 0.0
    next_chunk: int = 0
    wall_clock: float = 0.0
    throughput_history: ThroughputHistory = field(default_factory=ThroughputHistory)


@dataclass(frozen=True, eq=False)
class StateObservation:
    predicted_throughput: np.ndarray
    buffer: float
    last_bitrate: float
    interest_window: np.ndarray
    next_sizes: np.ndarray
    chunk_index: int = 0

    def __eq__(self, other):
        if not isinstance(other, StateObservation):
            return NotImplemented
        return (self.buffer == other.buffer and self.last_bitrate == other.last_bitrate
                and self.chunk_index == other.chunk_index
                and np.array_equal(self.predicted_throughput, other.predicted_throughput)
                and np.array_equal(self.interest_window, other.interest_window)
                and np.array_equal(self.next_sizes, other.next_sizes))

    __hash__ = None

    def to_vector(self) -> np.ndarray:
        return np.concatenate([
            self.predicted_throughput,
            [self.buffer, self.last_bitrate],
            self.interest_window,
            self.next_sizes,
        ])


@dataclass(frozen=True)
class ChunkLogEntry:
    index: int
    bitrate: float
    weight: float
    rebuffer: float
    download_time: float
    wait_time: float
    reward: float


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    rebuffer: float
    download_time: float
    wait_time: float
    next_observation: StateObservation | None
    chunk_log: ChunkLogEntry

    @property
    def terminal(self) -> bool:
        return self.next_observation is None


class Environment:
    """One streaming session of ``manifest`` over ``trace``.

    Single-owner; mutated only through :meth:`reset` and :meth:`step`.
    """

    def __init__(self, manifest: VideoManifest, trace: BandwidthTrace,
                 params: RewardParams = RewardParams(), config: SimConfig = SimConfig()):
        if config.buffer_cap < manifest.chunk_duration:
            raise ValueError("buffer_cap must hold at least one chunk")
        self.manifest = manifest
        self.trace = trace
        self.params = params
        self.config = config
        self.state = PlayerState()
        self.log: list[ChunkLogEntry] = []
        self.reset()

    def reset(self) -> StateObservation:
        self.state = PlayerState(
            buffer=0.0,
            last_bitrate=self.manifest.bitrates[0],
            next_chunk=0,
            wall_clock=0.0,
            throughput_history=ThroughputHistory(self.config.history_window),
        )
        self.log = []
        return self.observe()

    @property
    def done(self) -> bool:
        return self.state.next_chunk >= self.manifest.num_chunks

    def predicted_throughput(self) -> np.ndarray:
        return predict_throughput(self.state.throughput_history, self.config.k, self.config.cold_start)

    def observe(self) -> StateObservation:
        if self.done:
            raise ObserveAfterTerminal("session has ended")
        m, t, h = self.manifest, self.state.next_chunk, self.config.h
        idx = np.minimum(np.arange(t, t + h), m.num_chunks - 1)
        return StateObservation(
            predicted_throughput=self.predicted_throughput(),
            buffer=self.state.buffer,
            last_bitrate=self.state.last_bitrate,
            interest_window=m.interest[idx].copy(),
            next_sizes=m.size_table[t].copy(),
            chunk_index=t,
        )

    def step(self, bitrate: float) -> StepOutcome:
        if self.done:
            raise StepAfterTerminal("session has ended")
        m, s, cfg = self.manifest, self.state, self.config
        t = s.next_chunk
        size = m.chunk_size(t, bitrate)
        d = compute_download_time(self.trace, s.wall_clock, size)
        rebuffer = max(d - s.buffer, 0.0)
        buffer = max(s.buffer - d, 0.0) + m.chunk_duration
        wait = max(buffer - cfg.buffer_cap, 0.0)
        buffer -= wait
        weight = float(self.params.weight_map(float(m.interest[t])))
        reward = float(compute_reward(weight, bitrate, s.last_bitrate, rebuffer, self.params))

        s.throughput_history.append(size / d)
        s.wall_clock += d + wait
        s.buffer = buffer
        s.last_bitrate = float(bitrate)
        s.next_chunk = t + 1

        entry = ChunkLogEntry(t, float(bitrate), weight, rebuffer, d, wait, reward)
        self.log.append(entry)
        nxt = None if self.done else self.observe()
        return StepOutcome(reward, rebuffer, d, wait, nxt, entry)


def reset(manifest: VideoManifest, trace: BandwidthTrace, params: RewardParams = RewardParams(),
          config: SimConfig = SimConfig()) -> tuple[Environment, StateObservation]:
    env = Environment(manifest, trace, params, config)
    return env, env.observe()


CHUNK_LOG_FIELDS = ("chunk_index", "chosen_bitrate_kbps", "weight", "rebuffer_s", "download_time_s", "reward")


def chunk_log_csv(log) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CHUNK_LOG_FIELDS)
    for e in log:
        w.writerow([e.index, repr(e.bitrate), repr(e.weight), repr(e.rebuffer), repr(e.download_time), repr(e.reward)])
    return buf.getvalue()
