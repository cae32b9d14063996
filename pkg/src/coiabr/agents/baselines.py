"""Content-agnostic baselines: buffer-based, rate-based, and robust MPC."""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..sim import Environment, RewardParams, StateObservation

DEFAULT_RESERVOIR_S = 5.0
DEFAULT_CUSHION_S = 20.0


# relative slack so a measured 2999.9999999 kbps still floors to a 3000 rung
_FLOOR_RTOL = 1e-9


def ladder_floor(value: float, bitrates) -> float:
    """Largest bitrate <= value, or the lowest bitrate if none qualifies."""
    limit = value * (1.0 + _FLOOR_RTOL)
    below = [b for b in bitrates if b <= limit]
    return float(max(below)) if below else float(min(bitrates))


def bba_select(buffer: float, bitrates, reservoir: float = DEFAULT_RESERVOIR_S,
               cushion: float = DEFAULT_CUSHION_S) -> float:
    lo, hi = float(bitrates[0]), float(bitrates[-1])
    if buffer <= reservoir:
        return lo
    if buffer >= reservoir + cushion:
        return hi
    target = lo + (buffer - reservoir) / cushion * (hi - lo)
    return ladder_floor(target, bitrates)


def rba_select(predicted: float, bitrates) -> float:
    return ladder_floor(predicted, bitrates)


@dataclass(frozen=True)
class MpcModel:
    """What MPC knows about the upcoming chunks."""

    sizes: np.ndarray        # (n_future, |B|) kbit, starting at the next chunk
    bitrates: tuple[float, ...]
    chunk_duration: float
    buffer_cap: float
    params: RewardParams = RewardParams()
    # content-agnostic planning weight
    weight: float = 1.0


_SEQ_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _sequences(n_actions: int, horizon: int) -> np.ndarray:
    key = (n_actions, horizon)
    if key not in _SEQ_CACHE:
        # lexicographic order, so argmax's first-hit rule favors lower bitrates
        _SEQ_CACHE[key] = np.array(list(itertools.product(range(n_actions), repeat=horizon)), dtype=int)
    return _SEQ_CACHE[key]


def robust_throughput(predicted: float, errors) -> float:
    errs = list(errors)
    return predicted / (1.0 + max(errs)) if errs else predicted


def mpc_select(observation: StateObservation, model: MpcModel, horizon: int = 3,
               error_history=(), predicted: float | None = None) -> float:
    """First bitrate of the best sequence over the horizon under a robust throughput."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if predicted is None:
        predicted = float(observation.predicted_throughput[0])
    bw = robust_throughput(predicted, error_history)
    horizon = min(horizon, len(model.sizes))
    seqs = _sequences(len(model.bitrates), horizon)
    rates = np.asarray(model.bitrates)[seqs]                       # (S, H)
    sizes = model.sizes[np.arange(horizon), seqs]                  # (S, H)
    q = model.params.quality_map
    qr = np.vectorize(q)(rates) if q.__name__ != "identity" else rates
    prev = np.full(len(seqs), q(observation.last_bitrate))
    buffer = np.full(len(seqs), float(observation.buffer))
    total = np.zeros(len(seqs))
    for j in range(horizon):
        d = sizes[:, j] / bw
        rebuf = np.maximum(d - buffer, 0.0)
        buffer = np.minimum(np.maximum(buffer - d, 0.0) + model.chunk_duration, model.buffer_cap)
        total += (model.weight * qr[:, j] - model.params.alpha * rebuf
                  - model.params.beta * np.abs(qr[:, j] - prev))
        prev = qr[:, j]
    return float(model.bitrates[seqs[int(np.argmax(total)), 0]])


class BbaPolicy:
    name = "bba"

    def __init__(self, reservoir: float = DEFAULT_RESERVOIR_S, cushion: float = DEFAULT_CUSHION_S):
        self.reservoir = reservoir
        self.cushion = cushion

    def reset(self) -> None:
        pass

    def select(self, obs: StateObservation, env: Environment) -> float:
        return bba_select(obs.buffer, env.manifest.bitrates, self.reservoir, self.cushion)


class RbaPolicy:
    name = "rba"

    def reset(self) -> None:
        pass

    def select(self, obs: StateObservation, env: Environment) -> float:
        return rba_select(float(obs.predicted_throughput[0]), env.manifest.bitrates)


class MpcPolicy:
    """Robust MPC; tracks its own relative prediction errors over the session."""

    name = "mpc"

    def __init__(self, horizon: int = 3, error_window: int = 5, weight: float = 1.0):
        self.horizon = horizon
        self.weight = weight
        self.errors: deque = deque(maxlen=error_window)
        self._last_prediction: float | None = None

    def reset(self) -> None:
        self.errors.clear()
        self._last_prediction = None

    def select(self, obs: StateObservation, env: Environment) -> float:
        hist = env.state.throughput_history.recent
        if self._last_prediction is not None and hist:
            actual = hist[-1]
            self.errors.append(abs(self._last_prediction - actual) / actual)
        predicted = float(obs.predicted_throughput[0])
        self._last_prediction = predicted
        m, t = env.manifest, obs.chunk_index
        model = MpcModel(m.size_table[t:t + self.horizon], m.bitrates, m.chunk_duration,
                         env.config.buffer_cap, env.params, self.weight)
        return mpc_select(obs, model, self.horizon, self.errors, predicted)
