"""Deep Q-learning rate adaptation with experience replay and a soft-mixed target network."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, replace
from typing import Callable

import numpy as np

from .. import nn
from ..sim import ConstantWeight, Environment, StateObservation

COI = "coi"
CONSTANT = "constant"


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class DqnConfig:
    epsilon: float = 0.2
    gamma: float = 0.8
    batch_size: int = 256
    batches_per_update: int = 50
    target_mix: float = 0.5
    sessions: int = 500
    # None trains on every chunk of each session's manifest
    chunks_per_session: int | None = None
    hidden: tuple[int, ...] = (256, 512)
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    replay_capacity: int = 10_000
    # Q-targets are learned in units of 1/reward_scale reward points
    reward_scale: float = 1e-3
    seed: int = 0

    def validate(self) -> None:
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if not 0 < self.target_mix <= 1:
            raise ValueError("target_mix must be in (0, 1]")
        if self.batch_size < 1 or self.batch_size > self.replay_capacity:
            raise ValueError("batch_size must be in [1, replay_capacity]")
        if self.batches_per_update < 1 or self.sessions < 0:
            raise ValueError("batches_per_update must be >= 1 and sessions >= 0")
        if self.chunks_per_session is not None and self.chunks_per_session < 1:
            raise ValueError("chunks_per_session must be >= 1")
        if not self.reward_scale > 0:
            raise ValueError("reward_scale must be positive")


@dataclass(frozen=True)
class StateEncoder:
    """Scales a physical-unit observation into the Q-network's input vector.

    In constant-weight mode the interest window is replaced by the
    interestingness whose weight equals the constant, so the agent sees
    no content information.
    """

    throughput_scale: float = 3000.0
    buffer_scale: float = 60.0
    bitrate_scale: float = 3000.0
    size_scale: float = 12000.0
    constant_interest: float | None = None

    def __call__(self, obs: StateObservation) -> np.ndarray:
        interest = obs.interest_window
        if self.constant_interest is not None:
            interest = np.full_like(interest, self.constant_interest)
        return np.concatenate([
            obs.predicted_throughput / self.throughput_scale,
            [obs.buffer / self.buffer_scale, obs.last_bitrate / self.bitrate_scale],
            interest,
            obs.next_sizes / self.size_scale,
        ])

    @classmethod
    def for_env(cls, env: Environment, weight_mode: str = COI, constant_weight: float = 2.0) -> "StateEncoder":
        top = float(env.manifest.bitrates[-1])
        return cls(
            throughput_scale=top,
            buffer_scale=env.config.buffer_cap,
            bitrate_scale=top,
            size_scale=float(env.manifest.size_table.max()),
            # inverse of the 1..5 -> 1..3 weight map
            constant_interest=2.0 * constant_weight - 1.0 if weight_mode == CONSTANT else None,
        )


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray | None
    terminal: bool


class ReplayBuffer:
    """Bounded FIFO of transitions backed by preallocated arrays."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.state_dim = state_dim
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, tr: Transition) -> None:
        i = self._next
        self.states[i] = tr.state
        self.actions[i] = tr.action
        self.rewards[i] = tr.reward
        self.terminal[i] = tr.terminal
        self.next_states[i] = 0.0 if tr.next_state is None else tr.next_state
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _get(self, i: int) -> Transition:
        term = bool(self.terminal[i])
        return Transition(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          None if term else self.next_states[i].copy(), term)

    def entries(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = (self._next - self._size) % self.capacity
        return [self._get((start + j) % self.capacity) for j in range(self._size)]

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self._size < n:
            raise InsufficientSamples(f"buffer holds {self._size} transitions, {n} requested")
        return rng.integers(0, self._size, size=n)


def replay_sample(buffer: ReplayBuffer, n: int, rng: np.random.Generator) -> list[Transition]:
    """``n`` transitions drawn uniformly with replacement."""
    return [buffer._get(int(i)) for i in buffer.sample_indices(n, rng)]


def dqn_select_action(net: nn.Network | None, state, epsilon: float, rng: np.random.Generator,
                      q_values=None) -> int:
    """Epsilon-greedy over the network's Q-values; ties go to the lowest index.

    ``q_values`` may be given directly instead of evaluating ``net``.
    """
    n = net.output_dim if net is not None else len(q_values)
    if epsilon > 0 and rng.random() < epsilon:
        return int(rng.integers(n))
    q = nn.forward(net, state) if q_values is None else np.asarray(q_values)
    return int(np.argmax(q))


@dataclass
class DqnResult:
    net: nn.Network
    reward_history: list[float]
    encoder: StateEncoder
    config: DqnConfig
    weight_mode: str
    bitrates: tuple[float, ...]
    k: int = 2
    h: int = 3


def _train_instance(net, target, opt, buf, cfg, rng) -> None:
    n = cfg.batch_size
    rows = np.arange(n)
    for _ in range(cfg.batches_per_update):
        idx = buf.sample_indices(n, rng)
        s, a = buf.states[idx], buf.actions[idx]
        r = buf.rewards[idx] * cfg.reward_scale
        q_next = nn.forward(target, buf.next_states[idx]).max(axis=1)
        y = r + cfg.gamma * q_next * ~buf.terminal[idx]
        acts = nn.forward_trace(net, s)
        grad = np.zeros_like(acts[-1])
        grad[rows, a] = 2.0 * (acts[-1][rows, a] - y) / n
        opt.step(net, nn.backward(net, s, grad, acts))
    nn.soft_update(target, net, cfg.target_mix)


def dqn_train(env_factory: Callable[[int], Environment], config: DqnConfig = DqnConfig(),
              weight_mode: str = COI, constant_weight: float = 2.0,
              progress: Callable[[int, float], None] | None = None) -> DqnResult:
    """Train a Q-network over ``config.sessions`` sessions from ``env_factory(i)``.

    Each chunk: epsilon-greedy action, environment step, store the
    transition, then (once the replay buffer holds a full batch) one
    training instance of ``batches_per_update`` mini-batches followed by a
    soft target update. ``reward_history`` holds each session's undiscounted
    reward total under the training weights.
    """
    config.validate()
    if weight_mode not in (COI, CONSTANT):
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    init_rng, explore_rng, sample_rng = (np.random.default_rng(s) for s in seeds)

    probe = env_factory(0)
    encoder = StateEncoder.for_env(probe, weight_mode, constant_weight)
    bitrates = probe.manifest.bitrates
    state_dim = len(encoder(probe.observe()))
    net = nn.init_network([state_dim, *config.hidden, len(bitrates)], rng=init_rng)
    target = net.copy()
    opt = nn.OptimizerState(config.optimizer, config.learning_rate)
    buf = ReplayBuffer(config.replay_capacity, state_dim)

    history = []
    for session in range(config.sessions):
        env = probe if session == 0 else env_factory(session)
        if env.manifest.bitrates != bitrates:
            raise ValueError("all training sessions must share one bitrate ladder")
        if weight_mode == CONSTANT:
            env.params = replace(env.params, weight_map=ConstantWeight(constant_weight))
        obs = env.reset()
        limit = env.manifest.num_chunks
        if config.chunks_per_session is not None:
            limit = min(limit, config.chunks_per_session)
        total = 0.0
        s = encoder(obs)
        for t in range(limit):
            a = dqn_select_action(net, s, config.epsilon, explore_rng)
            out = env.step(bitrates[a])
            total += out.reward
            terminal = out.terminal or t == limit - 1
            s_next = None if terminal else encoder(out.next_observation)
            buf.push(Transition(s, a, out.reward, s_next, terminal))
            if len(buf) >= config.batch_size:
                _train_instance(net, target, opt, buf, config, sample_rng)
            s = s_next
        history.append(total)
        if progress is not None:
            progress(session, total)
    return DqnResult(net, history, encoder, config, weight_mode, tuple(bitrates),
                     probe.config.k, probe.config.h)


class DqnPolicy:
    """Greedy (or epsilon-greedy) policy over a trained Q-network."""

    def __init__(self, net: nn.Network, encoder: StateEncoder, bitrates, name: str = "dqn",
                 epsilon: float = 0.0, seed: int = 0):
        self.net = net
        self.encoder = encoder
        self.bitrates = tuple(bitrates)
        self.name = name
        self.epsilon = epsilon
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    @classmethod
    def from_result(cls, result: DqnResult, name: str | None = None) -> "DqnPolicy":
        return cls(result.net, result.encoder, result.bitrates, name or result.weight_mode)

    def reset(self) -> None:
        self.rng = np.random.default_rng(self.seed)

    def q_values(self, obs: StateObservation) -> np.ndarray:
        return nn.forward(self.net, self.encoder(obs))

    def select(self, obs: StateObservation, env: Environment | None = None) -> float:
        a = dqn_select_action(None, None, self.epsilon, self.rng, q_values=self.q_values(obs))
        return self.bitrates[a]


def save_agent(result: DqnResult, path: str) -> tuple[str, str]:
    """Write ``<path>.json`` (network) and ``<path>.agent.json`` (sidecar)."""
    net_path, meta_path = f"{path}.json", f"{path}.agent.json"
    nn.save_network(result.net, net_path)
    meta = {
        "network": os.path.basename(net_path),
        "normalization": asdict(result.encoder),
        "k": result.k,
        "h": result.h,
        "bitrates_kbps": list(result.bitrates),
        "weight_mode": result.weight_mode,
        "config": {**asdict(result.config), "hidden": list(result.config.hidden)},
    }
    with open(meta_path, "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)
    return net_path, meta_path


def load_agent(path: str, name: str | None = None) -> DqnPolicy:
    meta_path = path if path.endswith(".agent.json") else f"{path}.agent.json"
    with open(meta_path) as f:
        meta = json.load(f)
    net = nn.load_network(os.path.join(os.path.dirname(meta_path), meta["network"]))
    return DqnPolicy(net, StateEncoder(**meta["normalization"]), meta["bitrates_kbps"],
                     name or meta["weight_mode"])
