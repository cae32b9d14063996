"""Experiment configuration and the glue shared by the CLI and the acceptance suite."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .agents import BbaPolicy, DqnConfig, DqnPolicy, MpcPolicy, RbaPolicy, load_agent
from .eval import SessionMetrics, run_session
from .media import ManifestConfig, VideoManifest, generate_manifest, load_manifest
from .sim import Environment, RewardParams, SimConfig
from .trace import BandwidthTrace, TraceProfile, generate_synthetic_trace, load_trace

BASELINES = ("bba", "rba", "mpc")
LEARNED = ("coi", "constant")
ALL_METHODS = BASELINES + LEARNED


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RewardSettings:
    alpha: float = 3000.0
    beta: float = 1.0
    gamma: float = 0.8

    def params(self) -> RewardParams:
        return RewardParams(self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class ExperimentConfig:
    traces_dir: str | None = None
    manifest_path: str | None = None
    out_dir: str = "out"
    methods: tuple[str, ...] = ALL_METHODS
    sessions: int = 40
    seed: int = 0
    trace_profile: TraceProfile = TraceProfile()
    manifest: ManifestConfig = ManifestConfig()
    # manifest used for training sessions; chunk count typically shorter
    train_manifest: ManifestConfig = ManifestConfig(num_chunks=50)
    sim: SimConfig = SimConfig()
    reward: RewardSettings = RewardSettings()
    dqn: DqnConfig = DqnConfig()
    coi_agent: str | None = None
    constant_agent: str | None = None


_NESTED = {
    "trace_profile": TraceProfile,
    "manifest": ManifestConfig,
    "train_manifest": ManifestConfig,
    "sim": SimConfig,
    "reward": RewardSettings,
    "dqn": DqnConfig,
}


def _build(cls, data: dict):
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kwargs[k] = v
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{cls.__name__}: {e}") from None


def config_from_dict(doc: dict, base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    updates = {}
    for k, v in doc.items():
        if k in _NESTED:
            if not isinstance(v, dict):
                raise ConfigError(f"{k} must be an object")
            current = asdict(getattr(base, k))
            current.update(v)
            updates[k] = _build(_NESTED[k], current)
        elif k in {f.name for f in fields(ExperimentConfig)}:
            updates[k] = tuple(v) if isinstance(v, list) else v
        else:
            raise ConfigError(f"unknown config key {k!r}")
    cfg = replace(base, **updates)
    validate_config(cfg)
    return cfg


def load_config(path: str | None, base: ExperimentConfig = ExperimentConfig()) -> ExperimentConfig:
    if path is None:
        return base
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON: {e}") from None
    return config_from_dict(doc, base)


def validate_config(cfg: ExperimentConfig) -> None:
    bad = [m for m in cfg.methods if m not in ALL_METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {list(ALL_METHODS)}")
    if cfg.sessions < 1:
        raise ConfigError("sessions must be >= 1")
    try:
        cfg.trace_profile.validate()
        cfg.manifest.validate()
        cfg.train_manifest.validate()
        cfg.dqn.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from None


class SessionSource:
    """Deterministic (manifest, trace) pairs for session ``i`` of a given stream.

    ``stream`` separates training from evaluation draws under one seed.
    """

    def __init__(self, cfg: ExperimentConfig, stream: str = "eval"):
        self.cfg = cfg
        self.stream = stream
        self._salt = {"eval": 1, "train": 2}[stream]
        self.traces = _read_traces(cfg.traces_dir) if cfg.traces_dir else None
        self.manifest = None
        if cfg.manifest_path:
            with open(cfg.manifest_path) as f:
                self.manifest = load_manifest(f)

    def _rng(self, i: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, self._salt, i])

    def seed_for(self, i: int, what: int) -> int:
        return int(np.random.SeedSequence([self.cfg.seed, self._salt, i, what]).generate_state(1)[0])

    def trace(self, i: int) -> BandwidthTrace:
        if self.traces:
            return self.traces[int(self._rng(i).integers(len(self.traces)))]
        return generate_synthetic_trace(self.cfg.trace_profile, self.seed_for(i, 0), name=f"{self.stream}-{i}")

    def manifest_for(self, i: int) -> VideoManifest:
        if self.manifest is not None:
            return self.manifest
        mcfg = self.cfg.manifest if self.stream == "eval" else self.cfg.train_manifest
        return generate_manifest(mcfg, self.seed_for(i, 1), name=f"{self.stream}-{i}")

    def env(self, i: int, params: RewardParams | None = None) -> Environment:
        return Environment(self.manifest_for(i), self.trace(i), params or self.cfg.reward.params(), self.cfg.sim)


def _read_traces(path: str) -> list[BandwidthTrace]:
    if not os.path.isdir(path):
        raise ConfigError(f"traces directory not found: {path}")
    names = sorted(n for n in os.listdir(path) if n.endswith(".csv"))
    if not names:
        raise ConfigError(f"no .csv traces in {path}")
    out = []
    for n in names:
        with open(os.path.join(path, n)) as f:
            out.append(load_trace(f, name=n[:-4]))
    return out


def make_policy(method: str, cfg: ExperimentConfig, agents: dict[str, DqnPolicy] | None = None):
    if method == "bba":
        return BbaPolicy()
    if method == "rba":
        return RbaPolicy()
    if method == "mpc":
        return MpcPolicy()
    agents = agents or {}
    if method in agents:
        return agents[method]
    path = cfg.coi_agent if method == "coi" else cfg.constant_agent
    if path is None:
        raise ConfigError(f"method {method!r} needs a trained agent checkpoint")
    if not os.path.exists(path if path.endswith(".agent.json") else f"{path}.agent.json"):
        raise ConfigError(f"agent checkpoint not found: {path}")
    return load_agent(path, name=method)


def evaluate_methods(cfg: ExperimentConfig, agents: dict[str, DqnPolicy] | None = None,
                     ) -> list[tuple[str, int, SessionMetrics]]:
    """Every method on the same ``cfg.sessions`` evaluation sessions, ordered by (method, session)."""
    source = SessionSource(cfg, "eval")
    pairs = [(source.manifest_for(i), source.trace(i)) for i in range(cfg.sessions)]
    params = cfg.reward.params()
    runs = []
    for method in cfg.methods:
        policy = make_policy(method, cfg, agents)
        for i, (m, tr) in enumerate(pairs):
            runs.append((method, i, run_session(policy, m, tr, params, cfg.sim)))
    return runs
