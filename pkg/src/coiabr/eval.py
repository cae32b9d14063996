"""Session runner, per-method aggregation, and interest/bitrate analyses."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .media import VideoManifest
from .sim import ChunkLogEntry, Environment, RewardParams, SimConfig
from .trace import BandwidthTrace

METRICS = ("total_rebuffer", "average_bitrate", "bitrate_variation", "cumulative_reward")
TABLE_ROWS = (
    ("Average Rebuffering Time (s)", "total_rebuffer", "mean"),
    ("Standard Deviation of Rebuffering Time (s)", "total_rebuffer", "std"),
    ("Average Bitrate (kbps)", "average_bitrate", "mean"),
    ("Standard Deviation of Average Bitrate (kbps)", "average_bitrate", "std"),
    ("Bitrate Variation (kbps/chunk)", "bitrate_variation", "mean"),
    ("Standard Deviation of Bitrate Variation (kbps/chunk)", "bitrate_variation", "std"),
)
INTEREST_BIN_EDGES = (1.0, 1.4, 1.8, 2.2, 2.6, 3.0)


@dataclass
class SessionMetrics:
    total_rebuffer: float
    average_bitrate: float
    bitrate_variation: float
    cumulative_reward: float
    chunk_log: list[ChunkLogEntry] = field(default_factory=list)

    @classmethod
    def from_log(cls, log: list[ChunkLogEntry]) -> "SessionMetrics":
        if not log:
            raise ValueError("empty chunk log")
        rates = np.array([e.bitrate for e in log])
        variation = float(np.mean(np.abs(np.diff(rates)))) if len(rates) > 1 else 0.0
        return cls(
            total_rebuffer=float(sum(e.rebuffer for e in log)),
            average_bitrate=float(rates.mean()),
            bitrate_variation=variation,
            cumulative_reward=float(sum(e.reward for e in log)),
            chunk_log=list(log),
        )

    def to_dict(self, with_log: bool = True) -> dict:
        d = {m: getattr(self, m) for m in METRICS}
        if with_log:
            d["chunk_log"] = [
                {"index": e.index, "bitrate": e.bitrate, "weight": e.weight, "rebuffer": e.rebuffer,
                 "download_time": e.download_time, "wait_time": e.wait_time, "reward": e.reward}
                for e in self.chunk_log
            ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SessionMetrics":
        log = [ChunkLogEntry(e["index"], e["bitrate"], e["weight"], e["rebuffer"], e["download_time"],
                             e["wait_time"], e["reward"]) for e in d.get("chunk_log", [])]
        return cls(*(d[m] for m in METRICS), chunk_log=log)


def run_session(policy, manifest: VideoManifest, trace: BandwidthTrace,
                params: RewardParams = RewardParams(), config: SimConfig = SimConfig()) -> SessionMetrics:
    """Drive one session to the end under ``policy``."""
    env = Environment(manifest, trace, params, config)
    policy.reset()
    obs = env.observe()
    while obs is not None:
        obs = env.step(policy.select(obs, env)).next_observation
    return SessionMetrics.from_log(env.log)


def ecdf(values) -> list[tuple[float, float]]:
    """``(x, P[X <= x])`` at each distinct sample value."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) == 0:
        return []
    xs, counts = np.unique(v, return_counts=True)
    return list(zip(xs.tolist(), (np.cumsum(counts) / len(v)).tolist()))


def ecdf_at(values, x: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(np.count_nonzero(v <= x) / len(v))


@dataclass
class Summary:
    methods: list[str]
    # method -> metric -> {"mean", "std", "n"}
    stats: dict[str, dict[str, dict[str, float]]]
    # method -> metric -> [(x, F(x)), ...]
    ecdfs: dict[str, dict[str, list[tuple[float, float]]]]

    def to_dict(self) -> dict:
        return {
            "methods": self.methods,
            "stats": self.stats,
            "ecdfs": {m: {k: [list(p) for p in pts] for k, pts in e.items()} for m, e in self.ecdfs.items()},
        }

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", *self.methods])
        for label, metric, kind in TABLE_ROWS:
            w.writerow([label, *(repr(self.stats[m][metric][kind]) for m in self.methods)])
        return buf.getvalue()

    def ecdf_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "metric", "x", "cdf"])
        for m in self.methods:
            for metric in ("average_bitrate", "total_rebuffer", "bitrate_variation"):
                for x, f in self.ecdfs[m][metric]:
                    w.writerow([m, metric, repr(x), repr(f)])
        return buf.getvalue()


def summarize_sessions(runs) -> Summary:
    """Per-method population mean/std of every session metric, plus ECDFs.

    Methods keep their first-appearance order.
    """
    runs = list(runs)
    if not runs:
        raise ValueError("no sessions to summarize")
    grouped: dict[str, list[SessionMetrics]] = defaultdict(list)
    for method, metrics in runs:
        grouped[method].append(metrics)
    out_stats, out_ecdf = {}, {}
    for method, sessions in grouped.items():
        out_stats[method] = {}
        out_ecdf[method] = {}
        for metric in METRICS:
            v = np.array([getattr(s, metric) for s in sessions])
            out_stats[method][metric] = {"mean": float(v.mean()), "std": float(v.std()), "n": len(v)}
            out_ecdf[method][metric] = ecdf(v)
    return Summary(list(grouped), out_stats, out_ecdf)


def correlation_suite(pairs) -> dict:
    """Pearson, Spearman and Kendall's tau between interest weight and bitrate.

    Coefficients are None (and ``defined`` False) when either variable is
    constant.
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least 2 pairs")
    x = np.array([p[0] for p in pairs], dtype=float)
    y = np.array([p[1] for p in pairs], dtype=float)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return {"pearson": None, "spearman": None, "kendall_tau": None, "defined": False, "n": len(pairs)}
    return {
        "pearson": _clip(stats.pearsonr(x, y)[0]),
        "spearman": _clip(stats.spearmanr(x, y)[0]),
        "kendall_tau": _clip(stats.kendalltau(x, y)[0]),
        "defined": True,
        "n": len(pairs),
    }


def _clip(r) -> float:
    r = float(r)
    return r if math.isnan(r) else min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class InterestBin:
    lo: float
    hi: float
    count: int
    mean_bitrate: float | None

    @property
    def empty(self) -> bool:
        return self.count == 0


def bin_by_interest_level(pairs) -> list[InterestBin]:
    """Mean bitrate per weight bin ``[1.0,1.4) ... [2.6,3.0]``."""
    edges = INTEREST_BIN_EDGES
    sums = [0.0] * (len(edges) - 1)
    counts = [0] * (len(edges) - 1)
    for w, b in pairs:
        if not edges[0] <= w <= edges[-1]:
            raise ValueError(f"weight {w} outside [{edges[0]}, {edges[-1]}]")
        i = min(int(np.searchsorted(edges, w, side="right")) - 1, len(counts) - 1)
        sums[i] += b
        counts[i] += 1
    return [
        InterestBin(edges[i], edges[i + 1], counts[i], sums[i] / counts[i] if counts[i] else None)
        for i in range(len(counts))
    ]


def weight_bitrate_pairs(sessions) -> list[tuple[float, float]]:
    return [(e.weight, e.bitrate) for s in sessions for e in s.chunk_log]


def bins_csv(bins_by_method: dict[str, list[InterestBin]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "bin_lo", "bin_hi", "count", "mean_bitrate_kbps"])
    for m, bins in bins_by_method.items():
        for b in bins:
            w.writerow([m, b.lo, b.hi, b.count, "" if b.empty else repr(b.mean_bitrate)])
    return buf.getvalue()


def correlations_csv(corr_by_method: dict[str, dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "pearson", "spearman", "kendall_tau", "defined", "n"])
    for m, c in corr_by_method.items():
        w.writerow([m, *("" if c[k] is None else repr(c[k]) for k in ("pearson", "spearman", "kendall_tau")),
                    c["defined"], c["n"]])
    return buf.getvalue()
