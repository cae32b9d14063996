"""Bandwidth traces: CSV ingestion, synthetic generation, throughput prediction."""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

DEFAULT_COLD_START_KBPS = 350.0
DEFAULT_HISTORY_WINDOW = 5


class TraceError(ValueError):
    """Base class for trace parsing errors. ``line`` is 1-based, or None."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyTrace(TraceError):
    pass


class NonMonotoneTime(TraceError):
    pass


class NonPositiveThroughput(TraceError):
    pass


class MalformedLine(TraceError):
    pass


@dataclass(frozen=True)
class BandwidthTrace:
    """Piecewise-constant throughput timeline.

    Throughput ``kbps[i]`` holds on ``[times[i], times[i+1])``; the last
    value holds forever.
    """

    times: np.ndarray
    kbps: np.ndarray
    name: str = "trace"
    # cumulative kilobits delivered at each sample time
    _cum_kbit: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        kbps = np.asarray(self.kbps, dtype=float)
        if times.ndim != 1 or times.shape != kbps.shape:
            raise TraceError("times and throughputs must be 1-D and equally long")
        if len(times) == 0:
            raise EmptyTrace("trace has no samples")
        if times[0] != 0:
            raise NonMonotoneTime("first timestamp must be 0", 1)
        bad = np.flatnonzero(np.diff(times) <= 0)
        if len(bad):
            raise NonMonotoneTime("timestamps must be strictly increasing", int(bad[0]) + 2)
        bad = np.flatnonzero(~(kbps > 0) | ~np.isfinite(kbps))
        if len(bad):
            raise NonPositiveThroughput("throughput must be positive", int(bad[0]) + 1)
        times.flags.writeable = False
        kbps.flags.writeable = False
        cum = np.concatenate([[0.0], np.cumsum(np.diff(times) * kbps[:-1])])
        cum.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "kbps", kbps)
        object.__setattr__(self, "_cum_kbit", cum)

    def __eq__(self, other):
        if not isinstance(other, BandwidthTrace):
            return NotImplemented
        return (
            self.name == other.name
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.kbps, other.kbps)
        )

    __hash__ = None

    def __len__(self):
        return len(self.times)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.kbps.tolist()))

    def throughput_at(self, t: float) -> float:
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.kbps[max(i, 0)])

    def delivered(self, t: float) -> float:
        """Kilobits delivered on ``[0, t]``."""
        i = max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)
        return float(self._cum_kbit[i] + (t - self.times[i]) * self.kbps[i])

    def time_to_deliver(self, start: float, size_kbit: float) -> float:
        """Smallest ``d`` with ``delivered(start + d) - delivered(start) == size_kbit``."""
        target = self.delivered(start) + size_kbit
        # first sample boundary where cumulative delivery reaches the target
        j = int(np.searchsorted(self._cum_kbit, target, side="left"))
        i = max(j - 1, 0)
        end = self.times[i] + (target - self._cum_kbit[i]) / self.kbps[i]
        return float(end - start)


def load_trace(source, name: str = "trace") -> BandwidthTrace:
    """Parse ``time_s,throughput_kbps`` CSV from text, bytes, or a file object.

    A leading header line is skipped when its first field is not numeric.
    Blank lines are ignored.
    """
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        source = io.StringIO(source)
    times: list[float] = []
    rates: list[float] = []
    first = True
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode()
        line = raw.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if first:
            first = False
            if not _is_number(parts[0]):
                continue
        if len(parts) != 2:
            raise MalformedLine(f"expected 2 fields, got {len(parts)}", lineno)
        try:
            t, v = float(parts[0]), float(parts[1])
        except ValueError:
            raise MalformedLine(f"non-numeric field in {line!r}", lineno) from None
        if not (np.isfinite(t) and np.isfinite(v)):
            raise MalformedLine(f"non-finite field in {line!r}", lineno)
        if not times and t != 0:
            raise NonMonotoneTime("first timestamp must be 0", lineno)
        if times and t <= times[-1]:
            raise NonMonotoneTime(f"timestamp {t} does not increase", lineno)
        if v <= 0:
            raise NonPositiveThroughput(f"throughput {v} is not positive", lineno)
        times.append(t)
        rates.append(v)
    if not times:
        raise EmptyTrace("trace has no samples")
    return BandwidthTrace(np.array(times), np.array(rates), name=name)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def serialize_trace(trace: BandwidthTrace) -> str:
    return "".join(f"{t!r},{v!r}\n" for t, v in trace.samples)


@dataclass
class ThroughputHistory:
    """Most recent per-chunk measured throughputs, bounded by ``window``."""

    window: int = DEFAULT_HISTORY_WINDOW
    recent: deque = field(default_factory=deque)

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        self.recent = deque(self.recent, maxlen=self.window)

    def append(self, kbps: float) -> None:
        self.recent.append(float(kbps))

    def __len__(self):
        return len(self.recent)

    def copy(self) -> "ThroughputHistory":
        return ThroughputHistory(self.window, deque(self.recent))


def harmonic_mean(values: Iterable[float]) -> float:
    v = np.asarray(list(values), dtype=float)
    return float(len(v) / np.sum(1.0 / v))


def predict_throughput(
    history: ThroughputHistory | Iterable[float],
    k: int = 1,
    cold_start: float = DEFAULT_COLD_START_KBPS,
    window: int = DEFAULT_HISTORY_WINDOW,
) -> np.ndarray:
    """Harmonic mean of the recent history, replicated ``k`` times."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if isinstance(history, ThroughputHistory):
        values = list(history.recent)[-history.window:]
    else:
        values = list(history)[-window:]
    estimate = harmonic_mean(values) if values else float(cold_start)
    return np.full(k, estimate)


@dataclass(frozen=True)
class TraceProfile:
    mean_kbps: float = 2000.0
    amplitude_kbps: float = 1000.0
    segment_s: float = 5.0
    duration_s: float = 1200.0

    def validate(self) -> None:
        if not (self.mean_kbps > self.amplitude_kbps >= 0):
            raise ValueError("profile requires mean > amplitude >= 0")
        if not (self.segment_s > 0 and self.duration_s > 0):
            raise ValueError("profile durations must be positive")


def generate_synthetic_trace(profile: TraceProfile, seed: int, name: str | None = None) -> BandwidthTrace:
    """Piecewise-constant trace, each segment uniform on mean +/- amplitude."""
    profile.validate()
    rng = np.random.default_rng(seed)
    n = max(int(np.ceil(profile.duration_s / profile.segment_s)), 1)
    times = np.arange(n) * profile.segment_s
    lo = profile.mean_kbps - profile.amplitude_kbps
    hi = profile.mean_kbps + profile.amplitude_kbps
    kbps = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, profile.mean_kbps)
    return BandwidthTrace(times, kbps, name=name or f"synthetic-{seed}")
