"""Video manifests: bitrate ladder, per-chunk sizes and interestingness."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_BITRATES_KBPS = (350.0, 600.0, 1000.0, 2000.0, 3000.0)
DEFAULT_CHUNK_DURATION_S = 4.0
INTEREST_MIN = 1.0
INTEREST_MAX = 5.0


class ManifestError(ValueError):
    def __init__(self, message: str, chunk: int | None = None, field_name: str | None = None):
        self.chunk = chunk
        self.field = field_name
        where = []
        if chunk is not None:
            where.append(f"chunk {chunk}")
        if field_name is not None:
            where.append(field_name)
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class SchemaError(ManifestError):
    pass


class SizeArityMismatch(ManifestError):
    pass


class InterestOutOfRange(ManifestError):
    pass


class InvalidSize(ManifestError):
    pass


class InvalidBitrates(ManifestError):
    pass


@dataclass(frozen=True)
class ChunkRecord:
    index: int
    sizes: tuple[float, ...]
    interestingness: float


@dataclass(frozen=True)
class VideoManifest:
    chunk_duration: float
    bitrates: tuple[float, ...]
    chunks: tuple[ChunkRecord, ...]
    name: str = "video"
    # (num_chunks, num_bitrates) view of chunk sizes, kbit
    size_table: np.ndarray = field(init=False, repr=False, compare=False)
    interest: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bitrates", tuple(float(b) for b in self.bitrates))
        object.__setattr__(self, "chunks", tuple(self.chunks))
        validate_manifest(self)
        sizes = np.array([c.sizes for c in self.chunks], dtype=float)
        interest = np.array([c.interestingness for c in self.chunks], dtype=float)
        sizes.flags.writeable = False
        interest.flags.writeable = False
        object.__setattr__(self, "size_table", sizes)
        object.__setattr__(self, "interest", interest)

    @property
    def num_chunks(self) -> int:
        return len(self.chunks)

    @property
    def duration(self) -> float:
        return self.num_chunks * self.chunk_duration

    def chunk_size(self, index: int, bitrate: float) -> float:
        return float(self.size_table[index, self.bitrate_index(bitrate)])

    def bitrate_index(self, bitrate: float) -> int:
        try:
            return self.bitrates.index(float(bitrate))
        except ValueError:
            raise ValueError(f"bitrate {bitrate} not in ladder {self.bitrates}") from None

    def with_interest(self, values) -> "VideoManifest":
        values = list(values)
        if len(values) != self.num_chunks:
            raise ValueError("one interestingness value per chunk required")
        chunks = [replace(c, interestingness=float(v)) for c, v in zip(self.chunks, values)]
        return replace(self, chunks=tuple(chunks))


def validate_manifest(m: VideoManifest) -> None:
    if not (m.chunk_duration > 0):
        raise SchemaError("must be positive", field_name="chunk_duration_s")
    b = m.bitrates
    if not b:
        raise InvalidBitrates("ladder is empty", field_name="bitrates_kbps")
    if any(not (x > 0) for x in b) or any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
        raise InvalidBitrates("must be positive and strictly ascending", field_name="bitrates_kbps")
    if not m.chunks:
        raise SchemaError("manifest has no chunks", field_name="chunks")
    for i, c in enumerate(m.chunks):
        if len(c.sizes) != len(b):
            raise SizeArityMismatch(f"{len(c.sizes)} sizes for {len(b)} bitrates", i, "sizes_kbit")
        if any(not (s > 0) for s in c.sizes):
            raise InvalidSize("sizes must be positive", i, "sizes_kbit")
        if any(c.sizes[j] > c.sizes[j + 1] for j in range(len(b) - 1)):
            raise InvalidSize("sizes must be nondecreasing in bitrate", i, "sizes_kbit")
        if not (INTEREST_MIN <= c.interestingness <= INTEREST_MAX):
            raise InterestOutOfRange(f"{c.interestingness} outside [1, 5]", i, "interestingness")


def manifest_from_dict(doc: dict) -> VideoManifest:
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be a JSON object")
    for key in ("chunk_duration_s", "bitrates_kbps", "chunks"):
        if key not in doc:
            raise SchemaError("missing", field_name=key)
    try:
        duration = float(doc["chunk_duration_s"])
        bitrates = tuple(float(x) for x in doc["bitrates_kbps"])
    except (TypeError, ValueError):
        raise SchemaError("expected numbers") from None
    if not isinstance(doc["chunks"], list):
        raise SchemaError("must be a list", field_name="chunks")
    chunks = []
    for i, c in enumerate(doc["chunks"]):
        if not isinstance(c, dict) or "sizes_kbit" not in c or "interestingness" not in c:
            raise SchemaError("needs sizes_kbit and interestingness", chunk=i)
        try:
            sizes = tuple(float(x) for x in c["sizes_kbit"])
            interest = float(c["interestingness"])
        except (TypeError, ValueError):
            raise SchemaError("expected numbers", chunk=i) from None
        chunks.append(ChunkRecord(i, sizes, interest))
    return VideoManifest(duration, bitrates, tuple(chunks), name=str(doc.get("name", "video")))


def load_manifest(source) -> VideoManifest:
    """Parse the JSON manifest format from text, bytes, or a file object."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode()
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    return manifest_from_dict(doc)


def manifest_to_dict(m: VideoManifest) -> dict:
    return {
        "name": m.name,
        "chunk_duration_s": m.chunk_duration,
        "bitrates_kbps": list(m.bitrates),
        "chunks": [
            {"sizes_kbit": list(c.sizes), "interestingness": c.interestingness} for c in m.chunks
        ],
    }


def serialize_manifest(m: VideoManifest) -> str:
    return json.dumps(manifest_to_dict(m), indent=1)


def apply_annotations(m: VideoManifest, source) -> VideoManifest:
    """Override interestingness from a ``chunk_index,interestingness`` CSV sidecar."""
    if isinstance(source, bytes):
        source = source.decode()
    if isinstance(source, str):
        source = io.StringIO(source)
    values = list(m.interest)
    for row in csv.reader(source):
        if not row or not row[0].strip():
            continue
        try:
            idx, val = int(row[0]), float(row[1])
        except (ValueError, IndexError):
            continue  # header
        if not 0 <= idx < m.num_chunks:
            raise SchemaError(f"annotation for unknown chunk {idx}")
        values[idx] = val
    return m.with_interest(values)


@dataclass(frozen=True)
class ManifestConfig:
    num_chunks: int = 200
    chunk_duration: float = DEFAULT_CHUNK_DURATION_S
    bitrates: tuple[float, ...] = DEFAULT_BITRATES_KBPS
    size_noise: float = 0.0
    interest_alpha: float = 2.0
    interest_beta: float = 5.0
    # chunks per interest segment; 1 draws every chunk independently
    scene_length: int = 5

    def validate(self) -> None:
        if self.num_chunks < 1:
            raise ValueError("num_chunks must be >= 1")
        if not self.chunk_duration > 0:
            raise ValueError("chunk_duration must be positive")
        if not 0 <= self.size_noise < 0.5:
            raise ValueError("size_noise must be in [0, 0.5)")
        if not (self.interest_alpha > 0 and self.interest_beta > 0):
            raise ValueError("interest distribution parameters must be positive")
        if self.scene_length < 1:
            raise ValueError("scene_length must be >= 1")


def generate_manifest(config: ManifestConfig, seed: int, name: str | None = None) -> VideoManifest:
    """Synthetic manifest with Beta-distributed interestingness scaled to [1, 5].

    One size-noise factor is drawn per chunk and shared across bitrates so
    sizes stay monotone in bitrate.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    n = config.num_chunks
    eta = rng.uniform(-config.size_noise, config.size_noise, size=n) if config.size_noise else np.zeros(n)
    scenes = -(-n // config.scene_length)
    draws = rng.beta(config.interest_alpha, config.interest_beta, size=scenes)
    interest = INTEREST_MIN + (INTEREST_MAX - INTEREST_MIN) * np.repeat(draws, config.scene_length)[:n]
    bitrates = np.asarray(config.bitrates, dtype=float)
    chunks = []
    for i in range(n):
        sizes = bitrates * config.chunk_duration * (1.0 + eta[i])
        chunks.append(ChunkRecord(i, tuple(sizes.tolist()), float(interest[i])))
    return VideoManifest(
        config.chunk_duration, tuple(bitrates.tolist()), tuple(chunks), name=name or f"synthetic-{seed}"
    )
