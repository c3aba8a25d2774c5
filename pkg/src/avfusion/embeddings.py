"""Binary embedding store (AVFE format).

One file holds the embeddings of a single modality. Layout, all little-endian::

    magic  "AVFE" (4 bytes)
    u32    version        (= 1)
    u8     modality       (0 = audio, 1 = video)
    u32    dim
    u64    count
    count * [ u16 id_length, id bytes (UTF-8), dim * f32 ]

The format is bit-exact so files written by other implementations of the
same contract (e.g. the embedding exporter) load without conversion.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorruptHeader, DimMismatch, MissingEmbedding, TruncatedFile

MAGIC = b"AVFE"
VERSION = 1
_HEADER = struct.Struct("<4sIBIQ")


class Modality(enum.IntEnum):
    AUDIO = 0
    VIDEO = 1


@dataclass(frozen=True)
class EmbeddingRecord:
    """Fixed-length feature vector for one clip in one modality."""

    clip_id: str
    modality: Modality
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 1 or values.size == 0:
            raise DimMismatch(f"clip {self.clip_id}: values must be a non-empty 1-D vector")
        if not np.all(np.isfinite(values)):
            raise DimMismatch(f"clip {self.clip_id}: embedding contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def write_embeddings(records: list[EmbeddingRecord], path: str | Path) -> None:
    """Write records of one modality to ``path``.

    All records must share modality and dim; one file holds exactly one
    modality because the header carries a single (modality, dim) pair.
    """
    if not records:
        raise DimMismatch("cannot write an empty record list")
    modality = records[0].modality
    dim = records[0].dim
    for r in records:
        if r.modality != modality:
            raise DimMismatch(f"clip {r.clip_id}: modality {r.modality.name} in a {modality.name} file")
        if r.dim != dim:
            raise DimMismatch(f"clip {r.clip_id}: dim {r.dim} != {dim}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, int(modality), dim, len(records)))
        for r in records:
            id_bytes = r.clip_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise DimMismatch(f"clip id too long: {r.clip_id[:32]}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(r.values.astype("<f4", copy=False).tobytes())


def read_embeddings(path: str | Path) -> list[EmbeddingRecord]:
    """Read an AVFE file back into records, verifying header and payload size."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"{path}: shorter than the fixed header")
    magic, version, modality_b, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CorruptHeader(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CorruptHeader(f"{path}: unsupported version {version}")
    try:
        modality = Modality(modality_b)
    except ValueError:
        raise CorruptHeader(f"{path}: unknown modality byte {modality_b}") from None
    records = []
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for _ in range(count):
        if offset + 2 > len(data):
            raise TruncatedFile(f"{path}: truncated record header")
        (id_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        if offset + id_len + vec_bytes > len(data):
            raise TruncatedFile(f"{path}: truncated record payload")
        clip_id = data[offset : offset + id_len].decode("utf-8")
        offset += id_len
        values = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        records.append(EmbeddingRecord(clip_id=clip_id, modality=modality, values=values))
    return records


def file_size_for(records: list[EmbeddingRecord]) -> int:
    """Exact on-disk byte count for ``records`` under the AVFE layout."""
    body = sum(2 + len(r.clip_id.encode("utf-8")) + 4 * r.dim for r in records)
    return _HEADER.size + body


class EmbeddingStore:
    """In-memory clip_id -> vector lookup per modality, loaded from AVFE files."""

    def __init__(self):
        self._vectors: dict[Modality, dict[str, np.ndarray]] = {}
        self._dims: dict[Modality, int] = {}

    @classmethod
    def from_files(cls, audio_path: str | Path | None = None, video_path: str | Path | None = None) -> "EmbeddingStore":
        store = cls()
        if audio_path is not None:
            store.add_records(read_embeddings(audio_path))
        if video_path is not None:
            store.add_records(read_embeddings(video_path))
        return store

    def add_records(self, records: list[EmbeddingRecord]) -> None:
        for r in records:
            known = self._dims.setdefault(r.modality, r.dim)
            if r.dim != known:
                raise DimMismatch(f"clip {r.clip_id}: dim {r.dim} != store dim {known}")
            self._vectors.setdefault(r.modality, {})[r.clip_id] = r.values

    def dim(self, modality: Modality) -> int:
        if modality not in self._dims:
            raise MissingEmbedding(f"store holds no {modality.name} embeddings")
        return self._dims[modality]

    def get(self, clip_id: str, modality: Modality) -> np.ndarray:
        table = self._vectors.get(modality, {})
        if clip_id not in table:
            raise MissingEmbedding(f"no {modality.name} embedding for clip {clip_id!r}")
        return table[clip_id]

    def ids(self, modality: Modality) -> list[str]:
        return list(self._vectors.get(modality, {}).keys())
