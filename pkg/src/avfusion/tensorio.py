"""Binary tensor files exchanged between pipeline stages.

All integers and floats are little-endian. Three formats:

log-mel tensor (one clip)::

    "AVLM" | u32 version=1 | u16 id_len | id | u32 n_frames | u32 n_mels | f32 cells

frame stack (one clip)::

    "AVFS" | u32 version=1 | u16 id_len | id | u32 T | u32 H | u32 W | u32 C | f32 cells

raw RGB frame dump (decoder adapter output)::

    "AVRF" | u32 version=1 | u32 n_frames | u32 H | u32 W | u8 cells (RGB)
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptHeader, TruncatedFile
from .video import FrameStack

LOGMEL_MAGIC = b"AVLM"
FRAMESTACK_MAGIC = b"AVFS"
RAWFRAMES_MAGIC = b"AVRF"
VERSION = 1


def _read_prefix(data: bytes, magic: bytes, path) -> int:
    if len(data) < 8 or data[:4] != magic:
        raise CorruptHeader(f"{path}: bad magic, expected {magic!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CorruptHeader(f"{path}: unsupported version {version}")
    return 8


def _read_id(data: bytes, offset: int, path) -> tuple[str, int]:
    if offset + 2 > len(data):
        raise TruncatedFile(f"{path}: truncated id field")
    (id_len,) = struct.unpack_from("<H", data, offset)
    offset += 2
    if offset + id_len > len(data):
        raise TruncatedFile(f"{path}: truncated id field")
    return data[offset : offset + id_len].decode("utf-8"), offset + id_len


def _read_f32(data: bytes, offset: int, shape: tuple[int, ...], path) -> np.ndarray:
    count = int(np.prod(shape))
    if offset + 4 * count > len(data):
        raise TruncatedFile(f"{path}: payload ends early")
    return np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape).copy()


def write_logmel(path: str | Path, clip_id: str, logmel: np.ndarray) -> None:
    logmel = np.asarray(logmel, dtype=np.float32)
    id_bytes = clip_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(LOGMEL_MAGIC)
        fh.write(struct.pack("<IH", VERSION, len(id_bytes)))
        fh.write(id_bytes)
        fh.write(struct.pack("<II", logmel.shape[0], logmel.shape[1]))
        fh.write(logmel.astype("<f4", copy=False).tobytes())


def read_logmel(path: str | Path) -> tuple[str, np.ndarray]:
    data = Path(path).read_bytes()
    offset = _read_prefix(data, LOGMEL_MAGIC, path)
    clip_id, offset = _read_id(data, offset, path)
    if offset + 8 > len(data):
        raise TruncatedFile(f"{path}: truncated shape header")
    n_frames, n_mels = struct.unpack_from("<II", data, offset)
    return clip_id, _read_f32(data, offset + 8, (n_frames, n_mels), path)


def write_framestack(path: str | Path, stack: FrameStack) -> None:
    tensor = stack.tensor.astype(np.float32)
    id_bytes = stack.clip_id.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(FRAMESTACK_MAGIC)
        fh.write(struct.pack("<IH", VERSION, len(id_bytes)))
        fh.write(id_bytes)
        fh.write(struct.pack("<IIII", *tensor.shape))
        fh.write(tensor.astype("<f4", copy=False).tobytes())


def read_framestack(path: str | Path) -> FrameStack:
    data = Path(path).read_bytes()
    offset = _read_prefix(data, FRAMESTACK_MAGIC, path)
    clip_id, offset = _read_id(data, offset, path)
    if offset + 16 > len(data):
        raise TruncatedFile(f"{path}: truncated shape header")
    shape = struct.unpack_from("<IIII", data, offset)
    tensor = _read_f32(data, offset + 16, shape, path)
    return FrameStack(tensor=np.clip(tensor, 0.0, 1.0), clip_id=clip_id)


def write_raw_frames(path: str | Path, frames: np.ndarray) -> None:
    frames = np.asarray(frames)
    if frames.dtype != np.uint8 or frames.ndim != 4 or frames.shape[3] != 3:
        raise CorruptHeader(f"raw frames must be uint8 (n, H, W, 3), got {frames.dtype} {frames.shape}")
    with open(path, "wb") as fh:
        fh.write(RAWFRAMES_MAGIC)
        fh.write(struct.pack("<IIII", VERSION, frames.shape[0], frames.shape[1], frames.shape[2]))
        fh.write(frames.tobytes())


def read_raw_frames(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 20 or data[:4] != RAWFRAMES_MAGIC:
        raise CorruptHeader(f"{path}: bad magic, expected {RAWFRAMES_MAGIC!r}")
    version, n, h, w = struct.unpack_from("<IIII", data, 4)
    if version != VERSION:
        raise CorruptHeader(f"{path}: unsupported version {version}")
    count = n * h * w * 3
    if 20 + count > len(data):
        raise TruncatedFile(f"{path}: payload ends early")
    return np.frombuffer(data, dtype=np.uint8, count=count, offset=20).reshape(n, h, w, 3).copy()
