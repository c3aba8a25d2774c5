"""Video frontend: center crop, bilinear resize to 224x224, [0, 1] scaling,
and uniform temporal sampling into fixed-length frame stacks.

Resizing uses the half-pixel (align-corners-off) convention:
``src = (dst + 0.5) * scale - 0.5`` with clamped bilinear sampling, so a
constant image stays constant and golden values are stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptySequence, ShapeMismatch

TARGET_SIZE = 224
DEFAULT_FRAME_COUNT = 32


@dataclass(frozen=True)
class RawFrameSequence:
    """Decoded 8-bit RGB frames of one clip, all sharing height and width."""

    frames: np.ndarray  # (n, H, W, 3) uint8
    fps: float
    clip_id: str

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or frames.shape[3] != 3 or frames.shape[0] == 0:
            raise ShapeMismatch(f"frames must be (n, H, W, 3) with n >= 1, got {frames.shape}")
        if frames.dtype != np.uint8:
            raise ShapeMismatch(f"frames must be uint8, got {frames.dtype}")
        if self.fps <= 0:
            raise ShapeMismatch(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return self.frames.shape[0]


@dataclass(frozen=True)
class FrameStack:
    """T x 224 x 224 x 3 float tensor with every value in [0, 1]."""

    tensor: np.ndarray
    clip_id: str

    def __post_init__(self):
        tensor = np.asarray(self.tensor, dtype=np.float64)
        if tensor.ndim != 4 or tensor.shape[1:] != (TARGET_SIZE, TARGET_SIZE, 3):
            raise ShapeMismatch(
                f"frame stack must be (T, {TARGET_SIZE}, {TARGET_SIZE}, 3), got {tensor.shape}"
            )
        if not np.all(np.isfinite(tensor)):
            raise ShapeMismatch("frame stack contains NaN or Inf")
        if tensor.size and (tensor.min() < 0.0 or tensor.max() > 1.0):
            raise ShapeMismatch("frame stack values must lie in [0, 1]")
        object.__setattr__(self, "tensor", tensor)

    @property
    def n_frames(self) -> int:
        return self.tensor.shape[0]


def center_square_crop(frame: np.ndarray) -> np.ndarray:
    """Crop to S = min(H, W), centered: offsets floor((H-S)/2), floor((W-S)/2)."""
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise ShapeMismatch(f"expected (H, W, 3) image, got {frame.shape}")
    h, w = frame.shape[:2]
    s = min(h, w)
    top = (h - s) // 2
    left = (w - s) // 2
    return frame[top : top + s, left : left + s]


def _bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample img (H, W, C) at fractional (ys, xs) grids with edge clamping."""
    h, w = img.shape[:2]
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (ys - y0)[..., None]
    wx = (xs - x0)[..., None]
    top = img[y0, x0] * (1.0 - wx) + img[y0, x1] * wx
    bottom = img[y1, x0] * (1.0 - wx) + img[y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def resize_224(frame: np.ndarray) -> np.ndarray:
    """Bilinear resize of a square image to 224x224 (half-pixel convention)."""
    if frame.ndim != 3 or frame.shape[0] != frame.shape[1]:
        raise ShapeMismatch(f"expected a square (S, S, 3) image, got {frame.shape}")
    s = frame.shape[0]
    if s == TARGET_SIZE:
        return frame.astype(np.float64) if frame.dtype != np.float64 else frame.copy()
    scale = s / TARGET_SIZE
    # center-anchored form of the half-pixel mapping (dst + 0.5) * scale - 0.5;
    # mirror-symmetric offsets keep resizing consistent with flips
    offsets = (np.arange(TARGET_SIZE, dtype=np.float64) - (TARGET_SIZE - 1) / 2.0) * scale
    coords = (s - 1) / 2.0 + offsets
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    return _bilinear_sample(frame.astype(np.float64), ys, xs)


def normalize_01(frame: np.ndarray) -> np.ndarray:
    """Scale 8-bit channel values to [0, 1] by dividing by 255."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.size and (frame.min() < 0 or frame.max() > 255):
        raise ShapeMismatch("channel values must lie in [0, 255]")
    return frame / 255.0


def uniform_indices(length: int, count: int) -> list[int]:
    """Temporal sampling indices.

    For length >= count: count indices round(i * (length-1) / (count-1)),
    half-up rounding. For length < count: all frames followed by the last
    frame repeated. A single requested frame takes index 0.
    """
    if length < 1 or count < 1:
        raise ShapeMismatch("length and count must be >= 1")
    if length < count:
        return list(range(length)) + [length - 1] * (count - length)
    if count == 1:
        return [0]
    return [int(math.floor(i * (length - 1) / (count - 1) + 0.5)) for i in range(count)]


def preprocess_frame(frame: np.ndarray) -> np.ndarray:
    return normalize_01(resize_224(center_square_crop(frame)))


def sample_frames(seq: RawFrameSequence, count: int = DEFAULT_FRAME_COUNT) -> FrameStack:
    """Pick ``count`` uniformly spaced frames and run each through the
    crop / resize / normalize chain."""
    if len(seq) == 0:
        raise EmptySequence(f"clip {seq.clip_id}: no frames")
    indices = uniform_indices(len(seq), count)
    processed = {i: preprocess_frame(seq.frames[i]) for i in sorted(set(indices))}
    tensor = np.stack([processed[i] for i in indices])
    return FrameStack(tensor=tensor, clip_id=seq.clip_id)


class FrameStackFrontend(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping frame sequences to normalized stacks."""

    def __init__(self, frame_count: int = DEFAULT_FRAME_COUNT):
        self.frame_count = frame_count

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        return [sample_frames(seq, self.frame_count) for seq in X]
