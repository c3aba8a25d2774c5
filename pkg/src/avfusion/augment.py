"""Audio/video augmentation operators and the random composition policy.

Each augmented clip records a replayable spec: op order, parameters, and a
noise seed. Applying the same spec to the same input is bit-identical, so
augmented media never needs to be stored.

Video ops act on normalized frame stacks (same op and parameters on every
frame); audio ops act on waveforms and preserve length exactly. Parameter
ranges are deliberately mild so labels survive augmentation; they live in
:data:`AUDIO_PARAM_RANGES` / :data:`VIDEO_PARAM_RANGES` and can be
overridden through :class:`AugmentationPolicy`.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal as sp_signal

from .audio import Waveform, resample_sinc
from .embeddings import Modality
from .errors import AlreadyAugmented, ParamOutOfRange, ShapeMismatch, UnknownOp
from .manifest import ClipEntry, ClipManifest
from .video import FrameStack, _bilinear_sample

VIDEO_PARAM_RANGES: dict[str, dict] = {
    "color_jitter": {"gains": (0.8, 1.2)},          # per-channel, 3 draws
    "rotation": {"angle_deg": (-15.0, 15.0)},
    "additive_noise": {"sigma": (0.0, 0.05)},
    "flip": {"direction": ("horizontal", "vertical")},
    "gaussian_blur": {"kernel": (3, 5), "sigma": (0.5, 1.5)},
    "median_blur": {"kernel": (3,)},
    "brightness_contrast": {"alpha": (0.8, 1.2), "beta": (-0.1, 0.1)},
}

AUDIO_PARAM_RANGES: dict[str, dict] = {
    "pitch_shift": {"semitones": (-2.0, 2.0)},
    "additive_noise": {"snr_db": (20.0, 40.0)},
    "gain": {"factor": (0.5, 1.5)},
    "freq_filter": {"kind": ("lowpass", "highpass"), "cutoff_hz": (200.0, 6000.0)},
}

_RANGES = {Modality.AUDIO: AUDIO_PARAM_RANGES, Modality.VIDEO: VIDEO_PARAM_RANGES}


def _check_params(op_name: str, params: dict, modality: Modality) -> None:
    ranges = _RANGES[modality]
    if op_name not in ranges:
        raise UnknownOp(f"unknown {modality.name.lower()} op {op_name!r}")
    spec = ranges[op_name]
    if set(params) != set(spec):
        raise ParamOutOfRange(f"{op_name}: expected params {sorted(spec)}, got {sorted(params)}")
    for key, bounds in spec.items():
        value = params[key]
        if isinstance(bounds[0], str):
            if value not in bounds:
                raise ParamOutOfRange(f"{op_name}.{key}: {value!r} not in {bounds}")
        elif key == "kernel":
            if value not in bounds:
                raise ParamOutOfRange(f"{op_name}.{key}: {value} not in {bounds}")
        elif key == "gains":
            gains = np.asarray(value, dtype=np.float64)
            if gains.shape != (3,) or gains.min() < bounds[0] or gains.max() > bounds[1]:
                raise ParamOutOfRange(f"{op_name}.gains: need 3 values in {bounds}, got {value}")
        else:
            lo, hi = bounds
            if not (lo <= value <= hi):
                raise ParamOutOfRange(f"{op_name}.{key}: {value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class AugmentationSpec:
    """Replayable augmentation recipe for one modality of one clip."""

    seed: int
    modality: Modality
    ops: tuple[tuple[str, dict], ...]

    def __post_init__(self):
        ops = tuple((name, dict(params)) for name, params in self.ops)
        for name, params in ops:
            _check_params(name, params, self.modality)
        object.__setattr__(self, "ops", ops)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "ops": [[name, params] for name, params in self.ops]}

    @classmethod
    def from_dict(cls, data: dict, modality: Modality) -> "AugmentationSpec":
        return cls(
            seed=int(data["seed"]),
            modality=modality,
            ops=tuple((name, dict(params)) for name, params in data["ops"]),
        )


@dataclass(frozen=True)
class AugmentationPolicy:
    """How many augmented copies to create and how ops are drawn.

    ``copies_per_clip=2`` triples the dataset (each original gains two
    augmented siblings).
    """

    copies_per_clip: int = 2
    min_ops: int = 1
    max_ops: int = 3
    audio_ranges: dict = field(default_factory=lambda: dict(AUDIO_PARAM_RANGES))
    video_ranges: dict = field(default_factory=lambda: dict(VIDEO_PARAM_RANGES))

    def __post_init__(self):
        if self.copies_per_clip < 0:
            raise ParamOutOfRange("copies_per_clip must be >= 0")
        if not 1 <= self.min_ops <= self.max_ops:
            raise ParamOutOfRange("need 1 <= min_ops <= max_ops")


# --- video ops ----------------------------------------------------------

def _rotate_frames(tensor: np.ndarray, angle_deg: float) -> np.ndarray:
    size = tensor.shape[1]
    c = (size - 1) / 2.0
    theta = math.radians(angle_deg)
    grid = np.arange(size, dtype=np.float64) - c
    ys, xs = np.meshgrid(grid, grid, indexing="ij")
    # inverse mapping: output pixel pulls from the source rotated by -angle
    src_y = math.cos(theta) * ys - math.sin(theta) * xs + c
    src_x = math.sin(theta) * ys + math.cos(theta) * xs + c
    outside = (src_y < 0) | (src_y > size - 1) | (src_x < 0) | (src_x > size - 1)
    out = np.empty_like(tensor)
    for i in range(tensor.shape[0]):
        frame = _bilinear_sample(tensor[i], src_y, src_x)
        frame[outside] = 0.0
        out[i] = frame
    return out


def _gaussian_kernel1d(kernel: int, sigma: float) -> np.ndarray:
    half = kernel // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def _sep_conv(tensor: np.ndarray, kern: np.ndarray, axis: int) -> np.ndarray:
    half = len(kern) // 2
    pad = [(0, 0)] * tensor.ndim
    pad[axis] = (half, half)
    padded = np.pad(tensor, pad, mode="reflect")
    out = np.zeros_like(tensor)
    for j, w in enumerate(kern):
        sl = [slice(None)] * tensor.ndim
        sl[axis] = slice(j, j + tensor.shape[axis])
        out += w * padded[tuple(sl)]
    return out


def _median3(tensor: np.ndarray) -> np.ndarray:
    padded = np.pad(tensor, ((0, 0), (1, 1), (1, 1), (0, 0)), mode="reflect")
    h, w = tensor.shape[1:3]
    stack = [padded[:, dy : dy + h, dx : dx + w] for dy in range(3) for dx in range(3)]
    return np.median(np.stack(stack), axis=0)


def augment_video(stack: FrameStack, spec: AugmentationSpec) -> FrameStack:
    """Apply the spec's ops in order; result is re-clamped to [0, 1]."""
    if spec.modality != Modality.VIDEO:
        raise ShapeMismatch("augment_video needs a video spec")
    rng = np.random.default_rng(spec.seed)
    t = stack.tensor.copy()
    for name, params in spec.ops:
        if name == "color_jitter":
            t = t * np.asarray(params["gains"], dtype=np.float64)
        elif name == "rotation":
            t = _rotate_frames(t, params["angle_deg"])
        elif name == "additive_noise":
            t = t + rng.normal(0.0, params["sigma"], size=t.shape)
        elif name == "flip":
            t = t[:, ::-1] if params["direction"] == "vertical" else t[:, :, ::-1]
        elif name == "gaussian_blur":
            kern = _gaussian_kernel1d(params["kernel"], params["sigma"])
            t = _sep_conv(_sep_conv(t, kern, axis=1), kern, axis=2)
        elif name == "median_blur":
            t = _median3(t)
        elif name == "brightness_contrast":
            t = params["alpha"] * t + params["beta"]
        t = np.clip(t, 0.0, 1.0)
    return FrameStack(tensor=t, clip_id=stack.clip_id)


# --- audio ops ----------------------------------------------------------

_PV_FFT = 1024
_PV_HOP = 256


def _stft_complex(x: np.ndarray) -> np.ndarray:
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(_PV_FFT) / _PV_FFT)
    padded = np.pad(x, (_PV_FFT // 2, _PV_FFT // 2), mode="reflect")
    n_frames = 1 + (len(padded) - _PV_FFT) // _PV_HOP
    frames = np.lib.stride_tricks.sliding_window_view(padded, _PV_FFT)[:: _PV_HOP][:n_frames]
    return np.fft.rfft(frames * win, axis=1)


def _istft(frames: np.ndarray, length: int) -> np.ndarray:
    win = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(_PV_FFT) / _PV_FFT)
    total = _PV_FFT + _PV_HOP * (frames.shape[0] - 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    chunks = np.fft.irfft(frames, n=_PV_FFT, axis=1)
    for i in range(frames.shape[0]):
        start = i * _PV_HOP
        out[start : start + _PV_FFT] += chunks[i] * win
        norm[start : start + _PV_FFT] += win**2
    out = out / np.maximum(norm, 1e-8)
    out = out[_PV_FFT // 2 :]
    if len(out) < length:
        out = np.pad(out, (0, length - len(out)))
    return out[:length]


def _phase_vocoder(spec_frames: np.ndarray, rate: float) -> np.ndarray:
    """Resample the STFT frame axis by ``rate`` with phase accumulation."""
    n_frames, n_bins = spec_frames.shape
    steps = np.arange(0, n_frames, rate)
    expected = _PV_HOP * 2.0 * np.pi * np.arange(n_bins) / _PV_FFT
    out = np.zeros((len(steps), n_bins), dtype=complex)
    phase = np.angle(spec_frames[0])
    padded = np.vstack([spec_frames, np.zeros((2, n_bins), dtype=complex)])
    for i, step in enumerate(steps):
        k = int(step)
        frac = step - k
        mag = (1.0 - frac) * np.abs(padded[k]) + frac * np.abs(padded[k + 1])
        out[i] = mag * np.exp(1j * phase)
        dphase = np.angle(padded[k + 1]) - np.angle(padded[k]) - expected
        dphase -= 2.0 * np.pi * np.round(dphase / (2.0 * np.pi))
        phase += expected + dphase
    return out


def pitch_shift(x: np.ndarray, semitones: float, sample_rate: int) -> np.ndarray:
    """Length-preserving pitch shift: phase-vocoder stretch then resample."""
    if semitones == 0.0:
        return x.copy()
    factor = 2.0 ** (semitones / 12.0)
    stretched = _istft(_phase_vocoder(_stft_complex(x), rate=1.0 / factor), length=int(round(len(x) * factor)))
    out = resample_sinc(stretched, in_rate=len(stretched), out_rate=len(x))
    if len(out) < len(x):
        out = np.pad(out, (0, len(x) - len(out)))
    return out[: len(x)]


def first_order_filter(x: np.ndarray, kind: str, cutoff_hz: float, sample_rate: int) -> np.ndarray:
    b, a = sp_signal.butter(1, cutoff_hz, btype="low" if kind == "lowpass" else "high", fs=sample_rate)
    return sp_signal.lfilter(b, a, x)


def augment_audio(w: Waveform, spec: AugmentationSpec) -> Waveform:
    """Apply the spec's ops in order; sample count and rate are preserved."""
    if spec.modality != Modality.AUDIO:
        raise ShapeMismatch("augment_audio needs an audio spec")
    if w.channels != 1:
        raise ShapeMismatch("audio augmentation expects mono input")
    rng = np.random.default_rng(spec.seed)
    x = w.samples.copy()
    n = len(x)
    for name, params in spec.ops:
        if name == "pitch_shift":
            x = pitch_shift(x, params["semitones"], w.sample_rate_hz)
        elif name == "additive_noise":
            rms = float(np.sqrt(np.mean(x**2)))
            if rms > 0.0:
                x = x + rng.normal(0.0, rms * 10.0 ** (-params["snr_db"] / 20.0), size=n)
        elif name == "gain":
            x = x * params["factor"]
        elif name == "freq_filter":
            x = first_order_filter(x, params["kind"], params["cutoff_hz"], w.sample_rate_hz)
        x = np.clip(x, -1.0, 1.0)
    return Waveform(samples=x, sample_rate_hz=w.sample_rate_hz)


# --- dataset expansion --------------------------------------------------

def clip_entropy(clip_id: str) -> int:
    """Stable 64-bit hash of a clip id, for per-clip seed derivation."""
    return int.from_bytes(hashlib.sha256(clip_id.encode("utf-8")).digest()[:8], "little")


def _draw_spec(rng: np.random.Generator, modality: Modality, policy: AugmentationPolicy) -> AugmentationSpec:
    ranges = policy.audio_ranges if modality == Modality.AUDIO else policy.video_ranges
    names = sorted(ranges)
    k = int(rng.integers(policy.min_ops, min(policy.max_ops, len(names)) + 1))
    chosen = [names[i] for i in rng.choice(len(names), size=k, replace=False)]
    ops = []
    for name in chosen:
        params = {}
        for key, bounds in ranges[name].items():
            if isinstance(bounds[0], str):
                params[key] = bounds[int(rng.integers(len(bounds)))]
            elif key == "kernel":
                params[key] = int(bounds[int(rng.integers(len(bounds)))])
            elif key == "gains":
                lo, hi = bounds
                params[key] = [float(v) for v in rng.uniform(lo, hi, size=3)]
            else:
                lo, hi = bounds
                params[key] = float(rng.uniform(lo, hi))
        ops.append((name, params))
    return AugmentationSpec(seed=int(rng.integers(0, 2**63)), modality=modality, ops=tuple(ops))


def expand_dataset(manifest: ClipManifest, policy: AugmentationPolicy, seed: int) -> ClipManifest:
    """Add ``copies_per_clip`` augmented entries per original clip.

    Op count, order, and parameters are drawn uniformly from the policy,
    independently for the audio and video components of each copy. The
    per-copy RNG is derived from (seed, clip id, copy index), so results
    do not depend on processing order.
    """
    if any(e.is_augmented for e in manifest.entries):
        raise AlreadyAugmented("manifest already contains augmented entries")
    entries = list(manifest.entries)
    for parent in manifest.entries:
        for j in range(1, policy.copies_per_clip + 1):
            rng = np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFFFFFFFFFF, clip_entropy(parent.id), j)))
            audio_spec = _draw_spec(rng, Modality.AUDIO, policy)
            video_spec = _draw_spec(rng, Modality.VIDEO, policy)
            entries.append(
                replace(
                    parent,
                    id=f"{parent.id}-aug{j}",
                    parent_id=parent.id,
                    aug_params={"audio": audio_spec.to_dict(), "video": video_spec.to_dict()},
                )
            )
    return ClipManifest(entries=tuple(entries), class_names=manifest.class_names)


def specs_for_entry(entry: ClipEntry) -> dict[Modality, AugmentationSpec]:
    """Parse the replay specs recorded in an augmented entry's provenance."""
    if entry.aug_params is None:
        return {}
    out = {}
    if "audio" in entry.aug_params:
        out[Modality.AUDIO] = AugmentationSpec.from_dict(entry.aug_params["audio"], Modality.AUDIO)
    if "video" in entry.aug_params:
        out[Modality.VIDEO] = AugmentationSpec.from_dict(entry.aug_params["video"], Modality.VIDEO)
    return out
