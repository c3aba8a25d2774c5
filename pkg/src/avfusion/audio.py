"""Log-mel audio frontend.

Converts raw audio into the classic VGGish-style input representation:
16 kHz mono, STFT with a 25 ms periodic Hann window and 10 ms hop, 512-point
FFT magnitudes, 64 triangular mel filters between 125 and 7500 Hz (HTK mel
scale), natural log with a 0.01 stabilizing offset, framed into
non-overlapping 0.96 s examples of 96 frames x 64 bands.

All constants below are part of the file-format and embedding contracts;
changing them breaks interop with independently produced tensors.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import EmptyInput, NegativeInput, ShapeMismatch, TooShort, UnsupportedRate

SAMPLE_RATE = 16000
WINDOW_LEN = 400      # 25 ms
HOP_LEN = 160         # 10 ms
FFT_SIZE = 512
N_BINS = FFT_SIZE // 2 + 1
N_MELS = 64
MEL_FMIN_HZ = 125.0
MEL_FMAX_HZ = 7500.0
LOG_OFFSET = 0.01
EXAMPLE_FRAMES = 96   # 0.96 s at the 10 ms hop

MIN_INPUT_RATE = 8000

# Windowed-sinc resampler quality knobs: zero crossings per side and the
# Kaiser window shape parameter.
RESAMPLE_ZEROS = 32
RESAMPLE_KAISER_BETA = 8.555


@dataclass(frozen=True)
class Waveform:
    """PCM audio in [-1, 1]; mono ``(n,)`` or stereo ``(n, 2)``."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 2 and samples.shape[1] == 1:
            samples = samples[:, 0]
        if samples.ndim not in (1, 2) or (samples.ndim == 2 and samples.shape[1] != 2):
            raise ShapeMismatch(f"waveform must be (n,) or (n, 2), got {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ShapeMismatch("waveform contains NaN or Inf")
        if samples.size and np.max(np.abs(samples)) > 1.0 + 1e-9:
            raise ShapeMismatch("waveform samples must lie in [-1, 1]")
        if self.sample_rate_hz <= 0:
            raise ShapeMismatch(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.samples.ndim == 1 else self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Spectrogram:
    """STFT magnitude frames, shape (n_frames, n_bins)."""

    magnitudes: np.ndarray
    window_len: int = WINDOW_LEN
    hop_len: int = HOP_LEN

    def __post_init__(self):
        mags = np.asarray(self.magnitudes, dtype=np.float64)
        if mags.ndim != 2:
            raise ShapeMismatch(f"spectrogram must be 2-D, got {mags.shape}")
        if mags.size and mags.min() < 0:
            raise ShapeMismatch("spectrogram magnitudes must be non-negative")
        object.__setattr__(self, "magnitudes", mags)

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]


@dataclass(frozen=True)
class MelExample:
    """One 96x64 log-mel patch covering 0.96 s of audio."""

    patch: np.ndarray
    source_clip_id: str
    start_time_s: float

    def __post_init__(self):
        patch = np.asarray(self.patch, dtype=np.float64)
        if patch.shape != (EXAMPLE_FRAMES, N_MELS):
            raise ShapeMismatch(f"mel example must be {EXAMPLE_FRAMES}x{N_MELS}, got {patch.shape}")
        if not np.all(np.isfinite(patch)):
            raise ShapeMismatch("mel example contains NaN or Inf")
        object.__setattr__(self, "patch", patch)


def _sinc_kernel_rows(positions: np.ndarray, n_in: int, cutoff: float, half_width: float):
    """Kaiser-windowed sinc interpolation weights for fractional positions.

    Returns (indices, weights) of shape (len(positions), taps); out-of-range
    taps get zero weight and each row is normalized to unit gain.
    """
    taps = int(math.ceil(half_width))
    offsets = np.arange(-taps, taps + 1)
    base = np.floor(positions).astype(np.int64)
    idx = base[:, None] + offsets[None, :]
    t = idx - positions[:, None]
    u = t / half_width
    inside = np.abs(u) < 1.0
    window = np.zeros_like(t)
    window[inside] = np.i0(RESAMPLE_KAISER_BETA * np.sqrt(1.0 - u[inside] ** 2))
    window /= np.i0(RESAMPLE_KAISER_BETA)
    weights = cutoff * np.sinc(cutoff * t) * window
    weights[(idx < 0) | (idx >= n_in)] = 0.0
    norm = weights.sum(axis=1, keepdims=True)
    norm[norm == 0.0] = 1.0
    weights /= norm
    return np.clip(idx, 0, n_in - 1), weights


def resample_sinc(x: np.ndarray, in_rate: float, out_rate: float) -> np.ndarray:
    """Band-limited polyphase-style resampling of a mono signal.

    Output length is round(n * out_rate / in_rate). The anti-aliasing
    cutoff sits at the lower of the two Nyquist frequencies.
    """
    x = np.asarray(x, dtype=np.float64)
    n_out = int(round(x.shape[0] * out_rate / in_rate))
    if n_out == 0:
        return np.zeros(0)
    cutoff = min(1.0, out_rate / in_rate)
    half_width = RESAMPLE_ZEROS / cutoff
    step = in_rate / out_rate
    out = np.empty(n_out)
    chunk = 4096
    for start in range(0, n_out, chunk):
        stop = min(start + chunk, n_out)
        positions = np.arange(start, stop, dtype=np.float64) * step
        idx, weights = _sinc_kernel_rows(positions, x.shape[0], cutoff, half_width)
        out[start:stop] = np.einsum("ij,ij->i", weights, x[idx])
    return out


def resample_to_16k_mono(w: Waveform) -> Waveform:
    """Downmix to mono (channel mean) and resample to 16 kHz.

    A 16 kHz mono input is returned unchanged. Rates below 8 kHz are
    rejected: upsampling that far fabricates the whole analysis band.
    """
    if w.n_samples == 0:
        raise EmptyInput("cannot resample an empty waveform")
    if w.sample_rate_hz < MIN_INPUT_RATE:
        raise UnsupportedRate(f"sample rate {w.sample_rate_hz} < {MIN_INPUT_RATE} Hz")
    samples = w.samples
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if w.sample_rate_hz == SAMPLE_RATE:
        return Waveform(samples=samples, sample_rate_hz=SAMPLE_RATE)
    out = resample_sinc(samples, w.sample_rate_hz, SAMPLE_RATE)
    # interpolation overshoot can poke slightly past full scale
    out = np.clip(out, -1.0, 1.0)
    return Waveform(samples=out, sample_rate_hz=SAMPLE_RATE)


def periodic_hann(n: int) -> np.ndarray:
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft_frame_count(n_samples: int) -> int:
    """Frames produced by the 400/160 analysis: floor((n - 400)/160) + 1."""
    if n_samples < WINDOW_LEN:
        return 0
    return (n_samples - WINDOW_LEN) // HOP_LEN + 1


def example_count(n_samples: int) -> int:
    """Full 96-frame examples obtainable from n samples at 16 kHz."""
    return stft_frame_count(n_samples) // EXAMPLE_FRAMES


def stft_magnitude(w: Waveform) -> Spectrogram:
    """Magnitude STFT: 400-sample periodic Hann frames, hop 160, 512-pt FFT."""
    if w.sample_rate_hz != SAMPLE_RATE:
        raise ShapeMismatch(f"stft expects {SAMPLE_RATE} Hz input, got {w.sample_rate_hz}")
    if w.channels != 1:
        raise ShapeMismatch("stft expects mono input")
    x = w.samples
    if x.shape[0] < WINDOW_LEN:
        raise TooShort(f"need at least {WINDOW_LEN} samples, got {x.shape[0]}")
    frames = np.lib.stride_tricks.sliding_window_view(x, WINDOW_LEN)[::HOP_LEN]
    windowed = frames * periodic_hann(WINDOW_LEN)
    mags = np.abs(np.fft.rfft(windowed, n=FFT_SIZE, axis=1))
    return Spectrogram(magnitudes=mags)


def hz_to_mel(f):
    """HTK mel scale: 2595 * log10(1 + f / 700)."""
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


@functools.lru_cache(maxsize=4)
def mel_filter_matrix(
    n_bins: int = N_BINS,
    sample_rate: int = SAMPLE_RATE,
    n_mels: int = N_MELS,
    fmin_hz: float = MEL_FMIN_HZ,
    fmax_hz: float = MEL_FMAX_HZ,
) -> np.ndarray:
    """(n_mels, n_bins) triangular filters, equally spaced on the mel scale.

    Triangles are evaluated in the mel domain at the FFT bin center
    frequencies and peak at 1 (no area normalization).
    """
    bin_mels = hz_to_mel(np.arange(n_bins) * (sample_rate / 2.0) / (n_bins - 1))
    edges = np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), n_mels + 2)
    lower, center, upper = edges[:-2], edges[1:-1], edges[2:]
    rising = (bin_mels[None, :] - lower[:, None]) / (center - lower)[:, None]
    falling = (upper[:, None] - bin_mels[None, :]) / (upper - center)[:, None]
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights.flags.writeable = False
    return weights


def mel_center_frequencies_hz(n_mels: int = N_MELS) -> np.ndarray:
    edges = np.linspace(hz_to_mel(MEL_FMIN_HZ), hz_to_mel(MEL_FMAX_HZ), n_mels + 2)
    return 700.0 * (10.0 ** (edges[1:-1] / 2595.0) - 1.0)


def mel_filterbank(spec: Spectrogram) -> np.ndarray:
    """Pool magnitude bins into 64 mel channels: out[f, m] = sum_b M[m, b] * mag[f, b]."""
    if spec.n_bins != N_BINS:
        raise ShapeMismatch(f"expected {N_BINS} frequency bins, got {spec.n_bins}")
    return spec.magnitudes @ mel_filter_matrix().T


def log_compress(mel: np.ndarray, offset: float = LOG_OFFSET) -> np.ndarray:
    """Natural log with a stabilizing offset: ln(mel + offset)."""
    mel = np.asarray(mel, dtype=np.float64)
    if mel.size and mel.min() < 0:
        raise NegativeInput("log compression requires non-negative input")
    return np.log(mel + offset)


def frame_examples(logmel: np.ndarray, clip_id: str) -> list[MelExample]:
    """Cut the (F, 64) log-mel matrix into floor(F/96) non-overlapping examples.

    Trailing partial frames are dropped; padding would fabricate silence.
    """
    logmel = np.asarray(logmel, dtype=np.float64)
    if logmel.ndim != 2 or logmel.shape[1] != N_MELS:
        raise ShapeMismatch(f"expected (F, {N_MELS}) log-mel input, got {logmel.shape}")
    n_frames = logmel.shape[0]
    if n_frames < EXAMPLE_FRAMES:
        raise TooShort(f"need at least {EXAMPLE_FRAMES} frames, got {n_frames}")
    hop_s = HOP_LEN / SAMPLE_RATE
    examples = []
    for i in range(n_frames // EXAMPLE_FRAMES):
        start = i * EXAMPLE_FRAMES
        examples.append(
            MelExample(
                patch=logmel[start : start + EXAMPLE_FRAMES],
                source_clip_id=clip_id,
                start_time_s=start * hop_s,
            )
        )
    return examples


def logmel_from_waveform(w: Waveform) -> np.ndarray:
    """Full frontend chain up to (but not including) example framing."""
    w16 = resample_to_16k_mono(w)
    return log_compress(mel_filterbank(stft_magnitude(w16)))


def examples_from_waveform(w: Waveform, clip_id: str) -> list[MelExample]:
    return frame_examples(logmel_from_waveform(w), clip_id)


class LogMelFrontend(BaseEstimator, TransformerMixin):
    """Stateless transformer mapping waveforms to log-mel representations.

    ``transform`` accepts a list of :class:`Waveform` and returns, per clip,
    either the full (F, 64) log-mel matrix or the stacked example patches
    of shape (n_examples, 96, 64) when ``as_examples`` is set.
    """

    def __init__(self, as_examples: bool = True):
        self.as_examples = as_examples

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        out = []
        for i, w in enumerate(X):
            logmel = logmel_from_waveform(w)
            if self.as_examples:
                patches = frame_examples(logmel, clip_id=str(i))
                out.append(np.stack([p.patch for p in patches]))
            else:
                out.append(logmel)
        return out
