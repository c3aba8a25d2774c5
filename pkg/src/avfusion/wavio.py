"""WAV ingestion: the one media container the toolkit decodes natively.

Supports 16-bit PCM and 32-bit IEEE float, mono or stereo.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .audio import Waveform
from .errors import EmptyInput, ParseError


def read_wav(path: str | Path) -> Waveform:
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ParseError(f"{path}: not a readable WAV file: {exc}") from exc
    if data.size == 0:
        raise EmptyInput(f"{path}: empty audio payload")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise ParseError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(samples=samples, sample_rate_hz=int(rate))


def write_wav(path: str | Path, w: Waveform) -> None:
    """Write as 32-bit float WAV (lossless for our in-memory representation)."""
    wavfile.write(path, w.sample_rate_hz, w.samples.astype(np.float32))
