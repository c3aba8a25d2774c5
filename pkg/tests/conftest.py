import numpy as np
import pytest

from avfusion.manifest import ClipEntry, ClipManifest, Label


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_manifest(n_per_class: int, prefix: str = "clip") -> ClipManifest:
    entries = []
    for i in range(n_per_class):
        entries.append(ClipEntry(id=f"{prefix}-v{i:04d}", media_path=f"media/v{i}.wav", label=Label.VIOLENT, duration_s=5.0))
        entries.append(ClipEntry(id=f"{prefix}-n{i:04d}", media_path=f"media/n{i}.wav", label=Label.NONVIOLENT, duration_s=5.0))
    return ClipManifest(entries=tuple(entries))


@pytest.fixture
def small_manifest():
    return make_manifest(5)


@pytest.fixture
def fixture_manifest_600():
    """Balanced catalog of 600 originals (300 per class)."""
    return make_manifest(300)


def sine_wave(freq_hz: float, duration_s: float, rate: int, amplitude: float = 0.5) -> np.ndarray:
    t = np.arange(int(round(duration_s * rate))) / rate
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t)
