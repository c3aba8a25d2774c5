import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from avfusion.audio import Waveform
from avfusion.augment import (
    AugmentationPolicy,
    AugmentationSpec,
    augment_audio,
    augment_video,
    expand_dataset,
    first_order_filter,
    pitch_shift,
    specs_for_entry,
)
from avfusion.embeddings import Modality
from avfusion.errors import AlreadyAugmented, ParamOutOfRange, UnknownOp
from avfusion.manifest import load_manifest, save_manifest
from avfusion.video import FrameStack

from conftest import sine_wave


def video_spec(ops, seed=0):
    return AugmentationSpec(seed=seed, modality=Modality.VIDEO, ops=tuple(ops))


def audio_spec(ops, seed=0):
    return AugmentationSpec(seed=seed, modality=Modality.AUDIO, ops=tuple(ops))


@pytest.fixture
def stack(rng):
    tensor = rng.random((4, 224, 224, 3))
    return FrameStack(tensor=tensor, clip_id="c")


class TestSpecValidation:
    def test_unknown_op_rejected(self):
        with pytest.raises(UnknownOp):
            video_spec([("sharpen", {})])

    def test_param_out_of_range_rejected(self):
        with pytest.raises(ParamOutOfRange):
            video_spec([("rotation", {"angle_deg": 40.0})])
        with pytest.raises(ParamOutOfRange):
            audio_spec([("gain", {"factor": 3.0})])

    def test_wrong_param_names_rejected(self):
        with pytest.raises(ParamOutOfRange):
            video_spec([("rotation", {"angle": 5.0})])

    def test_modality_mismatch_rejected(self):
        with pytest.raises(UnknownOp):
            audio_spec([("rotation", {"angle_deg": 5.0})])

    def test_round_trip_dict(self):
        spec = audio_spec([("gain", {"factor": 0.7}), ("freq_filter", {"kind": "lowpass", "cutoff_hz": 900.0})])
        again = AugmentationSpec.from_dict(spec.to_dict(), Modality.AUDIO)
        assert again == spec


class TestVideoOps:
    def test_empty_spec_is_identity(self, stack):
        out = augment_video(stack, video_spec([]))
        assert np.array_equal(out.tensor, stack.tensor)

    def test_double_hflip_is_identity(self, stack):
        spec = video_spec([("flip", {"direction": "horizontal"}), ("flip", {"direction": "horizontal"})])
        out = augment_video(stack, spec)
        assert np.array_equal(out.tensor, stack.tensor)

    def test_double_vflip_is_identity(self, stack):
        spec = video_spec([("flip", {"direction": "vertical"}), ("flip", {"direction": "vertical"})])
        out = augment_video(stack, spec)
        assert np.array_equal(out.tensor, stack.tensor)

    def test_brightness_clamps(self):
        stack = FrameStack(tensor=np.full((2, 224, 224, 3), 0.9), clip_id="c")
        out = augment_video(stack, video_spec([("brightness_contrast", {"alpha": 1.0, "beta": 0.1})]))
        assert np.allclose(out.tensor, 1.0)

    def test_color_jitter_scales_channels(self, stack):
        gains = [0.9, 1.0, 1.1]
        out = augment_video(stack, video_spec([("color_jitter", {"gains": gains})]))
        expected = np.clip(stack.tensor * np.array(gains), 0.0, 1.0)
        assert np.allclose(out.tensor, expected)

    def test_rotation_round_trip_on_smooth_image(self):
        yy, xx = np.meshgrid(np.linspace(0, 1, 224), np.linspace(0, 1, 224), indexing="ij")
        smooth = np.stack([yy, xx, 0.5 * (yy + xx)], axis=2)
        stack = FrameStack(tensor=smooth[None], clip_id="c")
        spec = video_spec([("rotation", {"angle_deg": 10.0}), ("rotation", {"angle_deg": -10.0})])
        out = augment_video(stack, spec)
        # compare away from the zero-padded corners
        inner = (slice(None), slice(40, 184), slice(40, 184), slice(None))
        assert np.max(np.abs(out.tensor[inner] - stack.tensor[inner])) < 0.02

    def test_blur_preserves_constant(self):
        stack = FrameStack(tensor=np.full((2, 224, 224, 3), 0.25), clip_id="c")
        spec = video_spec([("gaussian_blur", {"kernel": 5, "sigma": 1.0}), ("median_blur", {"kernel": 3})])
        out = augment_video(stack, spec)
        assert np.allclose(out.tensor, 0.25)

    def test_noise_reproducible_from_seed(self, stack):
        spec = video_spec([("additive_noise", {"sigma": 0.03})], seed=99)
        a = augment_video(stack, spec)
        b = augment_video(stack, spec)
        assert np.array_equal(a.tensor, b.tensor)
        assert not np.array_equal(a.tensor, stack.tensor)

    def test_shape_and_range_preserved(self, stack, rng):
        spec = video_spec(
            [
                ("rotation", {"angle_deg": -12.0}),
                ("additive_noise", {"sigma": 0.05}),
                ("gaussian_blur", {"kernel": 3, "sigma": 0.8}),
                ("brightness_contrast", {"alpha": 1.2, "beta": -0.1}),
            ],
            seed=5,
        )
        out = augment_video(stack, spec)
        assert out.tensor.shape == stack.tensor.shape
        assert out.tensor.min() >= 0.0 and out.tensor.max() <= 1.0


class TestAudioOps:
    def test_empty_spec_is_identity(self):
        w = Waveform(samples=sine_wave(440, 0.5, 16000), sample_rate_hz=16000)
        out = augment_audio(w, audio_spec([]))
        assert np.array_equal(out.samples, w.samples)

    def test_gain_is_exact(self):
        x = sine_wave(440, 0.5, 16000, amplitude=1.0)
        w = Waveform(samples=x, sample_rate_hz=16000)
        out = augment_audio(w, audio_spec([("gain", {"factor": 0.5})]))
        assert np.array_equal(out.samples, 0.5 * x)

    def test_pitch_shift_spectral_peak(self):
        x = sine_wave(440, 1.0, 16000)
        y = pitch_shift(x, 2.0, 16000)
        assert len(y) == len(x)
        window = np.hanning(12000)
        spec = np.abs(np.fft.rfft(y[2000:14000] * window))
        peak_hz = np.argmax(spec) * 16000 / 12000
        target = 440 * 2 ** (2 / 12)
        assert abs(peak_hz - target) / target < 0.02

    def test_pitch_shift_down(self):
        x = sine_wave(440, 1.0, 16000)
        y = pitch_shift(x, -2.0, 16000)
        spec = np.abs(np.fft.rfft(y[2000:14000] * np.hanning(12000)))
        peak_hz = np.argmax(spec) * 16000 / 12000
        target = 440 * 2 ** (-2 / 12)
        assert abs(peak_hz - target) / target < 0.02

    def test_noise_snr_and_reproducibility(self):
        x = sine_wave(500, 1.0, 16000, amplitude=0.7)
        w = Waveform(samples=x, sample_rate_hz=16000)
        spec = audio_spec([("additive_noise", {"snr_db": 20.0})], seed=3)
        a = augment_audio(w, spec)
        b = augment_audio(w, spec)
        assert np.array_equal(a.samples, b.samples)
        noise = a.samples - x
        snr = 10 * np.log10(np.mean(x**2) / np.mean(noise**2))
        assert 18.0 < snr < 22.0

    def test_lowpass_attenuates_high_more_than_low(self):
        low = sine_wave(300, 1.0, 16000)
        high = sine_wave(5000, 1.0, 16000)
        low_out = first_order_filter(low, "lowpass", 1000.0, 16000)
        high_out = first_order_filter(high, "lowpass", 1000.0, 16000)
        assert np.std(low_out) > 0.8 * np.std(low)
        assert np.std(high_out) < 0.4 * np.std(high)

    def test_highpass_attenuates_low(self):
        low = sine_wave(300, 1.0, 16000)
        out = first_order_filter(low, "highpass", 3000.0, 16000)
        assert np.std(out) < 0.4 * np.std(low)

    def test_length_and_rate_preserved(self):
        x = sine_wave(440, 0.73, 16000)
        w = Waveform(samples=x, sample_rate_hz=16000)
        spec = audio_spec(
            [
                ("pitch_shift", {"semitones": 1.3}),
                ("freq_filter", {"kind": "lowpass", "cutoff_hz": 4000.0}),
                ("additive_noise", {"snr_db": 30.0}),
                ("gain", {"factor": 1.4}),
            ],
            seed=8,
        )
        out = augment_audio(w, spec)
        assert out.n_samples == w.n_samples
        assert out.sample_rate_hz == w.sample_rate_hz
        assert np.max(np.abs(out.samples)) <= 1.0


class TestExpandDataset:
    def test_tripling(self, fixture_manifest_600):
        expanded = expand_dataset(fixture_manifest_600, AugmentationPolicy(copies_per_clip=2), seed=1)
        assert len(expanded) == 1800
        for entry in expanded.augmented():
            parent = expanded.by_id(entry.parent_id)
            assert entry.label == parent.label

    def test_zero_copies_unchanged(self, small_manifest):
        expanded = expand_dataset(small_manifest, AugmentationPolicy(copies_per_clip=0), seed=1)
        assert expanded == small_manifest

    def test_deterministic_given_seed(self, small_manifest):
        a = expand_dataset(small_manifest, AugmentationPolicy(), seed=9)
        b = expand_dataset(small_manifest, AugmentationPolicy(), seed=9)
        assert a == b
        assert [e.aug_params for e in a.augmented()] == [e.aug_params for e in b.augmented()]

    def test_different_seeds_differ(self, small_manifest):
        a = expand_dataset(small_manifest, AugmentationPolicy(), seed=1)
        b = expand_dataset(small_manifest, AugmentationPolicy(), seed=2)
        assert [e.aug_params for e in a.augmented()] != [e.aug_params for e in b.augmented()]

    def test_refuses_double_augmentation(self, small_manifest):
        expanded = expand_dataset(small_manifest, AugmentationPolicy(), seed=1)
        with pytest.raises(AlreadyAugmented):
            expand_dataset(expanded, AugmentationPolicy(), seed=2)

    def test_specs_survive_manifest_round_trip(self, tmp_path, small_manifest):
        expanded = expand_dataset(small_manifest, AugmentationPolicy(), seed=4)
        path = tmp_path / "m.tsv"
        save_manifest(expanded, path)
        loaded = load_manifest(path)
        for entry in loaded.augmented():
            specs = specs_for_entry(entry)
            assert set(specs) == {Modality.AUDIO, Modality.VIDEO}
            for spec in specs.values():
                assert len(spec.ops) >= 1

    def test_op_counts_within_policy(self, small_manifest):
        policy = AugmentationPolicy(copies_per_clip=3, min_ops=2, max_ops=3)
        expanded = expand_dataset(small_manifest, policy, seed=6)
        for entry in expanded.augmented():
            for spec in specs_for_entry(entry).values():
                assert 2 <= len(spec.ops) <= 3

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 2**31), sigma=st.floats(0.001, 0.05), alpha=st.floats(0.8, 1.2))
    def test_video_range_preservation_property(self, seed, sigma, alpha):
        rng = np.random.default_rng(seed)
        stack = FrameStack(tensor=rng.random((2, 224, 224, 3)), clip_id="c")
        spec = video_spec(
            [("additive_noise", {"sigma": sigma}), ("brightness_contrast", {"alpha": alpha, "beta": 0.1})],
            seed=seed,
        )
        out = augment_video(stack, spec)
        assert out.tensor.shape == stack.tensor.shape
        assert out.tensor.min() >= 0.0 and out.tensor.max() <= 1.0
