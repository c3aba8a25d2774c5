"""avfusion: audiovisual fusion toolkit for violence detection.

Pipeline stages: manifest catalog -> audio/video frontends -> augmentation
-> embeddings -> trainable fusion heads -> experiment harness. See the CLI
(``avfusion --help``) for the end-to-end workflow.
"""

from .audio import (
    LogMelFrontend,
    MelExample,
    Spectrogram,
    Waveform,
    example_count,
    examples_from_waveform,
    frame_examples,
    log_compress,
    logmel_from_waveform,
    mel_filter_matrix,
    mel_filterbank,
    resample_to_16k_mono,
    stft_frame_count,
    stft_magnitude,
)
from .augment import (
    AugmentationPolicy,
    AugmentationSpec,
    augment_audio,
    augment_video,
    expand_dataset,
)
from .embeddings import (
    EmbeddingRecord,
    EmbeddingStore,
    Modality,
    read_embeddings,
    write_embeddings,
)
from .fusion import (
    FusionClassifier,
    HybridFusionNet,
    IntermediateFusionNet,
    LateFusionNet,
    Prediction,
    ToyAudioEncoder,
    ToyVideoEncoder,
    embed_clip,
    fuse_hybrid,
    fuse_intermediate,
    fuse_late,
    predict_clip,
)
from .harness import (
    ComparisonReport,
    ExperimentConfig,
    ExperimentData,
    MetricsReport,
    compare_strategies,
    evaluate,
    make_synthetic_benchmark,
    random_search,
    run_experiment,
)
from .manifest import (
    CLASS_NAMES,
    ClipEntry,
    ClipManifest,
    Label,
    Split,
    SplitAssignment,
    load_manifest,
    random_split,
    save_manifest,
    with_split,
)
from .nn import AdamState, TrainingConfig, adam_step, softmax_ce_loss, train_epochs
from .video import (
    FrameStack,
    FrameStackFrontend,
    RawFrameSequence,
    center_square_crop,
    normalize_01,
    resize_224,
    sample_frames,
)

__version__ = "0.1.0"
