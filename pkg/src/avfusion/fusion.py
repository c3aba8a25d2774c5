"""Encoders and the three trainable fusion heads.

Strategies over a pair of per-clip embeddings (audio vector a, video
vector v):

* ``intermediate`` - concat(a, v) into one dense stack.
* ``late`` - per-modality classifiers produce 2-class probability vectors;
  their concatenation (4 values) feeds a final dense stack.
* ``hybrid`` - audio-only, video-only, and intermediate branches each emit
  a 2-class probability vector; the 6 values feed a final dense stack.

``audio_only`` / ``video_only`` single-branch heads round out the
comparison baselines. All heads emit 2-class logits; probabilities come
from a softmax at prediction time. Argmax ties resolve to class 0
(non-violent).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .audio import EXAMPLE_FRAMES, N_MELS
from .embeddings import EmbeddingStore, Modality
from .errors import ShapeMismatch, StaleCache
from .manifest import CLASS_NAMES
from .nn import (
    Sequential,
    TrainingConfig,
    load_checkpoint,
    mlp,
    save_checkpoint,
    softmax_probs,
    train_epochs,
)
from .validation import check_feature_matrix, check_labels

STRATEGIES = ("hybrid", "intermediate", "late", "video_only", "audio_only")

DEFAULT_AUDIO_DIM = 128
DEFAULT_VIDEO_DIM = 1024
DEFAULT_INTERMEDIATE_HIDDEN = (256, 64)
DEFAULT_BRANCH_HIDDEN = (64,)
DEFAULT_COMBINER_HIDDEN = (16,)

# Fixed seeds of the deterministic toy encoders (desk-scale stand-ins for
# pretrained encoders; same projection on every run).
TOY_AUDIO_ENCODER_SEED = 101
TOY_VIDEO_ENCODER_SEED = 102


@dataclass(frozen=True)
class Prediction:
    """Per-clip decision: 2-class probabilities and the argmax label."""

    clip_id: str
    probabilities: np.ndarray
    predicted_label: int

    @property
    def label_name(self) -> str:
        return CLASS_NAMES[self.predicted_label]


# --- encoders -------------------------------------------------------------

class FileBackedEncoder:
    """Returns stored vectors from an :class:`EmbeddingStore` by clip id."""

    def __init__(self, store: EmbeddingStore, modality: Modality):
        self.store = store
        self.modality = modality
        self.output_dim = store.dim(modality)

    def embed_clip(self, clip_id: str) -> np.ndarray:
        return self.store.get(clip_id, self.modality)


class ToyAudioEncoder:
    """Seeded random projection of flattened 96x64 log-mel patches.

    A clip-level embedding is the mean over its example embeddings.
    """

    modality = Modality.AUDIO

    def __init__(self, output_dim: int = DEFAULT_AUDIO_DIM, seed: int = TOY_AUDIO_ENCODER_SEED):
        self.output_dim = output_dim
        rng = np.random.default_rng(seed)
        n_in = EXAMPLE_FRAMES * N_MELS
        self.projection = rng.standard_normal((output_dim, n_in)) / np.sqrt(n_in)

    def embed_example(self, patch: np.ndarray) -> np.ndarray:
        patch = np.asarray(patch, dtype=np.float64)
        if patch.shape != (EXAMPLE_FRAMES, N_MELS):
            raise ShapeMismatch(f"expected ({EXAMPLE_FRAMES}, {N_MELS}) patch, got {patch.shape}")
        return self.projection @ patch.reshape(-1)

    def embed_clip(self, patches: np.ndarray) -> np.ndarray:
        patches = np.asarray(patches, dtype=np.float64)
        if patches.ndim == 2:
            patches = patches[None]
        if patches.ndim != 3 or patches.shape[0] == 0:
            raise ShapeMismatch(f"expected (n, {EXAMPLE_FRAMES}, {N_MELS}) patches, got {patches.shape}")
        return np.mean([self.embed_example(p) for p in patches], axis=0)


class ToyVideoEncoder:
    """Time-mean + 16x16 block pooling + seeded random projection."""

    modality = Modality.VIDEO
    _GRID = 16

    def __init__(self, output_dim: int = DEFAULT_VIDEO_DIM, seed: int = TOY_VIDEO_ENCODER_SEED):
        self.output_dim = output_dim
        rng = np.random.default_rng(seed)
        n_in = self._GRID * self._GRID * 3
        self.projection = rng.standard_normal((output_dim, n_in)) / np.sqrt(n_in)

    def embed_clip(self, tensor: np.ndarray) -> np.ndarray:
        tensor = np.asarray(tensor, dtype=np.float64)
        if tensor.ndim != 4 or tensor.shape[1] != tensor.shape[2] or tensor.shape[3] != 3:
            raise ShapeMismatch(f"expected (T, S, S, 3) stack, got {tensor.shape}")
        size = tensor.shape[1]
        if size % self._GRID != 0:
            raise ShapeMismatch(f"frame size {size} not divisible by the {self._GRID}-cell pooling grid")
        block = size // self._GRID
        pooled = tensor.reshape(-1, self._GRID, block, self._GRID, block, 3).mean(axis=(0, 2, 4))
        return self.projection @ pooled.reshape(-1)


def embed_clip(encoder, clip_input) -> np.ndarray:
    """Run an encoder on one clip's preprocessed input (or id, if file-backed)."""
    vec = np.asarray(encoder.embed_clip(clip_input), dtype=np.float64)
    if vec.shape != (encoder.output_dim,):
        raise ShapeMismatch(f"encoder returned shape {vec.shape}, expected ({encoder.output_dim},)")
    if not np.all(np.isfinite(vec)):
        raise ShapeMismatch("encoder returned non-finite values")
    return vec


# --- fusion networks ------------------------------------------------------

@dataclass
class FusionCache:
    owner: object
    block_caches: dict

    @property
    def masks(self) -> dict:
        return {name: cache.masks for name, cache in self.block_caches.items()}


class _FusionNet:
    """Shared plumbing: ordered named blocks, tuple-input forward/backward."""

    strategy = ""

    def __init__(self):
        self._blocks: dict[str, Sequential] = {}

    def blocks(self) -> dict[str, Sequential]:
        return self._blocks

    def params(self):
        out = []
        for seq in self._blocks.values():
            out.extend(seq.params())
        return out

    def _run_block(self, name, x, train, rng, masks):
        frozen = masks.get(name) if masks else None
        return self._blocks[name].forward(x, train=train, rng=rng, masks=frozen)

    def _check_cache(self, cache):
        if not isinstance(cache, FusionCache) or cache.owner is not self:
            raise StaleCache("cache does not belong to this network")


class IntermediateFusionNet(_FusionNet):
    strategy = "intermediate"

    def __init__(self, audio_dim, video_dim, hidden=DEFAULT_INTERMEDIATE_HIDDEN, *,
                 dropout=0.5, rng, dtype=np.float32):
        super().__init__()
        self.audio_dim, self.video_dim = audio_dim, video_dim
        self._blocks["trunk"] = mlp(audio_dim + video_dim, tuple(hidden), 2, dropout=dropout, rng=rng, dtype=dtype)

    def forward(self, inputs, train=False, rng=None, masks=None):
        a, v = inputs
        x = np.concatenate([a, v], axis=1)
        logits, cache = self._run_block("trunk", x, train, rng, masks)
        return logits, FusionCache(owner=self, block_caches={"trunk": cache})

    def backward(self, cache, grad_logits):
        self._check_cache(cache)
        _, grads = self._blocks["trunk"].backward(cache.block_caches["trunk"], grad_logits)
        return grads


class LateFusionNet(_FusionNet):
    strategy = "late"

    def __init__(self, audio_dim, video_dim, branch_hidden=DEFAULT_BRANCH_HIDDEN,
                 combiner_hidden=DEFAULT_COMBINER_HIDDEN, *, dropout=0.5, rng, dtype=np.float32):
        super().__init__()
        self.audio_dim, self.video_dim = audio_dim, video_dim
        self._blocks["audio"] = mlp(audio_dim, tuple(branch_hidden), 2, dropout=dropout, rng=rng, dtype=dtype, final_softmax=True)
        self._blocks["video"] = mlp(video_dim, tuple(branch_hidden), 2, dropout=dropout, rng=rng, dtype=dtype, final_softmax=True)
        self._blocks["combiner"] = mlp(4, tuple(combiner_hidden), 2, dropout=dropout, rng=rng, dtype=dtype)

    def forward(self, inputs, train=False, rng=None, masks=None):
        a, v = inputs
        pa, ca = self._run_block("audio", a, train, rng, masks)
        pv, cv = self._run_block("video", v, train, rng, masks)
        logits, cc = self._run_block("combiner", np.concatenate([pa, pv], axis=1), train, rng, masks)
        return logits, FusionCache(owner=self, block_caches={"audio": ca, "video": cv, "combiner": cc})

    def backward(self, cache, grad_logits):
        self._check_cache(cache)
        grad_f, combiner_grads = self._blocks["combiner"].backward(cache.block_caches["combiner"], grad_logits)
        _, audio_grads = self._blocks["audio"].backward(cache.block_caches["audio"], grad_f[:, :2])
        _, video_grads = self._blocks["video"].backward(cache.block_caches["video"], grad_f[:, 2:])
        return audio_grads + video_grads + combiner_grads

    def branch_probabilities(self, a, v):
        pa, _ = self._blocks["audio"].forward(np.atleast_2d(a))
        pv, _ = self._blocks["video"].forward(np.atleast_2d(v))
        return pa, pv


class HybridFusionNet(_FusionNet):
    strategy = "hybrid"

    def __init__(self, audio_dim, video_dim, intermediate_hidden=DEFAULT_INTERMEDIATE_HIDDEN,
                 branch_hidden=DEFAULT_BRANCH_HIDDEN, combiner_hidden=DEFAULT_COMBINER_HIDDEN, *,
                 dropout=0.5, rng, dtype=np.float32):
        super().__init__()
        self.audio_dim, self.video_dim = audio_dim, video_dim
        self._blocks["audio"] = mlp(audio_dim, tuple(branch_hidden), 2, dropout=dropout, rng=rng, dtype=dtype, final_softmax=True)
        self._blocks["video"] = mlp(video_dim, tuple(branch_hidden), 2, dropout=dropout, rng=rng, dtype=dtype, final_softmax=True)
        self._blocks["inter"] = mlp(audio_dim + video_dim, tuple(intermediate_hidden), 2, dropout=dropout, rng=rng, dtype=dtype, final_softmax=True)
        self._blocks["combiner"] = mlp(6, tuple(combiner_hidden), 2, dropout=dropout, rng=rng, dtype=dtype)

    def forward(self, inputs, train=False, rng=None, masks=None):
        a, v = inputs
        pa, ca = self._run_block("audio", a, train, rng, masks)
        pv, cv = self._run_block("video", v, train, rng, masks)
        pi, ci = self._run_block("inter", np.concatenate([a, v], axis=1), train, rng, masks)
        fused = np.concatenate([pa, pv, pi], axis=1)
        logits, cc = self._run_block("combiner", fused, train, rng, masks)
        return logits, FusionCache(
            owner=self, block_caches={"audio": ca, "video": cv, "inter": ci, "combiner": cc}
        )

    def backward(self, cache, grad_logits):
        self._check_cache(cache)
        grad_f, combiner_grads = self._blocks["combiner"].backward(cache.block_caches["combiner"], grad_logits)
        _, audio_grads = self._blocks["audio"].backward(cache.block_caches["audio"], grad_f[:, 0:2])
        _, video_grads = self._blocks["video"].backward(cache.block_caches["video"], grad_f[:, 2:4])
        _, inter_grads = self._blocks["inter"].backward(cache.block_caches["inter"], grad_f[:, 4:6])
        return audio_grads + video_grads + inter_grads + combiner_grads


class SingleModalityNet(_FusionNet):
    """Baseline head over one modality; the other input is ignored."""

    def __init__(self, strategy, audio_dim, video_dim, hidden=DEFAULT_BRANCH_HIDDEN, *,
                 dropout=0.5, rng, dtype=np.float32):
        super().__init__()
        if strategy not in ("audio_only", "video_only"):
            raise ShapeMismatch(f"bad single-modality strategy {strategy!r}")
        self.strategy = strategy
        self.audio_dim, self.video_dim = audio_dim, video_dim
        in_dim = audio_dim if strategy == "audio_only" else video_dim
        self._blocks["head"] = mlp(in_dim, tuple(hidden), 2, dropout=dropout, rng=rng, dtype=dtype)

    def forward(self, inputs, train=False, rng=None, masks=None):
        a, v = inputs
        x = a if self.strategy == "audio_only" else v
        logits, cache = self._run_block("head", x, train, rng, masks)
        return logits, FusionCache(owner=self, block_caches={"head": cache})

    def backward(self, cache, grad_logits):
        self._check_cache(cache)
        _, grads = self._blocks["head"].backward(cache.block_caches["head"], grad_logits)
        return grads


def build_network(strategy, audio_dim, video_dim, *, intermediate_hidden=DEFAULT_INTERMEDIATE_HIDDEN,
                  branch_hidden=DEFAULT_BRANCH_HIDDEN, combiner_hidden=DEFAULT_COMBINER_HIDDEN,
                  dropout=0.5, rng, dtype=np.float32):
    if strategy == "intermediate":
        return IntermediateFusionNet(audio_dim, video_dim, intermediate_hidden, dropout=dropout, rng=rng, dtype=dtype)
    if strategy == "late":
        return LateFusionNet(audio_dim, video_dim, branch_hidden, combiner_hidden, dropout=dropout, rng=rng, dtype=dtype)
    if strategy == "hybrid":
        return HybridFusionNet(audio_dim, video_dim, intermediate_hidden, branch_hidden,
                               combiner_hidden, dropout=dropout, rng=rng, dtype=dtype)
    if strategy in ("audio_only", "video_only"):
        return SingleModalityNet(strategy, audio_dim, video_dim, branch_hidden, dropout=dropout, rng=rng, dtype=dtype)
    raise ShapeMismatch(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def _predict_single(net, a, v, clip_id="") -> Prediction:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if a.shape[1] != net.audio_dim or v.shape[1] != net.video_dim:
        raise ShapeMismatch(
            f"got dims ({a.shape[1]}, {v.shape[1]}), expected ({net.audio_dim}, {net.video_dim})"
        )
    dtype = net.params()[0].dtype
    logits, _ = net.forward((a.astype(dtype), v.astype(dtype)), train=False)
    probs = softmax_probs(logits.astype(np.float64))[0]
    return Prediction(clip_id=clip_id, probabilities=probs, predicted_label=int(np.argmax(probs)))


def fuse_intermediate(a, v, net: IntermediateFusionNet) -> Prediction:
    if net.strategy != "intermediate":
        raise ShapeMismatch(f"expected an intermediate head, got {net.strategy!r}")
    return _predict_single(net, a, v)


def fuse_late(a, v, net: LateFusionNet) -> Prediction:
    if net.strategy != "late":
        raise ShapeMismatch(f"expected a late head, got {net.strategy!r}")
    return _predict_single(net, a, v)


def fuse_hybrid(a, v, net: HybridFusionNet) -> Prediction:
    if net.strategy != "hybrid":
        raise ShapeMismatch(f"expected a hybrid head, got {net.strategy!r}")
    return _predict_single(net, a, v)


def predict_clip(clf: "FusionClassifier", clip_id: str, store: EmbeddingStore) -> Prediction:
    """Look up both embeddings for a clip and classify it (eval mode)."""
    a = store.get(clip_id, Modality.AUDIO)
    v = store.get(clip_id, Modality.VIDEO)
    pred = _predict_single(clf.net_, a, v, clip_id=clip_id)
    return pred


# --- sklearn-style estimator ------------------------------------------------

class FusionClassifier(BaseEstimator, ClassifierMixin):
    """Trainable audiovisual fusion head with a scikit-learn interface.

    ``X`` is the horizontal concatenation of the audio and video embedding
    matrices; ``audio_dim`` marks the boundary. ``y`` holds binary labels
    (0 = non-violent, 1 = violent). Training is fully seeded: same inputs
    and seed give bit-identical parameters.
    """

    def __init__(self, strategy: str = "hybrid", audio_dim: int = DEFAULT_AUDIO_DIM,
                 intermediate_hidden: tuple = DEFAULT_INTERMEDIATE_HIDDEN,
                 branch_hidden: tuple = DEFAULT_BRANCH_HIDDEN,
                 combiner_hidden: tuple = DEFAULT_COMBINER_HIDDEN,
                 dropout: float = 0.5, learning_rate: float = 1e-4,
                 batch_size: int = 7, epochs: int = 30, seed: int = 0):
        self.strategy = strategy
        self.audio_dim = audio_dim
        self.intermediate_hidden = intermediate_hidden
        self.branch_hidden = branch_hidden
        self.combiner_hidden = combiner_hidden
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    def _split_modalities(self, X):
        if X.shape[1] <= self.audio_dim:
            raise ShapeMismatch(
                f"X has {X.shape[1]} columns; need more than audio_dim={self.audio_dim}"
            )
        a = X[:, : self.audio_dim].astype(np.float32)
        v = X[:, self.audio_dim :].astype(np.float32)
        return a, v

    def fit(self, X, y):
        X = check_feature_matrix(X, name="X")
        y = check_labels(y, X.shape[0])
        a, v = self._split_modalities(X)
        init_rng = np.random.default_rng(
            np.random.SeedSequence((self.seed & 0xFFFFFFFFFFFFFFFF, 0x696E6974))
        )
        self.video_dim_ = v.shape[1]
        self.net_ = build_network(
            self.strategy, self.audio_dim, self.video_dim_,
            intermediate_hidden=tuple(self.intermediate_hidden),
            branch_hidden=tuple(self.branch_hidden),
            combiner_hidden=tuple(self.combiner_hidden),
            dropout=self.dropout, rng=init_rng,
        )
        cfg = TrainingConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            epochs=self.epochs, seed=self.seed,
        )
        self.history_ = train_epochs(self.net_, (a, v), y, cfg)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "net_"):
            raise ShapeMismatch("classifier is not fitted")

    def decision_logits(self, X):
        self._check_fitted()
        X = check_feature_matrix(X, n_features=self.n_features_in_, name="X")
        logits, _ = self.net_.forward(self._split_modalities(X), train=False)
        return logits.astype(np.float64)

    def predict_proba(self, X):
        return softmax_probs(self.decision_logits(X))

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, path) -> None:
        self._check_fitted()
        meta = {
            "strategy": self.strategy,
            "audio_dim": self.audio_dim,
            "video_dim": self.video_dim_,
            "params": {
                "intermediate_hidden": list(self.intermediate_hidden),
                "branch_hidden": list(self.branch_hidden),
                "combiner_hidden": list(self.combiner_hidden),
                "dropout": self.dropout,
                "learning_rate": self.learning_rate,
                "batch_size": self.batch_size,
                "epochs": self.epochs,
                "seed": self.seed,
            },
        }
        save_checkpoint(path, self.net_.blocks(), meta=meta)

    @classmethod
    def load(cls, path) -> "FusionClassifier":
        blocks, meta = load_checkpoint(path)
        params = meta["params"]
        clf = cls(
            strategy=meta["strategy"], audio_dim=meta["audio_dim"],
            intermediate_hidden=tuple(params["intermediate_hidden"]),
            branch_hidden=tuple(params["branch_hidden"]),
            combiner_hidden=tuple(params["combiner_hidden"]),
            dropout=params["dropout"], learning_rate=params["learning_rate"],
            batch_size=params["batch_size"], epochs=params["epochs"],
            seed=params["seed"],
        )
        rng = np.random.default_rng(0)
        net = build_network(
            meta["strategy"], meta["audio_dim"], meta["video_dim"],
            intermediate_hidden=tuple(params["intermediate_hidden"]),
            branch_hidden=tuple(params["branch_hidden"]),
            combiner_hidden=tuple(params["combiner_hidden"]),
            dropout=params["dropout"], rng=rng,
        )
        for name, seq in net.blocks().items():
            loaded = blocks[name]
            for p, q in zip(seq.params(), loaded.params()):
                p[...] = q
        clf.net_ = net
        clf.video_dim_ = meta["video_dim"]
        clf.classes_ = np.array([0, 1])
        clf.n_features_in_ = meta["audio_dim"] + meta["video_dim"]
        return clf
