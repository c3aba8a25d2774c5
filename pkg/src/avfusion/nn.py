"""Minimal neural machinery: dense layers, inverted dropout, softmax
cross-entropy, Adam, and a deterministic mini-batch training loop.

Everything runs on plain numpy arrays. Networks are built in fp32 for
training and fp64 for gradient verification (pass ``dtype``). Dropout uses
the inverted convention (kept units scaled by 1/(1-rate)) so evaluation
needs no rescaling, and evaluation-mode forward consumes no RNG.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CorruptHeader,
    EmptyDataset,
    InvalidOneHot,
    ShapeMismatch,
    StaleCache,
    TruncatedFile,
)

DEFAULT_LEARNING_RATE = 1e-4
DEFAULT_BATCH_SIZE = 7
DEFAULT_DROPOUT = 0.5


@dataclass
class TrainingConfig:
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    epochs: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class Dense:
    """Fully connected layer, optionally followed by ReLU.

    He-normal weight init (std sqrt(2/in_dim)), zero biases.
    """

    def __init__(self, in_dim: int, out_dim: int, activation: str = "linear", *,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        if activation not in ("linear", "relu"):
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        if rng is None:
            self.weights = np.zeros((out_dim, in_dim), dtype=dtype)
        else:
            self.weights = (rng.standard_normal((out_dim, in_dim)) * np.sqrt(2.0 / in_dim)).astype(dtype)
        self.bias = np.zeros(out_dim, dtype=dtype)

    def forward(self, x):
        z = x @ self.weights.T + self.bias
        out = np.maximum(z, 0.0) if self.activation == "relu" else z
        return out, (x, z)

    def backward(self, grad_out, cache):
        x, z = cache
        dz = grad_out * (z > 0) if self.activation == "relu" else grad_out
        dw = dz.T @ x              # (out, in)
        db = dz.sum(axis=0)
        dx = dz @ self.weights
        return dx, [dw, db]

    def params(self):
        return [self.weights, self.bias]


class Dropout:
    """Inverted dropout; identity in eval mode."""

    def __init__(self, rate: float = DEFAULT_DROPOUT):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, train: bool, rng: np.random.Generator | None, mask=None):
        if not train or self.rate == 0.0:
            return x, None
        if mask is None:
            if rng is None:
                raise ShapeMismatch("training-mode dropout needs an RNG or a frozen mask")
            mask = (rng.random(x.shape) >= self.rate).astype(x.dtype) / (1.0 - self.rate)
        return x * mask, mask

    def backward(self, grad_out, mask):
        return grad_out if mask is None else grad_out * mask

    def params(self):
        return []


class Softmax:
    """Row-wise softmax with max-subtraction."""

    def forward(self, x):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        s = e / e.sum(axis=-1, keepdims=True)
        return s, s

    def backward(self, grad_out, s):
        # ds_i/dz_j = s_i (delta_ij - s_j)
        return s * (grad_out - (grad_out * s).sum(axis=-1, keepdims=True))

    def params(self):
        return []


@dataclass
class SequentialCache:
    owner: object
    items: list
    masks: list = field(default_factory=list)


class Sequential:
    """A straight stack of layers with explicit forward/backward."""

    def __init__(self, layers: list):
        self.layers = list(layers)

    def forward(self, x, *, train: bool = False, rng: np.random.Generator | None = None,
                masks: list | None = None):
        items = []
        used_masks = []
        mask_idx = 0
        for layer in self.layers:
            if isinstance(layer, Dropout):
                frozen = masks[mask_idx] if masks is not None else None
                x, mask = layer.forward(x, train, rng, mask=frozen)
                items.append(mask)
                used_masks.append(mask)
                mask_idx += 1
            else:
                x, cache = layer.forward(x)
                items.append(cache)
        return x, SequentialCache(owner=self, items=items, masks=used_masks)

    def backward(self, cache: SequentialCache, grad_out):
        if cache.owner is not self:
            raise StaleCache("cache does not belong to this network")
        grads_reversed = []
        for layer, item in zip(reversed(self.layers), reversed(cache.items)):
            if isinstance(layer, Dropout):
                grad_out = layer.backward(grad_out, item)
            elif isinstance(layer, Dense):
                grad_out, layer_grads = layer.backward(grad_out, item)
                grads_reversed.append(layer_grads)
            else:
                grad_out = layer.backward(grad_out, item)
        grads = []
        for layer_grads in reversed(grads_reversed):
            grads.extend(layer_grads)
        return grad_out, grads

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    @property
    def out_dim(self) -> int:
        for layer in reversed(self.layers):
            if isinstance(layer, Dense):
                return layer.out_dim
        raise ShapeMismatch("network has no dense layers")


def mlp(in_dim: int, hidden: tuple[int, ...], out_dim: int, *, dropout: float,
        rng: np.random.Generator, dtype=np.float32, final_softmax: bool = False) -> Sequential:
    """Dense/ReLU stack with dropout after every hidden layer."""
    layers: list = []
    prev = in_dim
    for width in hidden:
        layers.append(Dense(prev, width, "relu", rng=rng, dtype=dtype))
        if dropout > 0.0:
            layers.append(Dropout(dropout))
        prev = width
    layers.append(Dense(prev, out_dim, "linear", rng=rng, dtype=dtype))
    if final_softmax:
        layers.append(Softmax())
    return Sequential(layers)


def _check_one_hot(one_hot: np.ndarray) -> None:
    vals = np.unique(one_hot)
    if not set(vals.tolist()) <= {0.0, 1.0}:
        raise InvalidOneHot(f"one-hot entries must be 0 or 1, got {vals}")
    if not np.all(one_hot.sum(axis=-1) == 1.0):
        raise InvalidOneHot("each one-hot row must contain exactly one 1")


def softmax_ce_loss(logits: np.ndarray, one_hot: np.ndarray):
    """Per-sample categorical cross-entropy over softmax outputs.

    loss = -ln softmax(logits)[true];  grad_logits = softmax(logits) - one_hot.
    Accepts a single (K,) vector or an (n, K) batch; batch loss is the
    per-sample mean and the gradient carries the 1/n factor.
    """
    logits = np.asarray(logits)
    one_hot = np.asarray(one_hot, dtype=logits.dtype)
    if logits.shape != one_hot.shape:
        raise ShapeMismatch(f"logits {logits.shape} vs one_hot {one_hot.shape}")
    _check_one_hot(one_hot)
    squeeze = logits.ndim == 1
    if squeeze:
        logits = logits[None, :]
        one_hot = one_hot[None, :]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    n = logits.shape[0]
    loss = float(-(one_hot * log_probs).sum() / n)
    grad = (np.exp(log_probs) - one_hot) / n
    return loss, (grad[0] if squeeze else grad)


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params: list) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, cfg: TrainingConfig):
    """One Adam update, in place.

    t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
    p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeMismatch("params/grads/state length mismatch")
    state.t += 1
    bc1 = 1.0 - cfg.beta1**state.t
    bc2 = 1.0 - cfg.beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param shape {p.shape} vs grad shape {g.shape}")
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
    return params, state


@dataclass
class EpochStats:
    loss: float
    accuracy: float


def one_hot_labels(labels: np.ndarray, n_classes: int = 2, dtype=np.float32) -> np.ndarray:
    out = np.zeros((len(labels), n_classes), dtype=dtype)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def train_epochs(net, inputs: tuple, labels: np.ndarray, cfg: TrainingConfig) -> list[EpochStats]:
    """Seeded mini-batch training with Adam.

    ``net`` exposes forward(inputs, train, rng, masks) -> (logits, cache),
    backward(cache, grad) -> grads, and params(). ``inputs`` is a tuple of
    row-aligned arrays sliced together into batches (last batch may be
    short). Shuffling, dropout, and the optimizer are all driven by
    ``cfg.seed``, so identical calls produce bit-identical parameters.

    Per-epoch stats record the mean train-mode batch loss and the
    eval-mode accuracy at the end of the epoch.
    """
    n = len(labels)
    if n == 0:
        raise EmptyDataset("training set is empty")
    for arr in inputs:
        if arr.shape[0] != n:
            raise ShapeMismatch("inputs and labels must agree on sample count")
    # namespace tag keeps these streams disjoint from seeded init streams
    root = np.random.SeedSequence((cfg.seed & 0xFFFFFFFFFFFFFFFF, 0x7261696E))
    shuffle_rng, dropout_rng = [np.random.default_rng(s) for s in root.spawn(2)]
    params = net.params()
    state = AdamState.for_params(params)
    dtype = params[0].dtype if params else np.float32
    targets = one_hot_labels(labels, dtype=dtype)
    history = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = tuple(arr[idx] for arr in inputs)
            logits, cache = net.forward(batch, train=True, rng=dropout_rng)
            loss, grad = softmax_ce_loss(logits, targets[idx])
            grads = net.backward(cache, grad)
            adam_step(params, grads, state, cfg)
            batch_losses.append(loss)
        logits, _ = net.forward(inputs, train=False)
        accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
        history.append(EpochStats(loss=float(np.mean(batch_losses)), accuracy=accuracy))
    return history


# --- checkpoints ----------------------------------------------------------

CHECKPOINT_MAGIC = b"AVCK"
CHECKPOINT_VERSION = 1


def _layer_meta(layer) -> dict:
    if isinstance(layer, Dense):
        return {"kind": "dense", "in": layer.in_dim, "out": layer.out_dim, "activation": layer.activation}
    if isinstance(layer, Dropout):
        return {"kind": "dropout", "rate": layer.rate}
    if isinstance(layer, Softmax):
        return {"kind": "softmax"}
    raise ShapeMismatch(f"unknown layer type {type(layer).__name__}")


def _layer_from_meta(meta: dict):
    if meta["kind"] == "dense":
        return Dense(meta["in"], meta["out"], meta["activation"])
    if meta["kind"] == "dropout":
        return Dropout(meta["rate"])
    if meta["kind"] == "softmax":
        return Softmax()
    raise CorruptHeader(f"unknown layer kind {meta['kind']!r}")


def save_checkpoint(path: str | Path, blocks: dict[str, Sequential], meta: dict | None = None) -> None:
    """Write named layer stacks plus fp32 parameters; loads back bit-exactly."""
    header = {
        "meta": meta or {},
        "blocks": [
            {"name": name, "layers": [_layer_meta(l) for l in seq.layers]}
            for name, seq in blocks.items()
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for seq in blocks.values():
            for p in seq.params():
                fh.write(np.ascontiguousarray(p, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, Sequential], dict]:
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != CHECKPOINT_MAGIC:
        raise CorruptHeader(f"{path}: not a checkpoint file")
    version, header_len = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CorruptHeader(f"{path}: unsupported version {version}")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptHeader(f"{path}: bad header: {exc}") from exc
    offset = 12 + header_len
    blocks: dict[str, Sequential] = {}
    for block in header["blocks"]:
        seq = Sequential([_layer_from_meta(m) for m in block["layers"]])
        for p in seq.params():
            nbytes = p.size * 4
            if offset + nbytes > len(data):
                raise TruncatedFile(f"{path}: parameter blob ends early")
            p[...] = np.frombuffer(data, dtype="<f4", count=p.size, offset=offset).reshape(p.shape)
            offset += nbytes
        blocks[block["name"]] = seq
    return blocks, header["meta"]
