"""Dataset catalog: clip entries, labels, split assignment, and manifest IO.

The manifest file is UTF-8, tab-separated, one record per line::

    id <TAB> media_path <TAB> label <TAB> split <TAB> duration_s <TAB> provenance

with ``label`` in {violent, nonviolent}, ``split`` in {train, val, unassigned}
and ``provenance`` either ``original`` or ``augmented:<parent_id>`` optionally
followed by ``:<compact-json>`` holding the replayable augmentation parameters.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DanglingParent, DuplicateId, EmptyManifest, ParseError

# Fixed two-class vocabulary; index 0 is the tie-break class for argmax
# predictions (ties resolve toward non-violent).
CLASS_NAMES = ("nonviolent", "violent")


class Label(str, enum.Enum):
    NONVIOLENT = "nonviolent"
    VIOLENT = "violent"

    @property
    def index(self) -> int:
        return CLASS_NAMES.index(self.value)


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    UNASSIGNED = "unassigned"


@dataclass(frozen=True)
class ClipEntry:
    """One clip in the dataset catalog.

    Attributes:
        id: Unique identifier within a manifest. Must not contain tabs,
            newlines, or colons (colons delimit the provenance field).
        media_path: Path to the source media (opaque to the catalog).
        label: Two-class ground truth.
        split: Current split assignment; ``UNASSIGNED`` until a split is
            applied.
        duration_s: Clip length in seconds, strictly positive.
        parent_id: For augmented entries, the id of the original clip this
            one was derived from; ``None`` for originals.
        aug_params: For augmented entries, a JSON-compatible dict holding
            the per-modality augmentation parameters needed to replay the
            augmentation bit-identically. Opaque to this module.
    """

    id: str
    media_path: str
    label: Label
    split: Split = Split.UNASSIGNED
    duration_s: float = 1.0
    parent_id: str | None = None
    aug_params: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.id or any(c in self.id for c in "\t\n:"):
            raise ParseError(f"invalid clip id: {self.id!r}")
        if not math.isfinite(self.duration_s) or self.duration_s <= 0:
            raise ParseError(f"clip {self.id}: duration_s must be > 0, got {self.duration_s}")
        if self.aug_params is not None and self.parent_id is None:
            raise ParseError(f"clip {self.id}: aug_params on an original entry")

    @property
    def is_augmented(self) -> bool:
        return self.parent_id is not None

    def provenance(self) -> str:
        if self.parent_id is None:
            return "original"
        prov = f"augmented:{self.parent_id}"
        if self.aug_params is not None:
            prov += ":" + json.dumps(self.aug_params, separators=(",", ":"), sort_keys=True)
        return prov


@dataclass(frozen=True)
class ClipManifest:
    """Ordered clip catalog with a fixed two-class vocabulary.

    Invariants (checked at construction): ids are unique, every augmented
    entry references an existing original parent and carries its label.
    """

    entries: tuple[ClipEntry, ...]
    class_names: tuple[str, str] = CLASS_NAMES

    def __post_init__(self):
        if len(self.class_names) != 2:
            raise ParseError(f"exactly two classes required, got {self.class_names}")
        object.__setattr__(self, "entries", tuple(self.entries))
        seen: dict[str, ClipEntry] = {}
        for e in self.entries:
            if e.id in seen:
                raise DuplicateId(f"duplicate clip id: {e.id}")
            seen[e.id] = e
        for e in self.entries:
            if e.parent_id is None:
                continue
            parent = seen.get(e.parent_id)
            if parent is None:
                raise DanglingParent(f"clip {e.id}: parent {e.parent_id} not in manifest")
            if parent.is_augmented:
                raise DanglingParent(f"clip {e.id}: parent {e.parent_id} is not an original")
            if parent.label != e.label:
                raise ParseError(f"clip {e.id}: label differs from parent {e.parent_id}")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self, clip_id: str) -> ClipEntry:
        for e in self.entries:
            if e.id == clip_id:
                return e
        raise KeyError(clip_id)

    def originals(self) -> tuple[ClipEntry, ...]:
        return tuple(e for e in self.entries if not e.is_augmented)

    def augmented(self) -> tuple[ClipEntry, ...]:
        return tuple(e for e in self.entries if e.is_augmented)

    def is_balanced(self) -> bool:
        """True when original entries are evenly split between the classes."""
        counts = {name: 0 for name in self.class_names}
        for e in self.originals():
            counts[e.label.value] += 1
        return len(set(counts.values())) == 1


def _parse_provenance(text: str, lineno: int) -> tuple[str | None, dict | None]:
    if text == "original":
        return None, None
    parts = text.split(":", 2)
    if parts[0] != "augmented" or len(parts) < 2 or not parts[1]:
        raise ParseError(f"line {lineno}: bad provenance {text!r}")
    parent_id = parts[1]
    if len(parts) == 2:
        return parent_id, None
    try:
        params = json.loads(parts[2])
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: bad augmentation params: {exc}") from exc
    if not isinstance(params, dict):
        raise ParseError(f"line {lineno}: augmentation params must be a JSON object")
    return parent_id, params


def parse_entry(line: str, lineno: int = 0) -> ClipEntry:
    fields = line.rstrip("\n").split("\t")
    if len(fields) != 6:
        raise ParseError(f"line {lineno}: expected 6 tab-separated fields, got {len(fields)}")
    clip_id, media_path, label_s, split_s, duration_s, provenance = fields
    try:
        label = Label(label_s)
    except ValueError:
        raise ParseError(f"line {lineno}: unknown label {label_s!r}") from None
    try:
        split = Split(split_s)
    except ValueError:
        raise ParseError(f"line {lineno}: unknown split {split_s!r}") from None
    try:
        duration = float(duration_s)
    except ValueError:
        raise ParseError(f"line {lineno}: bad duration {duration_s!r}") from None
    parent_id, aug_params = _parse_provenance(provenance, lineno)
    return ClipEntry(
        id=clip_id,
        media_path=media_path,
        label=label,
        split=split,
        duration_s=duration,
        parent_id=parent_id,
        aug_params=aug_params,
    )


def format_entry(entry: ClipEntry) -> str:
    return "\t".join(
        [
            entry.id,
            entry.media_path,
            entry.label.value,
            entry.split.value,
            f"{entry.duration_s:g}",
            entry.provenance(),
        ]
    )


def load_manifest(path: str | Path) -> ClipManifest:
    """Load and validate a manifest file; see the module docstring for the format."""
    text = Path(path).read_text(encoding="utf-8")
    entries = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        entries.append(parse_entry(line, lineno))
    return ClipManifest(entries=tuple(entries))


def save_manifest(manifest: ClipManifest, path: str | Path) -> None:
    lines = [format_entry(e) for e in manifest.entries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class SplitAssignment:
    """Deterministic clip_id -> split mapping produced by :func:`random_split`."""

    seed: int
    train_fraction: float
    mapping: dict[str, Split]


def random_split(manifest: ClipManifest, seed: int, train_fraction: float = 0.8) -> SplitAssignment:
    """Randomly partition original clips into train/validation.

    Originals are shuffled with a generator seeded by ``seed`` and cut at
    ``floor(train_fraction * n)``; every augmented entry inherits its
    parent's side so augmented copies can never leak across the split.
    Pure function of (manifest order, seed, train_fraction).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    originals = manifest.originals()
    if not originals:
        raise EmptyManifest("manifest has no original entries to split")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(originals))
    n_train = int(math.floor(train_fraction * len(originals)))
    mapping: dict[str, Split] = {}
    for rank, idx in enumerate(order):
        mapping[originals[idx].id] = Split.TRAIN if rank < n_train else Split.VAL
    for e in manifest.entries:
        if e.is_augmented:
            mapping[e.id] = mapping[e.parent_id]
    return SplitAssignment(seed=seed, train_fraction=train_fraction, mapping=mapping)


def with_split(manifest: ClipManifest, assignment: SplitAssignment) -> ClipManifest:
    """Return a copy of the manifest with split fields set from ``assignment``."""
    entries = tuple(replace(e, split=assignment.mapping[e.id]) for e in manifest.entries)
    return ClipManifest(entries=entries, class_names=manifest.class_names)
