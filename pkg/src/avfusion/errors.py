"""Exception hierarchy shared by all avfusion modules.

Every error class carries a distinct ``exit_code`` so the CLI can map
failure classes to process exit statuses (codes start at 10 to stay clear
of click's own usage-error code 2).
"""


class AVFusionError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


# --- manifest / catalog -------------------------------------------------

class ParseError(AVFusionError):
    """Malformed manifest line, unknown label, or bad field value."""

    exit_code = 10


class DuplicateId(AVFusionError):
    """Two manifest entries share an id."""

    exit_code = 11


class DanglingParent(AVFusionError):
    """Augmented entry references a parent id that is not in the manifest."""

    exit_code = 12


class EmptyManifest(AVFusionError):
    """Operation requires at least one original entry."""

    exit_code = 13


class AlreadyAugmented(AVFusionError):
    """Dataset expansion refuses to re-augment augmented entries."""

    exit_code = 14


# --- binary stores ------------------------------------------------------

class DimMismatch(AVFusionError):
    """Embedding records in one file must share modality and dimension."""

    exit_code = 15


class CorruptHeader(AVFusionError):
    """Bad magic bytes or unsupported version in a binary file."""

    exit_code = 16


class TruncatedFile(AVFusionError):
    """Binary file ends before the payload promised by its header."""

    exit_code = 17


# --- signal frontends ---------------------------------------------------

class UnsupportedRate(AVFusionError):
    """Input sample rate below the supported minimum (8 kHz)."""

    exit_code = 18


class EmptyInput(AVFusionError):
    """Empty waveform or image sequence."""

    exit_code = 19


class TooShort(AVFusionError):
    """Signal too short for the requested analysis window."""

    exit_code = 20


class ShapeMismatch(AVFusionError):
    """Array shape does not match the operation's contract."""

    exit_code = 21


class NegativeInput(AVFusionError):
    """Log compression requires non-negative input."""

    exit_code = 22


class EmptySequence(AVFusionError):
    """Frame sampling requires a non-empty frame sequence."""

    exit_code = 23


# --- augmentation -------------------------------------------------------

class UnknownOp(AVFusionError):
    """Augmentation op name outside the closed per-modality set."""

    exit_code = 24


class ParamOutOfRange(AVFusionError):
    """Augmentation parameter outside its documented range."""

    exit_code = 25


# --- neural core --------------------------------------------------------

class InvalidOneHot(AVFusionError):
    """Target vector is not a valid one-hot encoding."""

    exit_code = 26


class StaleCache(AVFusionError):
    """Backward called with a cache from a different forward pass."""

    exit_code = 27


class EmptyDataset(AVFusionError):
    """Training requires a non-empty dataset."""

    exit_code = 28


# --- fusion / harness ---------------------------------------------------

class MissingEmbedding(AVFusionError):
    """Clip id absent from the embedding store."""

    exit_code = 29


class EmptyEvalSet(AVFusionError):
    """Evaluation requires a non-empty set."""

    exit_code = 30


class MissingArtifacts(AVFusionError):
    """Required manifest or embedding files are absent."""

    exit_code = 31


class EmptySpace(AVFusionError):
    """Random search requires a non-empty, well-formed parameter space."""

    exit_code = 32
