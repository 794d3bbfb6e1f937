"""Exception taxonomy shared across the engine.

Grouped by the subsystem that raises them; the CLI maps groups to exit codes.
"""
from __future__ import annotations


class FablemixError(Exception):
    """Base class for all engine errors."""


# --- configuration ---------------------------------------------------------

class ConfigError(FablemixError):
    pass


# --- script plans and schemas ----------------------------------------------

class PlanError(FablemixError):
    pass


class MalformedTagError(PlanError):
    """An inline SFX tag could not be parsed. ``offset`` is the byte offset
    of the opening bracket in the UTF-8 encoding of the input text."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class SchemaViolationError(PlanError):
    """A JSON document violates its schema. ``pointer`` is a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


class DanglingReferenceError(SchemaViolationError):
    """A plan references a character id that is not declared."""


# --- model selection --------------------------------------------------------

class SelectionError(FablemixError):
    pass


class NoCapableModelError(SelectionError):
    pass


class DuplicateModelIdError(SelectionError):
    pass


class DuplicateRankError(SelectionError):
    pass


# --- retrieval and prosody ---------------------------------------------------

class DimensionMismatchError(FablemixError):
    pass


class NoNeutralSampleError(FablemixError):
    pass


class InsufficientPairsError(FablemixError):
    """Fewer than the requested number of emotion-neutral pairs survived
    filtering. The pairs that did survive are attached so callers may proceed
    with a reduced count."""

    def __init__(self, found: int, requested: int, pairs=()):
        super().__init__(f"found {found} of {requested} requested pairs")
        self.found = found
        self.requested = requested
        self.pairs = list(pairs)


class SpaceMismatchError(FablemixError):
    """Vectors from different embedding spaces were combined."""


class ZeroDirectionError(FablemixError):
    pass


class NotUnitError(FablemixError):
    pass


# --- cue compilation ----------------------------------------------------------

class AlignmentError(FablemixError):
    pass


class NonMonotoneAlignmentError(AlignmentError):
    pass


class OffsetCountMismatchError(AlignmentError):
    pass


class AnchorNotFoundError(AlignmentError):
    def __init__(self, word: str, occurrence_index: int, nearest: str | None = None,
                 sub_sentence_index: int | None = None):
        detail = f"anchor {word!r} occurrence {occurrence_index} not found"
        if sub_sentence_index is not None:
            detail += f" in sub-sentence {sub_sentence_index}"
        if nearest:
            detail += f" (nearest word: {nearest!r})"
        super().__init__(detail)
        self.word = word
        self.occurrence_index = occurrence_index
        self.nearest = nearest
        self.sub_sentence_index = sub_sentence_index


class EmptyScopeError(AlignmentError):
    pass


# --- audio -------------------------------------------------------------------

class AudioError(FablemixError):
    pass


class UnsupportedFormatError(AudioError):
    pass


class CorruptHeaderError(AudioError):
    pass


class RateMismatchError(AudioError):
    pass


class MissingAssetError(AudioError):
    def __init__(self, message: str, cue_id: str = ""):
        super().__init__(message)
        self.cue_id = cue_id


# --- backends -----------------------------------------------------------------

class BackendError(FablemixError):
    pass


class BackendUnavailableError(BackendError):
    pass


class ModeUnsupportedError(BackendError):
    pass


class MalformedResponseError(BackendError):
    """A judge response carried no parseable score block."""


# --- evaluation -----------------------------------------------------------------

class TemplateMissingError(FablemixError):
    pass


class DegenerateVarianceError(FablemixError):
    pass


class ScoreAlignmentError(FablemixError):
    """Machine and human score sets do not cover the same sample ids."""


class EvaluationFailedError(FablemixError):
    """Every run of an evaluation failed."""
