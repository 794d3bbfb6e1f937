"""Compiles plan annotations into a timed cue sheet.

Forced-alignment output for each synthesized sub-sentence is shifted onto
the global program timeline to form a word-level timestamp map. Inline SFX
tags then resolve to the onset of their anchor word, and ambiance/BGM
entries expand to the time window their sub-sentence scope covers. The
result is a CueSheet: three sorted cue lists with prompt, start_time,
end_time, duration, and volume, serialized as canonical JSON with 6-decimal
fixed-point seconds.

All times are quantized to the 6-decimal grid when a Cue is constructed so
that serialization round-trips value-identically and byte-identically.
"""
from __future__ import annotations

import difflib
import json
import logging
from dataclasses import dataclass, field

from .errors import (
    AnchorNotFoundError,
    EmptyScopeError,
    NonMonotoneAlignmentError,
    OffsetCountMismatchError,
    SchemaViolationError,
)
from .jsonutil import fixed_point_dumps
from .script import ScriptPlan, normalize_token, parse_inline_sfx

log = logging.getLogger(__name__)

CUE_SCHEMA_VERSION = 1

KINDS = ("sfx", "ambiance", "bgm")

# One-shot effects get a fixed default length, clipped at program end.
DEFAULT_SFX_DURATION = 2.0
DEFAULT_SFX_VOLUME = 0.9

# Seconds grid used for all serialized times.
_GRID = 1e-6


def quantize(seconds: float) -> float:
    return round(seconds * 1e6) / 1e6


@dataclass(frozen=True)
class WordSpan:
    word: str
    start: float
    end: float
    sub_sentence_index: int

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise NonMonotoneAlignmentError(
                f"span {self.word!r}: [{self.start}, {self.end}) is not a forward interval")
        if self.sub_sentence_index < 0:
            raise NonMonotoneAlignmentError("sub_sentence_index must be non-negative")


@dataclass(frozen=True)
class WordTimestampMap:
    spans: tuple = ()
    total_duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        for span in self.spans:
            if span.end > self.total_duration + _GRID:
                raise NonMonotoneAlignmentError(
                    f"span {span.word!r} ends at {span.end}, past total {self.total_duration}")


@dataclass(frozen=True)
class Cue:
    cue_id: str
    kind: str
    prompt: str
    start_time: float
    end_time: float
    volume: float
    duration: float | None = None
    anchor: tuple | None = None  # (word, occurrence_index) for sfx cues

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaViolationError("/kind", f"unknown cue kind {self.kind!r}")
        start = quantize(self.start_time)
        end = quantize(self.end_time)
        duration = quantize(end - start if self.duration is None else self.duration)
        object.__setattr__(self, "start_time", start)
        object.__setattr__(self, "end_time", end)
        object.__setattr__(self, "duration", duration)
        if start < 0 or end <= start:
            raise SchemaViolationError(
                "/start_time", f"cue {self.cue_id!r}: [{start}, {end}] is not a forward interval")
        if abs(duration - (end - start)) > _GRID:
            raise SchemaViolationError(
                "/duration", f"cue {self.cue_id!r}: duration {duration} != end - start")
        if not 0.0 < self.volume <= 1.0:
            raise SchemaViolationError("/volume", f"cue {self.cue_id!r}: volume {self.volume} outside (0, 1]")
        if self.anchor is not None:
            word, occurrence = self.anchor
            if not word or occurrence < 1:
                raise SchemaViolationError("/anchor", f"cue {self.cue_id!r}: malformed anchor")
            object.__setattr__(self, "anchor", (word, int(occurrence)))

    def to_dict(self) -> dict:
        raw = {
            "cue_id": self.cue_id,
            "kind": self.kind,
            "prompt": self.prompt,
            "start_time": self.start_time,
            "end_time": self.end_time,
            "duration": self.duration,
            "volume": self.volume,
        }
        if self.anchor is not None:
            raw["anchor"] = {"word": self.anchor[0], "occurrence_index": self.anchor[1]}
        return raw


@dataclass(frozen=True)
class CueSheet:
    total_duration: float
    sample_rate: int
    sfx_cues: tuple = field(default_factory=tuple)
    ambiance_cues: tuple = field(default_factory=tuple)
    bgm_cues: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "total_duration", quantize(self.total_duration))
        for name in ("sfx_cues", "ambiance_cues", "bgm_cues"):
            cues = tuple(getattr(self, name))
            object.__setattr__(self, name, cues)
            kind = name.split("_")[0]
            previous = None
            for cue in cues:
                if cue.kind != kind:
                    raise SchemaViolationError(
                        f"/{name}", f"cue {cue.cue_id!r} of kind {cue.kind!r} in {name}")
                if cue.end_time > self.total_duration + _GRID:
                    raise SchemaViolationError(
                        f"/{name}", f"cue {cue.cue_id!r} ends at {cue.end_time}, "
                        f"past total {self.total_duration}")
                if previous is not None and cue.start_time < previous:
                    raise SchemaViolationError(f"/{name}", "not sorted by start_time")
                previous = cue.start_time
        if self.sample_rate < 1:
            raise SchemaViolationError("/sample_rate", f"sample_rate {self.sample_rate} must be positive")

    def all_cues(self) -> tuple:
        return self.sfx_cues + self.ambiance_cues + self.bgm_cues


def build_word_map(alignments, sub_sentence_offsets) -> WordTimestampMap:
    """Shift per-sub-sentence alignments onto the global timeline.

    `alignments[i]` must expose `spans` (items with word/start/end, local
    seconds) and `clip_duration`; `sub_sentence_offsets[i]` is where that
    clip starts in the concatenated program.
    """
    alignments = list(alignments)
    offsets = [float(x) for x in sub_sentence_offsets]
    if len(alignments) != len(offsets):
        raise OffsetCountMismatchError(
            f"{len(alignments)} alignments but {len(offsets)} offsets")
    if not alignments:
        return WordTimestampMap(spans=(), total_duration=0.0)
    if any(offset < 0 for offset in offsets):
        raise OffsetCountMismatchError("offsets must be non-negative")
    if any(b < a for a, b in zip(offsets, offsets[1:])):
        raise OffsetCountMismatchError("offsets must be non-decreasing")
    spans = []
    for index, (alignment, offset) in enumerate(zip(alignments, offsets)):
        cursor = 0.0
        for local in alignment.spans:
            if local.start < cursor - 1e-9 or local.end <= local.start:
                raise NonMonotoneAlignmentError(
                    f"sub-sentence {index}: span {local.word!r} at "
                    f"[{local.start}, {local.end}) breaks monotonicity")
            if local.end > alignment.clip_duration + 1e-9:
                raise NonMonotoneAlignmentError(
                    f"sub-sentence {index}: span {local.word!r} ends past the clip")
            cursor = local.end
            spans.append(WordSpan(word=local.word, start=offset + local.start,
                                  end=offset + local.end, sub_sentence_index=index))
    total = offsets[-1] + float(alignments[-1].clip_duration)
    return WordTimestampMap(spans=tuple(spans), total_duration=total)


def resolve_anchor(word_map: WordTimestampMap, anchor, sub_sentence_index: int) -> float:
    """Onset of the n-th occurrence of a word within one sub-sentence.

    Matching is case-insensitive with edge punctuation stripped. On failure
    the error carries the closest-spelled word seen, for diagnostics.
    """
    word, occurrence_index = anchor
    target = normalize_token(word)
    local = [span for span in word_map.spans
             if span.sub_sentence_index == sub_sentence_index]
    seen = 0
    for span in local:
        if normalize_token(span.word) == target:
            seen += 1
            if seen == occurrence_index:
                return span.start
    vocabulary = sorted({normalize_token(span.word) for span in local})
    close = difflib.get_close_matches(target, vocabulary, n=1)
    raise AnchorNotFoundError(word=word, occurrence_index=occurrence_index,
                              nearest=close[0] if close else None,
                              sub_sentence_index=sub_sentence_index)


def _scope_window(scope, windows, pointer: str):
    first, last = scope
    if not windows or first >= len(windows) or last >= len(windows):
        raise EmptyScopeError(
            f"{pointer}: scope [{first}, {last}] outside the {len(windows)} synthesized "
            "sub-sentences")
    return windows[first][0], windows[last][1]


def compile_cue_sheet(plan: ScriptPlan, word_map: WordTimestampMap,
                      sub_sentence_windows, *, sample_rate: int = 24000,
                      sfx_duration: float = DEFAULT_SFX_DURATION,
                      sfx_volume: float = DEFAULT_SFX_VOLUME,
                      lenient_anchors: bool = False) -> CueSheet:
    """Compile a validated plan into a CueSheet on the aligned timeline.

    `sub_sentence_windows[i]` is the global [start, end] of sub-sentence i's
    speech clip. SFX cues start at their anchor word's onset and run for
    `sfx_duration`, clipped at program end; ambiance and BGM cues span the
    union of their scope's windows at the entry's relative volume. With
    `lenient_anchors`, unresolvable anchors drop their cue with a log line
    instead of raising.
    """
    windows = [(float(a), float(b)) for a, b in sub_sentence_windows]
    if len(windows) != len(plan.sub_sentences):
        raise OffsetCountMismatchError(
            f"{len(windows)} windows for {len(plan.sub_sentences)} sub-sentences")
    total = word_map.total_duration

    sfx = []
    for index, sub in enumerate(plan.sub_sentences):
        _clean, inline_cues = parse_inline_sfx(sub.text)
        for tag in inline_cues:
            try:
                onset = resolve_anchor(word_map, (tag.anchor_word, tag.occurrence_index), index)
            except AnchorNotFoundError as exc:
                if not lenient_anchors:
                    raise
                log.warning("dropping sfx cue %r: %s", tag.description, exc)
                continue
            end = min(onset + sfx_duration, total)
            sfx.append((onset, end, tag))
    sfx.sort(key=lambda item: item[0])
    sfx_cues = tuple(
        Cue(cue_id=f"sfx-{i:03d}", kind="sfx", prompt=tag.description,
            start_time=onset, end_time=end, volume=sfx_volume,
            anchor=(tag.anchor_word, tag.occurrence_index))
        for i, (onset, end, tag) in enumerate(sfx))

    def scene_cues(entries, kind: str) -> tuple:
        spans = []
        for index, entry in enumerate(entries):
            start, end = _scope_window(entry.scope, windows, f"/{kind}/{index}")
            spans.append((start, end, entry))
        spans.sort(key=lambda item: item[0])
        return tuple(
            Cue(cue_id=f"{kind}-{i:03d}", kind=kind, prompt=entry.prompt,
                start_time=start, end_time=end, volume=entry.relative_volume)
            for i, (start, end, entry) in enumerate(spans))

    return CueSheet(
        total_duration=total,
        sample_rate=sample_rate,
        sfx_cues=sfx_cues,
        ambiance_cues=scene_cues(plan.ambiance, "ambiance"),
        bgm_cues=scene_cues(plan.bgm, "bgm"),
    )


def serialize_cue_sheet(sheet: CueSheet) -> bytes:
    raw = {
        "schema_version": CUE_SCHEMA_VERSION,
        "sample_rate": sheet.sample_rate,
        "total_duration": sheet.total_duration,
        "sfx_cues": [cue.to_dict() for cue in sheet.sfx_cues],
        "ambiance_cues": [cue.to_dict() for cue in sheet.ambiance_cues],
        "bgm_cues": [cue.to_dict() for cue in sheet.bgm_cues],
    }
    return fixed_point_dumps(raw, decimals=6).encode("utf-8")


def _cue_from_dict(raw: dict, pointer: str) -> Cue:
    if not isinstance(raw, dict):
        raise SchemaViolationError(pointer, "cue must be an object")
    try:
        anchor = raw.get("anchor")
        if anchor is not None:
            anchor = (anchor["word"], int(anchor["occurrence_index"]))
        return Cue(
            cue_id=raw["cue_id"],
            kind=raw["kind"],
            prompt=raw["prompt"],
            start_time=float(raw["start_time"]),
            end_time=float(raw["end_time"]),
            duration=float(raw["duration"]),
            volume=float(raw["volume"]),
            anchor=anchor,
        )
    except KeyError as exc:
        raise SchemaViolationError(pointer, f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError, SchemaViolationError) as exc:
        raise SchemaViolationError(pointer, str(exc)) from exc


def parse_cue_sheet(data: bytes) -> CueSheet:
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolationError("", f"cue sheet is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SchemaViolationError("", "cue sheet must be a JSON object")
    if raw.get("schema_version") != CUE_SCHEMA_VERSION:
        raise SchemaViolationError(
            "/schema_version", f"unsupported schema_version {raw.get('schema_version')!r}")
    lists = {}
    for name in ("sfx_cues", "ambiance_cues", "bgm_cues"):
        items = raw.get(name)
        if not isinstance(items, list):
            raise SchemaViolationError(f"/{name}", "must be an array")
        lists[name] = tuple(_cue_from_dict(item, f"/{name}/{i}")
                            for i, item in enumerate(items))
    try:
        return CueSheet(
            total_duration=float(raw["total_duration"]),
            sample_rate=int(raw["sample_rate"]),
            **lists,
        )
    except KeyError as exc:
        raise SchemaViolationError("", f"missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError, SchemaViolationError) as exc:
        raise SchemaViolationError("", str(exc)) from exc
