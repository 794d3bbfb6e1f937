"""Structured story scripts: plan types, the inline SFX tag grammar, and
plan JSON parsing/validation.

A plan is the structured script a planner produces before any audio exists:
characters with timbre descriptions, emotion-level sub-sentences (whose text
may carry inline ``[SFX: description@anchor_word]`` tags), and scene-scoped
ambiance and background-music entries.
"""
from __future__ import annotations

import json
import logging
import math
import re
from dataclasses import dataclass

from .errors import DanglingReferenceError, MalformedTagError, SchemaViolationError
from .jsonutil import canonical_dumps

log = logging.getLogger(__name__)

PLAN_SCHEMA_VERSION = 1

# Shipped default; override by passing an explicit library to validate_plan.
DEFAULT_PARALINGUISTIC_LIBRARY = ("breath", "laughter", "emphasis", "sigh", "pause")


@dataclass(frozen=True)
class CharacterSpec:
    id: str
    display_name: str
    timbre_description: str
    language: str


@dataclass(frozen=True)
class InlineSfx:
    description: str
    anchor_word: str
    occurrence_index: int = 1


@dataclass(frozen=True)
class SubSentence:
    character_id: str
    text: str
    emotion_description: str
    paralinguistic_tokens: tuple[str, ...] = ()
    order_index: int = 0
    # Planner verdict: does the required emotion differ from the reference
    # speech? Selection needs it and no downstream stage can re-derive it.
    emotion_shift: bool = False
    # Planner-suggested emotion intensity; consulted only under the
    # "planner" alpha policy.
    alpha: float | None = None


@dataclass(frozen=True)
class AmbianceEntry:
    prompt: str
    scope: tuple[int, int]
    relative_volume: float = 0.35


@dataclass(frozen=True)
class BgmEntry:
    prompt: str
    scope: tuple[int, int]
    relative_volume: float = 0.5


@dataclass(frozen=True)
class ScriptPlan:
    characters: tuple[CharacterSpec, ...]
    sub_sentences: tuple[SubSentence, ...]
    ambiance: tuple[AmbianceEntry, ...] = ()
    bgm: tuple[BgmEntry, ...] = ()
    source_instruction: str = ""


@dataclass(frozen=True)
class Violation:
    pointer: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


# --- inline SFX tag grammar ---------------------------------------------------
#
# Tag shape: "[SFX:" + optional space + description + "@" + anchor_word + "]".
# The keyword is case-sensitive; the anchor is split off at the LAST "@" so
# descriptions may themselves contain "@". Anchors are single whitespace-free
# tokens.

_TAG_OPEN = "[SFX:"
_WORD_RE = re.compile(r"\S+")


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def normalize_token(word: str) -> str:
    """Matching form of a script word: case-folded, punctuation trimmed."""
    return word.strip("\"'.,;:!?()[]{}…“”‘’-").casefold()


def count_word_occurrences(text: str, word: str) -> int:
    target = normalize_token(word)
    if not target:
        return 0
    return sum(1 for m in _WORD_RE.finditer(text) if normalize_token(m.group(0)) == target)


def parse_inline_sfx(text: str, lenient: bool = False) -> tuple[str, list[InlineSfx]]:
    """Strip ``[SFX: description@anchor_word]`` tags out of ``text``.

    Returns the clean text (whitespace around removed tags collapsed to a
    single space, boundary whitespace dropped) and the cues in left-to-right
    order. Each cue's occurrence_index is the count of earlier occurrences of
    its anchor word in the clean text up to the tag position, plus one.

    Malformed tags raise MalformedTagError with the byte offset of the
    opening bracket; with ``lenient`` they are logged and dropped (an
    unclosed opener is kept as literal text).
    """
    clean_parts: list[str] = []
    cues: list[InlineSfx] = []
    pos = 0
    while True:
        start = text.find(_TAG_OPEN, pos)
        if start == -1:
            clean_parts.append(text[pos:])
            break
        end = text.find("]", start)
        offset = _byte_offset(text, start)
        if end == -1:
            if not lenient:
                raise MalformedTagError("unclosed SFX tag", offset)
            log.warning("dropping unclosed SFX tag at byte %d; keeping literal text", offset)
            clean_parts.append(text[pos:])
            break
        body = text[start + len(_TAG_OPEN):end]
        problem = None
        description = anchor = ""
        if "@" not in body:
            problem = "SFX tag missing '@' separator"
        else:
            description, anchor = body.rsplit("@", 1)
            description = description.strip()
            anchor = anchor.strip()
            if not description:
                problem = "SFX tag has empty description"
            elif not anchor:
                problem = "SFX tag has empty anchor word"
            elif _WORD_RE.fullmatch(anchor) is None:
                problem = "SFX anchor word contains whitespace"
        if problem is not None:
            if not lenient:
                raise MalformedTagError(problem, offset)
            log.warning("%s at byte %d; dropping tag", problem, offset)
        # Remove the tag along with surrounding whitespace: a single space is
        # kept only when the tag sat between two non-space characters.
        before = text[pos:start].rstrip(" \t")
        clean_parts.append(before)
        after_start = end + 1
        while after_start < len(text) and text[after_start] in " \t":
            after_start += 1
        at_left_edge = not any(part.strip() for part in clean_parts)
        at_right_edge = after_start >= len(text)
        if not at_left_edge and not at_right_edge:
            clean_parts.append(" ")
        if problem is None:
            prior = count_word_occurrences("".join(clean_parts), anchor)
            cues.append(InlineSfx(description=description, anchor_word=anchor,
                                  occurrence_index=prior + 1))
        pos = after_start
    return "".join(clean_parts), cues


# --- plan JSON -----------------------------------------------------------------


def _require(obj: dict, key: str, kind, pointer: str):
    if key not in obj:
        raise SchemaViolationError(f"{pointer}/{key}", "missing required field")
    value = obj[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise SchemaViolationError(f"{pointer}/{key}", f"expected {kind.__name__}")
    return value


def _string_list(obj: dict, key: str, pointer: str, default=None) -> tuple[str, ...]:
    if key not in obj:
        if default is not None:
            return default
        raise SchemaViolationError(f"{pointer}/{key}", "missing required field")
    value = obj[key]
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise SchemaViolationError(f"{pointer}/{key}", "expected list of strings")
    return tuple(value)


def _scope(obj: dict, pointer: str) -> tuple[int, int]:
    value = obj.get("scope")
    if (not isinstance(value, list) or len(value) != 2
            or any(not isinstance(v, int) or isinstance(v, bool) for v in value)):
        raise SchemaViolationError(f"{pointer}/scope", "expected [first, last] integer pair")
    return (value[0], value[1])


def _scene_entry(obj: dict, pointer: str, default_volume: float, cls):
    prompt = _require(obj, "prompt", str, pointer)
    scope = _scope(obj, pointer)
    volume = obj.get("relative_volume", default_volume)
    if isinstance(volume, int) and not isinstance(volume, bool):
        volume = float(volume)
    if not isinstance(volume, float):
        raise SchemaViolationError(f"{pointer}/relative_volume", "expected number")
    return cls(prompt=prompt, scope=scope, relative_volume=volume)


def plan_from_dict(data: dict) -> ScriptPlan:
    if not isinstance(data, dict):
        raise SchemaViolationError("", "plan document must be a JSON object")
    version = data.get("schema_version")
    if version != PLAN_SCHEMA_VERSION:
        raise SchemaViolationError("/schema_version", f"expected {PLAN_SCHEMA_VERSION}, got {version!r}")
    characters = []
    raw_chars = data.get("characters")
    if not isinstance(raw_chars, list):
        raise SchemaViolationError("/characters", "expected list")
    for i, raw in enumerate(raw_chars):
        pointer = f"/characters/{i}"
        if not isinstance(raw, dict):
            raise SchemaViolationError(pointer, "expected object")
        characters.append(CharacterSpec(
            id=_require(raw, "id", str, pointer),
            display_name=_require(raw, "display_name", str, pointer),
            timbre_description=_require(raw, "timbre_description", str, pointer),
            language=_require(raw, "language", str, pointer),
        ))
    subs = []
    raw_subs = data.get("sub_sentences")
    if not isinstance(raw_subs, list):
        raise SchemaViolationError("/sub_sentences", "expected list")
    for i, raw in enumerate(raw_subs):
        pointer = f"/sub_sentences/{i}"
        if not isinstance(raw, dict):
            raise SchemaViolationError(pointer, "expected object")
        shift = raw.get("emotion_shift", False)
        if not isinstance(shift, bool):
            raise SchemaViolationError(f"{pointer}/emotion_shift", "expected boolean")
        alpha = raw.get("alpha")
        if alpha is not None:
            if isinstance(alpha, int) and not isinstance(alpha, bool):
                alpha = float(alpha)
            if not isinstance(alpha, float) or not math.isfinite(alpha):
                raise SchemaViolationError(f"{pointer}/alpha", "expected finite number")
        subs.append(SubSentence(
            character_id=_require(raw, "character_id", str, pointer),
            text=_require(raw, "text", str, pointer),
            emotion_description=_require(raw, "emotion_description", str, pointer),
            paralinguistic_tokens=_string_list(raw, "paralinguistic_tokens", pointer, default=()),
            order_index=_require(raw, "order_index", int, pointer),
            emotion_shift=shift,
            alpha=alpha,
        ))
    ambiance = []
    bgm = []
    for key, default_volume, cls, bucket in (("ambiance", 0.35, AmbianceEntry, ambiance),
                                             ("bgm", 0.5, BgmEntry, bgm)):
        raw_list = data.get(key, [])
        if not isinstance(raw_list, list):
            raise SchemaViolationError(f"/{key}", "expected list")
        for i, raw in enumerate(raw_list):
            pointer = f"/{key}/{i}"
            if not isinstance(raw, dict):
                raise SchemaViolationError(pointer, "expected object")
            bucket.append(_scene_entry(raw, pointer, default_volume, cls))
    plan = ScriptPlan(
        characters=tuple(characters),
        sub_sentences=tuple(subs),
        ambiance=tuple(ambiance),
        bgm=tuple(bgm),
        source_instruction=data.get("source_instruction", ""),
    )
    _check_structure(plan)
    return plan


def _check_structure(plan: ScriptPlan) -> None:
    """Raise on the first structural invariant violation, in pointer order."""
    seen_ids = set()
    for i, char in enumerate(plan.characters):
        if char.id in seen_ids:
            raise SchemaViolationError(f"/characters/{i}/id", f"duplicate character id {char.id!r}")
        seen_ids.add(char.id)
        if not char.language:
            raise SchemaViolationError(f"/characters/{i}/language", "language tag must be non-empty")
    last_order = None
    for i, sub in enumerate(plan.sub_sentences):
        if sub.character_id not in seen_ids:
            raise DanglingReferenceError(f"/sub_sentences/{i}/character_id",
                                         f"unknown character {sub.character_id!r}")
        if sub.order_index < 0:
            raise SchemaViolationError(f"/sub_sentences/{i}/order_index", "must be non-negative")
        if last_order is not None and sub.order_index <= last_order:
            raise SchemaViolationError(f"/sub_sentences/{i}/order_index",
                                       "order_index values must be strictly increasing")
        last_order = sub.order_index
    n = len(plan.sub_sentences)
    for key, entries in (("ambiance", plan.ambiance), ("bgm", plan.bgm)):
        for i, entry in enumerate(entries):
            first, last = entry.scope
            if not (0 <= first <= last < n):
                raise SchemaViolationError(f"/{key}/{i}/scope",
                                           f"scope [{first}, {last}] out of range for {n} sub-sentences")
            if not (0.0 < entry.relative_volume <= 1.0):
                raise SchemaViolationError(f"/{key}/{i}/relative_volume", "must be in (0, 1]")


def plan_to_dict(plan: ScriptPlan) -> dict:
    return {
        "schema_version": PLAN_SCHEMA_VERSION,
        "source_instruction": plan.source_instruction,
        "characters": [
            {"id": c.id, "display_name": c.display_name,
             "timbre_description": c.timbre_description, "language": c.language}
            for c in plan.characters
        ],
        "sub_sentences": [
            {"character_id": s.character_id, "text": s.text,
             "emotion_description": s.emotion_description,
             "paralinguistic_tokens": list(s.paralinguistic_tokens),
             "order_index": s.order_index,
             "emotion_shift": s.emotion_shift,
             **({"alpha": s.alpha} if s.alpha is not None else {})}
            for s in plan.sub_sentences
        ],
        "ambiance": [
            {"prompt": e.prompt, "scope": list(e.scope), "relative_volume": e.relative_volume}
            for e in plan.ambiance
        ],
        "bgm": [
            {"prompt": e.prompt, "scope": list(e.scope), "relative_volume": e.relative_volume}
            for e in plan.bgm
        ],
    }


def parse_plan(data: bytes) -> ScriptPlan:
    try:
        document = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolationError("", f"not valid JSON: {exc}") from exc
    return plan_from_dict(document)


def serialize_plan(plan: ScriptPlan) -> bytes:
    return canonical_dumps(plan_to_dict(plan)).encode("utf-8")


def validate_plan(plan: ScriptPlan,
                  paralinguistic_library=DEFAULT_PARALINGUISTIC_LIBRARY) -> ValidationReport:
    """Collect every violated invariant exactly once. Violations are data,
    not errors; an empty report means the plan is valid."""
    violations: list[Violation] = []
    seen = set()
    for i, char in enumerate(plan.characters):
        if char.id in seen:
            violations.append(Violation(f"/characters/{i}/id", f"duplicate character id {char.id!r}"))
        seen.add(char.id)
        if not char.language:
            violations.append(Violation(f"/characters/{i}/language", "language tag must be non-empty"))
    last_order = None
    library = frozenset(paralinguistic_library)
    for i, sub in enumerate(plan.sub_sentences):
        pointer = f"/sub_sentences/{i}"
        if sub.character_id not in seen:
            violations.append(Violation(f"{pointer}/character_id",
                                        f"unknown character {sub.character_id!r}"))
        if sub.order_index < 0:
            violations.append(Violation(f"{pointer}/order_index", "must be non-negative"))
        elif last_order is not None and sub.order_index <= last_order:
            violations.append(Violation(f"{pointer}/order_index",
                                        "order_index values must be strictly increasing"))
        last_order = sub.order_index
        try:
            clean, _ = parse_inline_sfx(sub.text)
        except MalformedTagError as exc:
            violations.append(Violation(f"{pointer}/text", str(exc)))
            clean, _ = parse_inline_sfx(sub.text, lenient=True)
        if not clean.strip():
            violations.append(Violation(f"{pointer}/text", "text is empty after tag stripping"))
        for token in sub.paralinguistic_tokens:
            if token not in library:
                violations.append(Violation(f"{pointer}/paralinguistic_tokens",
                                            f"token {token!r} not in the configured library"))
    n = len(plan.sub_sentences)
    for key, entries in (("ambiance", plan.ambiance), ("bgm", plan.bgm)):
        for i, entry in enumerate(entries):
            first, last = entry.scope
            if not (0 <= first <= last < n):
                violations.append(Violation(f"/{key}/{i}/scope",
                                            f"scope [{first}, {last}] out of range for {n} sub-sentences"))
            if not (0.0 < entry.relative_volume <= 1.0):
                violations.append(Violation(f"/{key}/{i}/relative_volume", "must be in (0, 1]"))
    return ValidationReport(tuple(violations))
