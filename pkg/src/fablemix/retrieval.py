"""Embedding database for timbre and prosody reference lookup.

Entries are (transcript, speech sample) records tagged with speaker, emotion
label, language, a precomputed MOS score, and a text embedding of the
transcript. Prosody retrieval embeds a free-text emotional description,
ranks emotional entries by cosine similarity against transcript embeddings,
pairs each hit with the speaker's best neutral sample, and drops pairs whose
members fall below a MOS threshold.

The database lives in a JSONL file: a header record declaring the embedding
dimension, then one entry per line. It is immutable after load; queries are
pure functions and safe to run concurrently.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InsufficientPairsError,
    NoNeutralSampleError,
)

DB_SCHEMA_VERSION = 1

NEUTRAL_LABEL = "neutral"

# MOS floor for prosody reference pairs, configurable per query.
DEFAULT_MOS_THRESHOLD = 3.5


@dataclass(frozen=True, eq=False)
class RetrievalEntry:
    entry_id: str
    speaker_id: str
    transcript: str
    emotion_label: str
    language: str
    embedding: np.ndarray
    mos: float
    audio_uri: str

    def __post_init__(self):
        vector = np.asarray(self.embedding, dtype=np.float64)
        if vector.ndim != 1:
            raise DimensionMismatchError(
                f"entry {self.entry_id!r}: embedding must be 1-D, got shape {vector.shape}")
        if not np.all(np.isfinite(vector)):
            raise DimensionMismatchError(f"entry {self.entry_id!r}: non-finite embedding values")
        if float(np.linalg.norm(vector)) == 0.0:
            raise DimensionMismatchError(
                f"entry {self.entry_id!r}: zero-norm embedding (cosine undefined)")
        object.__setattr__(self, "embedding", vector)
        if not 1.0 <= self.mos <= 5.0:
            raise ConfigError(f"entry {self.entry_id!r}: mos {self.mos} outside [1, 5]")

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "speaker_id": self.speaker_id,
            "transcript": self.transcript,
            "emotion_label": self.emotion_label,
            "language": self.language,
            "embedding": [float(x) for x in self.embedding],
            "mos": float(self.mos),
            "audio_uri": self.audio_uri,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RetrievalEntry":
        try:
            return cls(
                entry_id=raw["entry_id"],
                speaker_id=raw["speaker_id"],
                transcript=raw["transcript"],
                emotion_label=raw["emotion_label"],
                language=raw["language"],
                embedding=raw["embedding"],
                mos=float(raw["mos"]),
                audio_uri=raw["audio_uri"],
            )
        except KeyError as exc:
            raise ConfigError(f"retrieval entry missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True, eq=False)
class EmotionNeutralPair:
    """Same-speaker (emotional, neutral) sample pair."""

    emotional: RetrievalEntry
    neutral: RetrievalEntry

    def __post_init__(self):
        if self.emotional.speaker_id != self.neutral.speaker_id:
            raise ConfigError("pair members must share a speaker")
        if self.neutral.emotion_label != NEUTRAL_LABEL:
            raise ConfigError("neutral member must carry the neutral label")
        if self.emotional.emotion_label == NEUTRAL_LABEL:
            raise ConfigError("emotional member must not carry the neutral label")


@dataclass(frozen=True)
class ProsodyQuery:
    description: str
    m: int = 1
    mos_threshold: float = DEFAULT_MOS_THRESHOLD
    language: str = "en"

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"pair count m must be >= 1, got {self.m}")
        if not 1.0 <= self.mos_threshold <= 5.0:
            raise ConfigError(f"mos_threshold {self.mos_threshold} outside [1, 5]")


@dataclass(frozen=True, eq=False)
class RetrievalDatabase:
    dimension: int
    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for entry in self.entries:
            if len(entry.embedding) != self.dimension:
                raise DimensionMismatchError(
                    f"entry {entry.entry_id!r}: dimension {len(entry.embedding)} != "
                    f"database dimension {self.dimension}")
            if entry.entry_id in seen:
                raise ConfigError(f"duplicate entry_id {entry.entry_id!r}")
            seen.add(entry.entry_id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def build_database(dimension: int, entries: Iterable[RetrievalEntry]) -> RetrievalDatabase:
    return RetrievalDatabase(dimension=dimension, entries=tuple(entries))


def save_database(db: RetrievalDatabase, path) -> None:
    lines = [json.dumps({"schema_version": DB_SCHEMA_VERSION, "dimension": db.dimension},
                        sort_keys=True)]
    lines.extend(json.dumps(entry.to_dict(), sort_keys=True) for entry in db.entries)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_database(path) -> RetrievalDatabase:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty retrieval database file")
    header = json.loads(lines[0])
    if header.get("schema_version") != DB_SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {header.get('schema_version')!r}")
    dimension = header.get("dimension")
    if not isinstance(dimension, int) or dimension < 1:
        raise ConfigError(f"{path}: header dimension must be a positive integer")
    entries = [RetrievalEntry.from_dict(json.loads(line)) for line in lines[1:]]
    return RetrievalDatabase(dimension=dimension, entries=tuple(entries))


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def top_k(query_embedding, database, k: int) -> list:
    """Exhaustive cosine ranking: top k of (entry, similarity), ties broken
    by entry_id ascending.

    `database` may be a RetrievalDatabase or any sequence of entries whose
    embeddings share the query's dimension.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    query = np.asarray(query_embedding, dtype=np.float64)
    if query.ndim != 1:
        raise DimensionMismatchError(f"query must be 1-D, got shape {query.shape}")
    if float(np.linalg.norm(query)) == 0.0:
        raise DimensionMismatchError("zero-norm query embedding (cosine undefined)")
    entries = list(database)
    for entry in entries:
        if len(entry.embedding) != len(query):
            raise DimensionMismatchError(
                f"entry {entry.entry_id!r}: dimension {len(entry.embedding)} != "
                f"query dimension {len(query)}")
    scored = [(entry, _cosine(query, entry.embedding)) for entry in entries]
    scored.sort(key=lambda item: (-item[1], item[0].entry_id))
    return scored[:k]


def filter_quality(entries: Sequence[RetrievalEntry], mos_threshold: float) -> list:
    return [entry for entry in entries if entry.mos >= mos_threshold]


def pair_emotion_neutral(emotional: RetrievalEntry, database) -> EmotionNeutralPair:
    """Pair an emotional entry with its speaker's highest-MOS neutral sample
    (ties broken by entry_id ascending)."""
    if emotional.emotion_label == NEUTRAL_LABEL:
        raise ConfigError(f"entry {emotional.entry_id!r} is already neutral")
    candidates = [entry for entry in database
                  if entry.speaker_id == emotional.speaker_id
                  and entry.emotion_label == NEUTRAL_LABEL]
    if not candidates:
        raise NoNeutralSampleError(
            f"speaker {emotional.speaker_id!r} has no neutral sample")
    best = min(candidates, key=lambda entry: (-entry.mos, entry.entry_id))
    return EmotionNeutralPair(emotional=emotional, neutral=best)


def retrieve_prosody_refs(query: ProsodyQuery, database: RetrievalDatabase,
                          embed_backend) -> list:
    """Retrieve up to query.m emotion/neutral pairs for a prosody description.

    The description is embedded by `embed_backend.embed`, emotional entries
    in the query language are ranked by cosine similarity, each is paired
    with its speaker's best neutral sample, and pairs where either member
    falls below query.mos_threshold are dropped. Raises InsufficientPairs
    carrying whatever survived when fewer than m remain; callers may accept
    a partial result.
    """
    if len(database) == 0:
        raise ConfigError("retrieval database is empty")
    query_embedding = embed_backend.embed(query.description)
    candidates = [entry for entry in database
                  if entry.emotion_label != NEUTRAL_LABEL
                  and entry.language == query.language]
    pairs = []
    if candidates:
        ranked = top_k(query_embedding, candidates, k=len(candidates))
        for entry, _similarity in ranked:
            try:
                pair = pair_emotion_neutral(entry, database)
            except NoNeutralSampleError:
                continue
            if len(filter_quality([pair.emotional, pair.neutral], query.mos_threshold)) < 2:
                continue
            pairs.append(pair)
            if len(pairs) == query.m:
                break
    if len(pairs) < query.m:
        raise InsufficientPairsError(found=len(pairs), requested=query.m, pairs=tuple(pairs))
    return pairs
