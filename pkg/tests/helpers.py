"""Deterministic builders shared across test modules."""
from __future__ import annotations

import numpy as np

from fablemix.audio import Clip
from fablemix.retrieval import RetrievalDatabase, RetrievalEntry


def make_clip(samples, rate: int = 24000) -> Clip:
    return Clip(np.asarray(samples, dtype=np.float64), rate)


def make_entry(entry_id: str, speaker: str = "spk", emotion: str = "neutral",
               language: str = "en", embedding=(1.0, 0.0), mos: float = 4.0,
               uri: str = "missing.wav", transcript: str = "text") -> RetrievalEntry:
    return RetrievalEntry(
        entry_id=entry_id,
        speaker_id=speaker,
        transcript=transcript,
        emotion_label=emotion,
        language=language,
        embedding=np.asarray(embedding, dtype=np.float64),
        mos=mos,
        audio_uri=uri,
    )


VOCABULARY = ("storm", "door", "night", "wind", "steps", "voice", "lamp",
              "rain", "glass", "floor")

DESCRIPTIONS = ("soft creak", "distant thunder", "glass @ breaking point",
                "wind in the eaves", "a latch clicks")


def inject_tags(rng, n_tags: int):
    """Build a tagged text plus its round-trip oracle.

    Returns (tagged_text, clean_text, cues) where cues is the expected
    [(description, anchor_word, occurrence_index)] in tag order. Each tag is
    inserted immediately before a distinct word position p and anchors that
    word; its occurrence index is the count of equal words before p, plus 1.
    """
    words = [rng.choice(VOCABULARY)
             for _ in range(rng.randint(max(1, n_tags), 30))]
    positions = sorted(rng.sample(range(len(words)), k=min(n_tags, len(words))))
    expected = []
    for p in positions:
        anchor = words[p]
        occurrence = sum(1 for w in words[:p] if w == anchor) + 1
        expected.append((rng.choice(DESCRIPTIONS), anchor, occurrence))
    by_position = dict(zip(positions, expected))
    parts = []
    for i, word in enumerate(words):
        if i in by_position:
            description, anchor, _ = by_position[i]
            parts.append(f"[SFX: {description}@{anchor}]")
        parts.append(word)
    return " ".join(parts), " ".join(words), expected


def random_database(rng: np.random.Generator, dimension: int,
                    n_entries: int) -> RetrievalDatabase:
    """A random but valid database: nonzero embeddings, unique ids."""
    entries = []
    for i in range(n_entries):
        vector = rng.standard_normal(dimension)
        while float(np.linalg.norm(vector)) == 0.0:  # pragma: no cover
            vector = rng.standard_normal(dimension)
        entries.append(make_entry(
            entry_id=f"e{i:04d}",
            speaker=f"spk{rng.integers(0, max(2, n_entries // 4))}",
            emotion=rng.choice(["neutral", "joy", "fear", "sorrow"]),
            language=rng.choice(["en", "zh"]),
            embedding=vector,
            mos=float(rng.uniform(1.0, 5.0)),
        ))
    return RetrievalDatabase(dimension=dimension, entries=tuple(entries))
