"""Self-contained demo workspace.

Writes an instruction, scripted judge fixtures (a planner response and an
evaluation response), a small retrieval database with tone-synthesized
voice files, and a config wired to the deterministic mock backend. Running
the generate command on this workspace reproduces the same bytes on every
machine.
"""
from __future__ import annotations

import json
from pathlib import Path

from .audio import Clip, encode_wav
from .backends import detmath
from .backends.mock import MockBackend
from .retrieval import RetrievalEntry, build_database, save_database

SAMPLE_RATE = 24000
EMBED_DIMENSION = 64

DEMO_INSTRUCTION = (
    "Produce a short two-voice scene: after a storm, the narrator describes "
    "an old house falling quiet while Mira realizes the two of them are not "
    "alone. Keep it tense but restrained, with distant thunder, a creaking "
    "floorboard, steady rain ambiance, and low strings under the final "
    "lines.\n"
)

_DEMO_PLAN = {
    "schema_version": 1,
    "characters": [
        {"id": "narrator", "display_name": "Narrator",
         "timbre_description": "calm low voice, unhurried and clear",
         "language": "en"},
        {"id": "mira", "display_name": "Mira",
         "timbre_description": "bright young voice, quick and light",
         "language": "en"},
    ],
    "sub_sentences": [
        {"character_id": "narrator",
         "text": "The rain had stopped at last, and the "
                 "[SFX: distant thunder rolling away@thunder] thunder "
                 "settled beyond the hills.",
         "emotion_description": "calm relief",
         "paralinguistic_tokens": [], "order_index": 0,
         "emotion_shift": False, "alpha": 0.8},
        {"character_id": "mira",
         "text": "There it was again. "
                 "[SFX: a floorboard creaks overhead@There] There, right "
                 "above them.",
         "emotion_description": "hushed fear",
         "paralinguistic_tokens": [], "order_index": 1,
         "emotion_shift": False, "alpha": 1.2},
        {"character_id": "narrator",
         "text": "Mira laughed despite herself, the sound too loud in the "
                 "empty hall.",
         "emotion_description": "nervous amusement",
         "paralinguistic_tokens": ["laughter"], "order_index": 2,
         "emotion_shift": False, "alpha": 1.0},
        {"character_id": "mira",
         "text": "We are not alone in this house.",
         "emotion_description": "cold fury",
         "paralinguistic_tokens": [], "order_index": 3,
         "emotion_shift": True, "alpha": 1.4},
    ],
    "ambiance": [
        {"prompt": "steady rain dripping from eaves onto wet stone",
         "scope": [0, 3], "relative_volume": 0.3},
    ],
    "bgm": [
        {"prompt": "slow minor-key strings, sparse and low",
         "scope": [2, 3], "relative_volume": 0.4},
    ],
}

_EVALUATION_RESPONSE = (
    "The speech is clean and intelligible, pacing is even, and the scene "
    "effects sit well behind the voices.\n"
    "```json\n"
    '{"quality": 4, "naturalness": 4, "expressiveness": 3, "immersion": 4, '
    '"overall": 4}\n'
    "```\n"
)

# entry_id, speaker_id, transcript, emotion_label, language, mos
_DB_ROWS = (
    ("a1", "spk_a", "I set the cups on the table and waited for the kettle.",
     "neutral", "en", 4.4),
    ("a2", "spk_a", "Oh, it is so good to see you after all this time!",
     "warm joy", "en", 4.2),
    ("a3", "spk_a", "She closed the letter and sat very still by the window.",
     "quiet sorrow", "en", 4.0),
    ("b1", "spk_b", "The bus arrives at nine and leaves on the quarter hour.",
     "neutral", "en", 4.1),
    ("b2", "spk_b", "Look, look, it is actually happening, come quickly!",
     "rising excitement", "en", 3.9),
    ("b3", "spk_b", "Do not move. Something is breathing behind that wall.",
     "hushed fear", "en", 3.7),
    ("c1", "spk_c", "Faster, faster, around the bend and down the hill we go!",
     "wild glee", "en", 2.8),
    ("d1", "spk_d", "今天的天气很好，我们去公园散步吧。",
     "neutral", "zh", 4.5),
)

_DEMO_CONFIG = {
    "backend": {
        "type": "mock",
        "seed": 0,
        "judge_fixtures": "fixtures.json",
    },
    "sample_rate": SAMPLE_RATE,
    "mos_threshold": 3.5,
    "pair_count": 1,
    "alpha": {"policy": "planner", "value": 1.0, "max": 3.0},
    "gap_seconds": 0.25,
    "retrieval_db": "retrieval_db.jsonl",
    "parallelism": 4,
    "out_dir": "out",
}


def _voice_clip(entry_id: str) -> Clip:
    freq = 150 + detmath.stable_hash("demo-voice", entry_id) % 300
    return Clip(detmath.sine(freq, SAMPLE_RATE, SAMPLE_RATE, 0.25), SAMPLE_RATE)


def write_demo_workspace(directory) -> Path:
    """Create the demo workspace under `directory`; returns the config path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    (root / "instruction.txt").write_text(DEMO_INSTRUCTION, encoding="utf-8")

    fixtures = {
        "planner": json.dumps(_DEMO_PLAN, ensure_ascii=False, indent=2),
        "*": _EVALUATION_RESPONSE,
    }
    (root / "fixtures.json").write_text(
        json.dumps(fixtures, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    voices = root / "voices"
    voices.mkdir(exist_ok=True)
    embedder = MockBackend(seed=0, embed_dimension=EMBED_DIMENSION,
                           sample_rate=SAMPLE_RATE)
    entries = []
    for entry_id, speaker_id, transcript, label, language, mos in _DB_ROWS:
        (voices / f"{entry_id}.wav").write_bytes(encode_wav(_voice_clip(entry_id)))
        entries.append(RetrievalEntry(
            entry_id=entry_id,
            speaker_id=speaker_id,
            transcript=transcript,
            emotion_label=label,
            language=language,
            embedding=embedder.embed(transcript),
            mos=mos,
            audio_uri=f"voices/{entry_id}.wav",
        ))
    save_database(build_database(EMBED_DIMENSION, entries),
                  root / "retrieval_db.jsonl")

    config_path = root / "config.json"
    config_path.write_text(
        json.dumps(_DEMO_CONFIG, indent=2, sort_keys=True) + "\n",
        encoding="utf-8")
    return config_path
