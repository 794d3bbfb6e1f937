"""JSON Schemas for every protocol endpoint, version 1.

These are the wire contract: the server validates requests against the
request schemas, and the conformance suite validates responses (from the
mock or any remote implementation) against the response schemas. Schemas
are strict: unknown fields are protocol drift, not extensions.
"""
from __future__ import annotations

_AUDIO_B64 = {"type": "string", "minLength": 1}

_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}

_SPEAKER_EMBEDDING = {
    "type": "object",
    "required": ["values", "source_model"],
    "properties": {
        "values": _VECTOR,
        "source_model": {"type": "string"},
    },
    "additionalProperties": False,
}

_SPAN = {
    "type": "object",
    "required": ["word", "start", "end"],
    "properties": {
        "word": {"type": "string"},
        "start": {"type": "number", "minimum": 0},
        "end": {"type": "number", "minimum": 0},
    },
    "additionalProperties": False,
}

_PROFILE = {
    "type": "object",
    "required": ["model_id", "languages", "cloning_rank", "controllability_rank"],
    "properties": {
        "model_id": {"type": "string", "minLength": 1},
        "languages": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "cloning_rank": {"type": "integer", "minimum": 1},
        "controllability_rank": {"type": "integer", "minimum": 1},
        "supports_paralinguistics": {"type": "boolean"},
        "supports_speaker_embedding": {"type": "boolean"},
        "emotion_clone_languages": {"type": "array", "items": {"type": "string"}},
    },
    "additionalProperties": False,
}

_AUDIO_RESPONSE = {
    "type": "object",
    "required": ["audio_b64", "sample_rate"],
    "properties": {
        "audio_b64": _AUDIO_B64,
        "sample_rate": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

REQUEST_SCHEMAS = {
    "synthesize": {
        "type": "object",
        "required": ["model_id", "text", "language"],
        "properties": {
            "model_id": {"type": "string", "minLength": 1},
            "text": {"type": "string"},
            "language": {"type": "string", "minLength": 1},
            "reference_audio": {"type": "string"},
            "speaker_embedding": _SPEAKER_EMBEDDING,
            "description": {"type": "string"},
            "paralinguistic_tokens": {"type": "array", "items": {"type": "string"}},
        },
        "additionalProperties": False,
    },
    "generate_audio": {
        "type": "object",
        "required": ["prompt", "duration", "kind"],
        "properties": {
            "prompt": {"type": "string", "minLength": 1},
            "duration": {"type": "number", "exclusiveMinimum": 0},
            "kind": {"enum": ["sfx", "ambiance", "bgm"]},
        },
        "additionalProperties": False,
    },
    "embed": {
        "type": "object",
        "required": ["text"],
        "properties": {"text": {"type": "string"}},
        "additionalProperties": False,
    },
    "align": {
        "type": "object",
        "required": ["words", "audio_b64"],
        "properties": {
            "words": {"type": "array", "items": {"type": "string", "minLength": 1}},
            "audio_b64": _AUDIO_B64,
        },
        "additionalProperties": False,
    },
    "mos": {
        "type": "object",
        "required": ["audio_b64"],
        "properties": {"audio_b64": _AUDIO_B64},
        "additionalProperties": False,
    },
    "judge": {
        "type": "object",
        "required": ["prompt", "session_id"],
        "properties": {
            "prompt": {"type": "string", "minLength": 1},
            "attachments": {"type": "array", "items": {"type": "string"}},
            "session_id": {"type": "string", "minLength": 1},
        },
        "additionalProperties": False,
    },
    "speaker_embed": {
        "type": "object",
        "required": ["audio_b64"],
        "properties": {"audio_b64": _AUDIO_B64},
        "additionalProperties": False,
    },
}

RESPONSE_SCHEMAS = {
    "synthesize": _AUDIO_RESPONSE,
    "generate_audio": _AUDIO_RESPONSE,
    "embed": {
        "type": "object",
        "required": ["embedding", "dimension"],
        "properties": {
            "embedding": _VECTOR,
            "dimension": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "align": {
        "type": "object",
        "required": ["spans", "clip_duration"],
        "properties": {
            "spans": {"type": "array", "items": _SPAN},
            "clip_duration": {"type": "number", "minimum": 0},
        },
        "additionalProperties": False,
    },
    "mos": {
        "type": "object",
        "required": ["mos"],
        "properties": {"mos": {"type": "number", "minimum": 1, "maximum": 5}},
        "additionalProperties": False,
    },
    "judge": {
        "type": "object",
        "required": ["response"],
        "properties": {"response": {"type": "string"}},
        "additionalProperties": False,
    },
    "speaker_embed": {
        "type": "object",
        "required": ["embedding", "source_model", "dimension"],
        "properties": {
            "embedding": _VECTOR,
            "source_model": {"type": "string", "minLength": 1},
            "dimension": {"type": "integer", "minimum": 1},
        },
        "additionalProperties": False,
    },
    "capabilities": {
        "type": "object",
        "required": ["protocol_version", "backend_id", "endpoints", "profiles"],
        "properties": {
            "protocol_version": {"type": "integer", "minimum": 1},
            "backend_id": {"type": "string", "minLength": 1},
            "endpoints": {
                "type": "array",
                "items": {"enum": ["synthesize", "generate_audio", "embed", "align",
                                   "mos", "judge", "speaker_embed"]},
                "uniqueItems": True,
            },
            "profiles": {"type": "array", "items": _PROFILE},
        },
        "additionalProperties": False,
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error"],
    "properties": {
        "error": {
            "type": "object",
            "required": ["type", "message"],
            "properties": {
                "type": {"type": "string", "minLength": 1},
                "message": {"type": "string"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}
