"""fablemix: training-free audiobook production and evaluation.

A planner backend turns a story instruction into a structured script; per
sub-sentence model selection, reference retrieval, and speaker-embedding
emotion shaping drive speech synthesis; forced alignment anchors inline
sound-effect cues to word onsets; a sample-accurate mixer renders the
master track; a judge backend scores the result with repeated calibrated
runs. Everything runs offline against a deterministic mock backend or over
a small HTTP protocol against real models.
"""
from .audio import Clip, decode_wav, encode_wav, load_wav, render, save_wav
from .config import PipelineConfig, default_config, load_config, make_backend
from .cues import CueSheet, WordTimestampMap, build_word_map, compile_cue_sheet
from .errors import FablemixError
from .pipeline import (
    ProductionResult,
    SpeechTrack,
    compose_cues,
    generate_assets,
    mix,
    produce,
    run_plan,
    synthesize_speech,
)
from .prosody import apply_emotion, average_direction, emotional_direction, unit
from .retrieval import RetrievalDatabase, RetrievalEntry, retrieve_prosody_refs
from .script import ScriptPlan, parse_plan, serialize_plan, validate_plan
from .selection import DEFAULT_REGISTRY, ModelProfile, select_model

__version__ = "0.1.0"

__all__ = [
    "Clip",
    "CueSheet",
    "DEFAULT_REGISTRY",
    "FablemixError",
    "ModelProfile",
    "PipelineConfig",
    "ProductionResult",
    "RetrievalDatabase",
    "RetrievalEntry",
    "ScriptPlan",
    "SpeechTrack",
    "WordTimestampMap",
    "apply_emotion",
    "average_direction",
    "build_word_map",
    "compile_cue_sheet",
    "compose_cues",
    "decode_wav",
    "default_config",
    "emotional_direction",
    "encode_wav",
    "generate_assets",
    "load_config",
    "load_wav",
    "make_backend",
    "mix",
    "parse_plan",
    "produce",
    "render",
    "retrieve_prosody_refs",
    "run_plan",
    "save_wav",
    "select_model",
    "serialize_plan",
    "synthesize_speech",
    "unit",
    "validate_plan",
    "__version__",
]
