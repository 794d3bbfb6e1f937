"""Capability registry and the two-step synthesis-model selection rule.

Backends are recorded as ranked capability profiles. A request is first
filtered by language (and by paralinguistic support when the script needs
it); among the survivors the best zero-shot cloner wins when the target
emotion already matches the reference speech, otherwise the most
description-controllable model wins.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError, DuplicateModelIdError, DuplicateRankError, NoCapableModelError

REGISTRY_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelProfile:
    model_id: str
    languages: frozenset[str]
    cloning_rank: int              # 1 = strongest zero-shot voice cloning
    controllability_rank: int      # 1 = strongest description-driven control
    supports_paralinguistics: bool = False
    supports_speaker_embedding: bool = False
    emotion_clone_languages: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "languages": sorted(self.languages),
            "cloning_rank": self.cloning_rank,
            "controllability_rank": self.controllability_rank,
            "supports_paralinguistics": self.supports_paralinguistics,
            "supports_speaker_embedding": self.supports_speaker_embedding,
            "emotion_clone_languages": sorted(self.emotion_clone_languages),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelProfile":
        try:
            return cls(
                model_id=data["model_id"],
                languages=frozenset(data["languages"]),
                cloning_rank=int(data["cloning_rank"]),
                controllability_rank=int(data["controllability_rank"]),
                supports_paralinguistics=bool(data.get("supports_paralinguistics", False)),
                supports_speaker_embedding=bool(data.get("supports_speaker_embedding", False)),
                emotion_clone_languages=frozenset(data.get("emotion_clone_languages", ())),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad model profile: {exc!r}") from exc


@dataclass(frozen=True)
class SelectionRequest:
    language: str
    text_emotion: str = ""
    reference_emotion: str = ""
    emotion_shift: bool = False
    needs_paralinguistics: bool = False


@dataclass(frozen=True)
class Selection:
    model_id: str
    rationale: tuple[str, ...]


@dataclass(frozen=True)
class Registry:
    profiles: tuple[ModelProfile, ...] = ()


def register_profile(registry: Registry, profile: ModelProfile) -> Registry:
    """Return a new registry containing ``profile``; the input is unchanged."""
    if profile.cloning_rank < 1 or profile.controllability_rank < 1:
        raise ConfigError(
            f"ranks must be >= 1, got {profile.cloning_rank}/{profile.controllability_rank}")
    for existing in registry.profiles:
        if existing.model_id == profile.model_id:
            raise DuplicateModelIdError(profile.model_id)
        if existing.cloning_rank == profile.cloning_rank:
            raise DuplicateRankError(f"cloning_rank {profile.cloning_rank} already held by {existing.model_id}")
        if existing.controllability_rank == profile.controllability_rank:
            raise DuplicateRankError(
                f"controllability_rank {profile.controllability_rank} already held by {existing.model_id}")
    return Registry(registry.profiles + (profile,))


def build_registry(profiles) -> Registry:
    registry = Registry()
    for profile in profiles:
        registry = register_profile(registry, profile)
    return registry


def filter_by_language(registry: Registry, language: str) -> list[ModelProfile]:
    if not registry.profiles:
        raise NoCapableModelError("registry is empty")
    survivors = [p for p in registry.profiles if language in p.languages]
    if not survivors:
        raise NoCapableModelError(f"no registered model supports language {language!r}")
    return survivors


def select_model(registry: Registry, request: SelectionRequest) -> Selection:
    """Apply the selection rule and record each rule that fired."""
    rationale = [f"language_filter:{request.language}"]
    survivors = filter_by_language(registry, request.language)
    if request.needs_paralinguistics:
        survivors = [p for p in survivors if p.supports_paralinguistics]
        rationale.append("paralinguistic_filter")
        if not survivors:
            raise NoCapableModelError(
                f"no model supporting paralinguistics handles language {request.language!r}")
    if request.emotion_shift:
        winner = min(survivors, key=lambda p: p.controllability_rank)
        rationale.append("emotion_shift_min_controllability_rank")
    else:
        winner = min(survivors, key=lambda p: p.cloning_rank)
        rationale.append("emotion_aligned_min_cloning_rank")
    return Selection(model_id=winner.model_id, rationale=tuple(rationale))


# --- default registry ------------------------------------------------------------
#
# Five stock profiles covering the common capability axes: a strong zero-shot
# cloner, a description-controllable model, a multilingual generalist, a
# dialect-and-paralinguistics specialist, and an English emotion cloner.

DEFAULT_REGISTRY = build_registry([
    ModelProfile(
        model_id="f5-tts",
        languages=frozenset({"en", "zh"}),
        cloning_rank=1,
        controllability_rank=4,
    ),
    ModelProfile(
        model_id="cosyvoice",
        languages=frozenset({"en", "zh", "ja", "ko"}),
        cloning_rank=3,
        controllability_rank=3,
        supports_speaker_embedding=True,
    ),
    ModelProfile(
        model_id="cosyvoice2",
        languages=frozenset({"en", "zh", "zh-dialect", "ja", "ko"}),
        cloning_rank=2,
        controllability_rank=2,
        supports_paralinguistics=True,
        supports_speaker_embedding=True,
    ),
    ModelProfile(
        model_id="voxinstruct",
        languages=frozenset({"en", "zh"}),
        cloning_rank=4,
        controllability_rank=1,
    ),
    ModelProfile(
        model_id="metavoice",
        languages=frozenset({"en"}),
        cloning_rank=5,
        controllability_rank=5,
        emotion_clone_languages=frozenset({"en"}),
    ),
])


def registry_to_dict(registry: Registry) -> dict:
    return {
        "schema_version": REGISTRY_SCHEMA_VERSION,
        "profiles": [p.to_dict() for p in registry.profiles],
    }


def registry_from_dict(data: dict) -> Registry:
    if data.get("schema_version") != REGISTRY_SCHEMA_VERSION:
        raise ConfigError(f"unsupported registry schema_version {data.get('schema_version')!r}")
    profiles = data.get("profiles")
    if not isinstance(profiles, list):
        raise ConfigError("registry 'profiles' must be a list")
    return build_registry(ModelProfile.from_dict(p) for p in profiles)


def load_registry(path) -> Registry:
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"registry file {path} is not valid JSON: {exc}") from exc
    return registry_from_dict(data)
