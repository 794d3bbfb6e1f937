"""End-to-end production: plan, synthesize, compose, generate assets, mix.

Each stage takes a backend plus in-memory inputs and returns in-memory
artifacts; the CLI persists them between stages and chains their digests in
a manifest. With the deterministic mock backend and a fixed seed the whole
chain reproduces byte for byte.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .audio import Clip, decode_wav, encode_wav, load_wav, render
from .backends.base import Backend, SynthesisRequest
from .config import PipelineConfig
from .cues import (
    CueSheet,
    WordSpan,
    WordTimestampMap,
    build_word_map,
    compile_cue_sheet,
)
from .errors import (
    ConfigError,
    InsufficientPairsError,
    MalformedResponseError,
    MissingAssetError,
    RateMismatchError,
    SchemaViolationError,
)
from .jsonutil import fixed_point_dumps, iter_json_objects, sha256_hex
from .prosody import (
    Intensity,
    SpeakerEmbedding,
    apply_emotion,
    average_direction,
    emotional_direction,
    unit,
)
from .retrieval import (
    ProsodyQuery,
    RetrievalDatabase,
    RetrievalEntry,
    filter_quality,
    load_database,
    retrieve_prosody_refs,
    top_k,
)
from .script import (
    DEFAULT_PARALINGUISTIC_LIBRARY,
    ScriptPlan,
    parse_inline_sfx,
    plan_from_dict,
    validate_plan,
)
from .selection import Registry, SelectionRequest, select_model

log = logging.getLogger(__name__)

PLANNER_SESSION = "planner"
TIMING_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


# --- planning ----------------------------------------------------------------


def build_planner_prompt(instruction: str,
                         library=DEFAULT_PARALINGUISTIC_LIBRARY,
                         languages=("en",)) -> str:
    """Deterministic prompt asking the planner backend for a plan document."""
    tokens = ", ".join(library)
    langs = ", ".join(sorted(languages))
    return (
        "You are a story-to-audiobook script designer. Convert the production "
        "instruction below into a JSON plan object with this exact shape:\n"
        "{\n"
        '  "schema_version": 1,\n'
        '  "source_instruction": "<copy of the instruction>",\n'
        '  "characters": [{"id", "display_name", "timbre_description", "language"}],\n'
        '  "sub_sentences": [{"character_id", "text", "emotion_description",\n'
        '                     "paralinguistic_tokens", "order_index",\n'
        '                     "emotion_shift", "alpha"}],\n'
        '  "ambiance": [{"prompt", "scope": [first, last], "relative_volume"}],\n'
        '  "bgm": [{"prompt", "scope": [first, last], "relative_volume"}]\n'
        "}\n"
        "Split dialogue at emotion changes (one emotion per sub-sentence). "
        "Mark sound effects inline as [SFX: description@anchor_word] where "
        "anchor_word is a word of the same sub-sentence. Set emotion_shift "
        "true when the required emotion differs from the character's usual "
        "reference voice, and pick alpha in [0, 1.5] for emotion strength. "
        f"Allowed paralinguistic tokens: {tokens}. "
        f"Supported languages: {langs}. "
        "Reply with the JSON object only.\n\n"
        f"Instruction:\n{instruction.strip()}\n"
    )


def run_plan(backend: Backend, instruction: str, *,
             library=DEFAULT_PARALINGUISTIC_LIBRARY,
             languages=("en",),
             session_id: str = PLANNER_SESSION) -> ScriptPlan:
    """Ask the judge backend for a plan and validate it."""
    prompt = build_planner_prompt(instruction, library, languages)
    response = backend.judge(prompt, (), session_id)
    candidate = None
    for obj in iter_json_objects(response):
        if "characters" in obj:
            candidate = obj
    if candidate is None:
        raise SchemaViolationError("", "planner response contains no plan object")
    candidate.setdefault("source_instruction", instruction)
    plan = plan_from_dict(candidate)
    report = validate_plan(plan, paralinguistic_library=library)
    if not report.ok:
        for violation in report.violations:
            log.error("plan invalid at %s: %s", violation.pointer, violation.message)
        first = report.violations[0]
        raise SchemaViolationError(first.pointer, first.message)
    return plan


# --- synthesis ----------------------------------------------------------------


@dataclass(frozen=True)
class SynthesisRecord:
    """Provenance for one sub-sentence: which model, which conditioning."""

    sub_sentence_index: int
    model_id: str
    rationale: tuple
    mode: str
    reference_id: str | None = None
    pair_ids: tuple = ()  # (emotional entry_id, neutral entry_id) per pair
    alpha: float | None = None

    def to_dict(self) -> dict:
        return {
            "sub_sentence_index": self.sub_sentence_index,
            "model_id": self.model_id,
            "rationale": list(self.rationale),
            "mode": self.mode,
            "reference_id": self.reference_id,
            "pair_ids": [list(pair) for pair in self.pair_ids],
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthesisRecord":
        return cls(
            sub_sentence_index=int(raw["sub_sentence_index"]),
            model_id=raw["model_id"],
            rationale=tuple(raw.get("rationale", ())),
            mode=raw["mode"],
            reference_id=raw.get("reference_id"),
            pair_ids=tuple(tuple(pair) for pair in raw.get("pair_ids", ())),
            alpha=raw.get("alpha"),
        )


@dataclass(frozen=True)
class SpeechTrack:
    """Concatenated speech plus everything later stages need to time cues."""

    speech: Clip
    offsets: tuple          # sub-sentence start, seconds
    windows: tuple          # (start, end) per sub-sentence, seconds
    word_map: WordTimestampMap
    records: tuple


def timing_to_dict(track: SpeechTrack) -> dict:
    return {
        "schema_version": TIMING_SCHEMA_VERSION,
        "sample_rate": track.speech.sample_rate,
        "offsets": list(track.offsets),
        "windows": [list(window) for window in track.windows],
        "word_map": {
            "total_duration": track.word_map.total_duration,
            "spans": [
                {"word": s.word, "start": s.start, "end": s.end,
                 "sub_sentence_index": s.sub_sentence_index}
                for s in track.word_map.spans
            ],
        },
        "records": [record.to_dict() for record in track.records],
    }


def serialize_timing(track: SpeechTrack) -> bytes:
    return fixed_point_dumps(timing_to_dict(track), decimals=6).encode("utf-8")


def parse_timing(data: bytes, speech: Clip) -> SpeechTrack:
    """Rebuild a SpeechTrack from timing JSON plus the speech clip it times."""
    try:
        raw = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaViolationError("", f"timing file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("schema_version") != TIMING_SCHEMA_VERSION:
        raise SchemaViolationError("/schema_version", "unsupported timing document")
    try:
        if int(raw["sample_rate"]) != speech.sample_rate:
            raise RateMismatchError(
                f"timing rate {raw['sample_rate']} != speech rate {speech.sample_rate}")
        spans = tuple(
            WordSpan(word=s["word"], start=float(s["start"]), end=float(s["end"]),
                     sub_sentence_index=int(s["sub_sentence_index"]))
            for s in raw["word_map"]["spans"])
        word_map = WordTimestampMap(
            spans=spans, total_duration=float(raw["word_map"]["total_duration"]))
        return SpeechTrack(
            speech=speech,
            offsets=tuple(float(x) for x in raw["offsets"]),
            windows=tuple((float(a), float(b)) for a, b in raw["windows"]),
            word_map=word_map,
            records=tuple(SynthesisRecord.from_dict(r) for r in raw.get("records", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaViolationError("", f"malformed timing document: {exc}") from exc


def _resolve_uri(uri: str, root: Path | None) -> Path:
    if uri.startswith("file://"):
        uri = uri[len("file://"):]
    path = Path(uri)
    if not path.is_absolute() and root is not None:
        path = root / path
    return path


class _ClipStore:
    """Lazy audio_uri loader with per-entry caching."""

    def __init__(self, root: Path | None, sample_rate: int):
        self.root = root
        self.sample_rate = sample_rate
        self._cache: dict[str, Clip] = {}

    def clip(self, entry: RetrievalEntry) -> Clip:
        cached = self._cache.get(entry.entry_id)
        if cached is not None:
            return cached
        path = _resolve_uri(entry.audio_uri, self.root)
        if not path.is_file():
            raise MissingAssetError(
                f"entry {entry.entry_id!r}: audio_uri not found: {path}")
        clip = load_wav(path)
        if clip.sample_rate != self.sample_rate:
            raise RateMismatchError(
                f"entry {entry.entry_id!r}: rate {clip.sample_rate} != "
                f"engine rate {self.sample_rate}")
        self._cache[entry.entry_id] = clip
        return clip


def character_voice_refs(backend: Backend, plan: ScriptPlan,
                         database: RetrievalDatabase | None,
                         mos_threshold: float) -> dict:
    """Pick one timbre reference entry per character by description match.

    Prefers the best-ranked entry meeting the MOS threshold; falls back to
    the best rank regardless of quality, with a warning. Characters with no
    same-language entries get None and synthesize from description alone.
    """
    refs: dict[str, RetrievalEntry | None] = {}
    for char in plan.characters:
        if database is None:
            refs[char.id] = None
            continue
        candidates = [e for e in database if e.language == char.language]
        if not candidates:
            log.warning("no %s retrieval entries for character %r; "
                        "falling back to description synthesis", char.language, char.id)
            refs[char.id] = None
            continue
        ranked = top_k(backend.embed(char.timbre_description), candidates,
                       k=len(candidates))
        entries = [entry for entry, _similarity in ranked]
        passing = filter_quality(entries, mos_threshold)
        if passing:
            refs[char.id] = passing[0]
        else:
            log.warning("no reference above MOS %.2f for character %r; "
                        "using best match %r", mos_threshold, char.id,
                        entries[0].entry_id)
            refs[char.id] = entries[0]
    return refs


def _profile_for(registry: Registry, model_id: str):
    for profile in registry.profiles:
        if profile.model_id == model_id:
            return profile
    raise ConfigError(f"selected model {model_id!r} missing from registry")


def _effective_alpha(config: PipelineConfig, sub) -> float:
    if config.alpha.policy == "planner" and sub.alpha is not None:
        return float(sub.alpha)
    return config.alpha.value


def _adjusted_embedding(backend: Backend, store: _ClipStore, voice_ref, pairs,
                        emotion_label: str, alpha_value: float, alpha_max: float,
                        renormalize: bool) -> SpeakerEmbedding:
    """Shift the reference speaker embedding toward the retrieved emotion."""
    f_target = backend.speaker_embed(store.clip(voice_ref))
    directions = []
    for pair in pairs:
        f_emotional = backend.speaker_embed(store.clip(pair.emotional))
        f_neutral = backend.speaker_embed(store.clip(pair.neutral))
        directions.append(
            emotional_direction(f_emotional, f_neutral, emotion_label=emotion_label))
    direction = unit(average_direction(directions))
    adjusted = apply_emotion(f_target, direction, Intensity(alpha_value),
                             alpha_max=alpha_max)
    if renormalize:
        norm = float(np.linalg.norm(adjusted.values))
        if norm > 0.0:
            adjusted = SpeakerEmbedding(values=adjusted.values / norm,
                                        source_model=adjusted.source_model)
    return adjusted


def synthesize_speech(backend: Backend, plan: ScriptPlan,
                      config: PipelineConfig) -> SpeechTrack:
    """Synthesize every sub-sentence, align it, and concatenate the clips.

    Conditioning per sub-sentence, best first: an emotion-adjusted speaker
    embedding (model supports it, a timbre reference exists, prosody pairs
    were retrieved); the raw timbre reference (no emotion shift required);
    otherwise a text description. Clips are separated by the configured
    silence gap; offsets are exact sample counts.
    """
    database = load_database(config.retrieval_db) if config.retrieval_db else None
    store = _ClipStore(config.retrieval_db.parent if config.retrieval_db else None,
                       config.sample_rate)
    refs = character_voice_refs(backend, plan, database, config.mos_threshold)
    chars = {char.id: char for char in plan.characters}

    clips = []
    alignments = []
    records = []
    for index, sub in enumerate(plan.sub_sentences):
        char = chars[sub.character_id]
        clean_text, _tags = parse_inline_sfx(sub.text)
        voice_ref = refs[char.id]
        selection = select_model(config.registry, SelectionRequest(
            language=char.language,
            text_emotion=sub.emotion_description,
            reference_emotion=voice_ref.emotion_label if voice_ref else "",
            emotion_shift=sub.emotion_shift,
            needs_paralinguistics=bool(sub.paralinguistic_tokens),
        ))
        profile = _profile_for(config.registry, selection.model_id)

        pairs = []
        if (profile.supports_speaker_embedding and database is not None
                and voice_ref is not None and sub.emotion_description):
            query = ProsodyQuery(description=sub.emotion_description,
                                 m=config.pair_count,
                                 mos_threshold=config.mos_threshold,
                                 language=char.language)
            try:
                pairs = retrieve_prosody_refs(query, database, backend)
            except InsufficientPairsError as exc:
                if exc.found:
                    log.warning("sub-sentence %d: only %d of %d prosody pairs",
                                index, exc.found, exc.requested)
                    pairs = list(exc.pairs)
                else:
                    log.warning("sub-sentence %d: no prosody pairs for %r",
                                index, sub.emotion_description)

        alpha = None
        if pairs:
            alpha = _effective_alpha(config, sub)
            embedding = _adjusted_embedding(
                backend, store, voice_ref, pairs, sub.emotion_description,
                alpha, config.alpha.max, config.backend.unit_speaker_embeddings)
            request = SynthesisRequest(
                model_id=selection.model_id, text=clean_text,
                language=char.language, speaker_embedding=embedding,
                paralinguistic_tokens=sub.paralinguistic_tokens)
        elif voice_ref is not None and not sub.emotion_shift:
            request = SynthesisRequest(
                model_id=selection.model_id, text=clean_text,
                language=char.language, reference_audio=voice_ref.audio_uri,
                paralinguistic_tokens=sub.paralinguistic_tokens)
        else:
            description = char.timbre_description
            if sub.emotion_description:
                description = f"{description}; emotion: {sub.emotion_description}"
            request = SynthesisRequest(
                model_id=selection.model_id, text=clean_text,
                language=char.language, description=description,
                paralinguistic_tokens=sub.paralinguistic_tokens)

        clip = backend.synthesize(request)
        if clip.sample_rate != config.sample_rate:
            raise RateMismatchError(
                f"backend synthesized at {clip.sample_rate} Hz, engine runs at "
                f"{config.sample_rate} Hz")
        alignment = backend.align(clean_text.split(), clip)
        if abs(alignment.clip_duration - clip.duration) > 1e-6:
            raise MalformedResponseError(
                f"aligner reported duration {alignment.clip_duration}, "
                f"clip lasts {clip.duration}")
        clips.append(clip)
        alignments.append(alignment)
        records.append(SynthesisRecord(
            sub_sentence_index=index,
            model_id=selection.model_id,
            rationale=selection.rationale,
            mode=request.mode,
            reference_id=voice_ref.entry_id if voice_ref else None,
            pair_ids=tuple((p.emotional.entry_id, p.neutral.entry_id) for p in pairs),
            alpha=alpha,
        ))

    rate = config.sample_rate
    gap = round(config.gap_seconds * rate)
    start = 0
    starts = []
    for clip in clips:
        starts.append(start)
        start += len(clip) + gap
    total = (starts[-1] + len(clips[-1])) if clips else 0
    buffer = np.zeros(total, dtype=np.float64)
    for offset, clip in zip(starts, clips):
        buffer[offset:offset + len(clip)] = clip.samples
    offsets = tuple(offset / rate for offset in starts)
    windows = tuple((offset / rate, (offset + len(clip)) / rate)
                    for offset, clip in zip(starts, clips))
    return SpeechTrack(
        speech=Clip(buffer, rate),
        offsets=offsets,
        windows=windows,
        word_map=build_word_map(alignments, offsets),
        records=tuple(records),
    )


# --- cue compilation and mixing -------------------------------------------------


def compose_cues(plan: ScriptPlan, track: SpeechTrack, config: PipelineConfig,
                 lenient_anchors: bool = False) -> CueSheet:
    return compile_cue_sheet(
        plan, track.word_map, track.windows,
        sample_rate=track.speech.sample_rate,
        sfx_duration=config.sfx_duration,
        sfx_volume=config.sfx_volume,
        lenient_anchors=lenient_anchors,
    )


def generate_assets(backend: Backend, sheet: CueSheet, parallelism: int = 4) -> dict:
    """One generated clip per cue, keyed by cue_id. Thread-parallel; results
    are deterministic because generation is pure in (prompt, duration, kind)."""
    cues = sheet.all_cues()
    if not cues:
        return {}

    def one(cue):
        return cue.cue_id, backend.generate_audio(cue.prompt, cue.duration, cue.kind)

    workers = max(1, min(parallelism, len(cues)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(one, cues))


def mix(sheet: CueSheet, assets: dict, speech: Clip) -> Clip:
    return render(sheet, assets, speech)


@dataclass(frozen=True)
class ProductionResult:
    plan: ScriptPlan
    track: SpeechTrack
    sheet: CueSheet
    assets: dict
    master: Clip


def produce(backend: Backend, instruction: str, config: PipelineConfig, *,
            lenient_anchors: bool = False,
            languages=("en",)) -> ProductionResult:
    """Full chain: instruction in, mixed master out.

    Speech and assets pass through PCM16 quantization before the mix, the
    same boundary a staged run crosses when it reads its inputs back from
    WAV files, so one-shot and staged productions emit identical bytes.
    """
    plan = run_plan(backend, instruction,
                    library=config.paralinguistic_library, languages=languages)
    track = synthesize_speech(backend, plan, config)
    sheet = compose_cues(plan, track, config, lenient_anchors=lenient_anchors)
    assets = generate_assets(backend, sheet, config.parallelism)
    track = replace(track, speech=decode_wav(encode_wav(track.speech)))
    assets = {cue_id: decode_wav(encode_wav(clip))
              for cue_id, clip in assets.items()}
    master = mix(sheet, assets, track.speech)
    return ProductionResult(plan=plan, track=track, sheet=sheet,
                            assets=assets, master=master)


# --- artifact manifest -----------------------------------------------------------
#
# Every stage file lands in the output directory together with a manifest
# entry carrying its digest and the digests of the inputs it was derived
# from, so the provenance chain of a finished production can be re-verified
# offline.


def load_manifest(out_dir) -> dict:
    path = Path(out_dir) / MANIFEST_NAME
    if not path.is_file():
        return {"schema_version": MANIFEST_SCHEMA_VERSION, "artifacts": {}}
    try:
        manifest = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"corrupt manifest {path}: {exc}") from exc
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported manifest schema_version {manifest.get('schema_version')!r}")
    return manifest


def _write_manifest(out_dir, manifest: dict) -> None:
    path = Path(out_dir) / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def record_artifact(out_dir, name: str, payload: bytes, inputs: dict) -> str:
    """Write one artifact file and chain its digest into the manifest.

    `inputs` maps input artifact names to their digests at the time they
    were consumed. Returns the new artifact's digest.
    """
    out_dir = Path(out_dir)
    (out_dir / name).parent.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_bytes(payload)
    digest = sha256_hex(payload)
    manifest = load_manifest(out_dir)
    manifest["artifacts"][name] = {
        "sha256": digest,
        "inputs": dict(sorted(inputs.items())),
    }
    _write_manifest(out_dir, manifest)
    return digest


def verify_chain(out_dir) -> list:
    """Re-hash every artifact and cross-check the recorded digest chain.

    Returns a list of human-readable problems; empty means the whole
    production verifies.
    """
    out_dir = Path(out_dir)
    manifest = load_manifest(out_dir)
    artifacts = manifest.get("artifacts", {})
    problems = []
    for name, entry in sorted(artifacts.items()):
        path = out_dir / name
        if not path.is_file():
            problems.append(f"{name}: file missing")
            continue
        actual = sha256_hex(path.read_bytes())
        if actual != entry.get("sha256"):
            problems.append(f"{name}: content digest mismatch")
        for input_name, input_digest in entry.get("inputs", {}).items():
            recorded = artifacts.get(input_name)
            if recorded is not None and recorded.get("sha256") != input_digest:
                problems.append(
                    f"{name}: input {input_name} changed after it was consumed")
    return problems
