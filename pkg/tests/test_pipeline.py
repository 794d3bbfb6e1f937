"""Production pipeline stages: planning, synthesis, assets, manifest, produce."""
import json

import numpy as np
import pytest

from fablemix.audio import Clip, decode_wav, encode_wav, save_wav
from fablemix.backends import detmath
from fablemix.backends.base import AlignmentResult
from fablemix.backends.mock import MockBackend
from fablemix.config import AlphaConfig, BackendConfig, PipelineConfig
from fablemix.cues import serialize_cue_sheet
from fablemix.errors import (
    ConfigError,
    MalformedResponseError,
    RateMismatchError,
    SchemaViolationError,
)
from fablemix.pipeline import (
    build_planner_prompt,
    character_voice_refs,
    compose_cues,
    generate_assets,
    load_manifest,
    mix,
    parse_timing,
    produce,
    record_artifact,
    run_plan,
    serialize_timing,
    synthesize_speech,
    verify_chain,
)
from fablemix.retrieval import RetrievalEntry, build_database, load_database, save_database
from fablemix.script import (
    AmbianceEntry,
    BgmEntry,
    CharacterSpec,
    ScriptPlan,
    SubSentence,
)
from fablemix.selection import ModelProfile, build_registry

RATE = 24000

EMB_REGISTRY = build_registry([ModelProfile(
    model_id="emb-model", languages=frozenset({"en"}),
    cloning_rank=1, controllability_rank=1,
    supports_paralinguistics=True, supports_speaker_embedding=True)])


class RecordingBackend(MockBackend):
    """Mock that keeps every synthesis request for inspection."""

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        self.requests = []

    def synthesize(self, request):
        self.requests.append(request)
        return super().synthesize(request)


def story_plan(emotion_shift=False, alpha=None):
    return ScriptPlan(
        characters=(CharacterSpec("nar", "Narrator",
                                  "a deep warm narrator voice", "en"),),
        sub_sentences=(
            SubSentence("nar", "Thunder [SFX: distant thunder@rolled] rolled "
                        "over the hills", "overjoyed happy speech", (), 0,
                        emotion_shift=emotion_shift, alpha=alpha),
            SubSentence("nar", "Rain followed soon after", "quiet relief",
                        (), 1),
        ),
        ambiance=(AmbianceEntry("steady rain", (0, 1), 0.3),),
        bgm=(BgmEntry("low strings", (1, 1), 0.4),),
        source_instruction="storm tale",
    )


def voice_database(tmp_path, backend):
    """Three-entry database with on-disk reference audio."""

    def wav(name, freq):
        clip = Clip(detmath.sine(freq, 2400, RATE, 0.3), RATE)
        save_wav(clip, tmp_path / name)
        return name

    entries = [
        RetrievalEntry("target", "spk_t", "a deep warm narrator voice",
                       "neutral", "en",
                       backend.embed("a deep warm narrator voice"), 4.5,
                       wav("target.wav", 220)),
        RetrievalEntry("em1", "spk_a", "overjoyed happy speech", "joy", "en",
                       backend.embed("overjoyed happy speech"), 4.2,
                       wav("em1.wav", 300)),
        RetrievalEntry("n1", "spk_a", "calm reading", "neutral", "en",
                       backend.embed("calm reading"), 4.0, wav("n1.wav", 260)),
    ]
    path = tmp_path / "voices.jsonl"
    save_database(build_database(64, entries), path)
    return path


# --- planning ----------------------------------------------------------------

def plan_fixture_json():
    return json.dumps({
        "schema_version": 1,
        "characters": [{"id": "nar", "display_name": "Narrator",
                        "timbre_description": "a calm baritone",
                        "language": "en"}],
        "sub_sentences": [{"character_id": "nar",
                           "text": "The night was [SFX: owl hoot@still] still",
                           "emotion_description": "hushed",
                           "paralinguistic_tokens": [],
                           "order_index": 0}],
        "ambiance": [{"prompt": "crickets", "scope": [0, 0],
                      "relative_volume": 0.3}],
        "bgm": [],
    })


def test_build_planner_prompt_is_deterministic_and_complete():
    prompt = build_planner_prompt("Tell a ghost story.",
                                  library=("breath", "sigh"),
                                  languages=("en", "zh"))
    assert prompt == build_planner_prompt("Tell a ghost story.",
                                          library=("breath", "sigh"),
                                          languages=("en", "zh"))
    assert "Tell a ghost story." in prompt
    assert "breath, sigh" in prompt
    assert "en, zh" in prompt
    assert "[SFX: description@anchor_word]" in prompt


def test_run_plan_parses_and_validates():
    backend = MockBackend(judge_fixtures={
        "planner": "Here is the plan:\n```json\n" + plan_fixture_json() + "\n```"})
    plan = run_plan(backend, "a quiet night")
    assert plan.characters[0].id == "nar"
    assert plan.source_instruction == "a quiet night"  # defaulted in
    assert plan.sub_sentences[0].order_index == 0

    prose_only = MockBackend(judge_fixtures={"planner": "I cannot help."})
    with pytest.raises(SchemaViolationError):
        run_plan(prose_only, "x")


def test_run_plan_rejects_invalid_plans():
    bad = json.loads(plan_fixture_json())
    bad["sub_sentences"][0]["paralinguistic_tokens"] = ["yodel"]
    backend = MockBackend(judge_fixtures={"planner": json.dumps(bad)})
    with pytest.raises(SchemaViolationError) as excinfo:
        run_plan(backend, "x")
    assert "yodel" in str(excinfo.value)


# --- character voice refs -------------------------------------------------------

def test_character_voice_refs_prefers_quality_above_threshold():
    backend = MockBackend()
    description = "a gravelly sea captain"
    best_match = RetrievalEntry("low-mos", "s1", description, "neutral", "en",
                                backend.embed(description), 2.0, "a.wav")
    runner_up = RetrievalEntry("hi-mos", "s2", "squeaky village boy",
                               "neutral", "en",
                               backend.embed("squeaky village boy"), 4.0,
                               "b.wav")
    db = build_database(64, [best_match, runner_up])
    plan = ScriptPlan(
        characters=(CharacterSpec("cap", "Captain", description, "en"),),
        sub_sentences=(SubSentence("cap", "Arr", "gruff", (), 0),))
    refs = character_voice_refs(backend, plan, db, mos_threshold=3.5)
    assert refs["cap"].entry_id == "hi-mos"
    # nothing passes: fall back to the best similarity match
    low_db = build_database(64, [
        best_match,
        RetrievalEntry("also-low", "s2", "squeaky village boy", "neutral",
                       "en", backend.embed("squeaky village boy"), 2.0,
                       "b.wav")])
    refs = character_voice_refs(backend, plan, low_db, mos_threshold=3.5)
    assert refs["cap"].entry_id == "low-mos"


def test_character_voice_refs_language_and_no_database_fallbacks():
    backend = MockBackend()
    plan = ScriptPlan(
        characters=(CharacterSpec("zh_char", "Li", "bright young voice", "zh"),),
        sub_sentences=(SubSentence("zh_char", "ni hao", "warm", (), 0),))
    assert character_voice_refs(backend, plan, None, 3.5) == {"zh_char": None}
    en_only = build_database(64, [RetrievalEntry(
        "e", "s", "t", "neutral", "en", backend.embed("t"), 4.0, "a.wav")])
    assert character_voice_refs(backend, plan, en_only, 3.5) == {"zh_char": None}


# --- synthesize_speech ------------------------------------------------------------

def test_synthesize_speech_speaker_embedding_mode(tmp_path):
    backend = RecordingBackend(seed=0, registry=EMB_REGISTRY)
    db_path = voice_database(tmp_path, backend)
    config = PipelineConfig(registry=EMB_REGISTRY, retrieval_db=db_path,
                            parallelism=1)
    track = synthesize_speech(backend, story_plan(), config)

    record = track.records[0]
    assert record.model_id == "emb-model"
    assert record.mode == "speaker_embedding"
    assert record.reference_id == "target"
    assert record.pair_ids == (("em1", "n1"),)
    assert record.alpha == config.alpha.value
    # tags never reach the synthesizer
    assert "[SFX:" not in backend.requests[0].text
    assert backend.requests[0].text == "Thunder rolled over the hills"


def test_synthesize_speech_reference_and_description_modes(tmp_path):
    backend = RecordingBackend(seed=0)
    db_path = voice_database(tmp_path, backend)
    config = PipelineConfig(retrieval_db=db_path)
    # default registry: best cloner (f5-tts) cannot take embeddings, and the
    # emotion matches, so the raw reference recording is used
    track = synthesize_speech(backend, story_plan(), config)
    assert track.records[0].mode == "reference_audio"
    assert track.records[0].model_id == "f5-tts"
    assert backend.requests[0].reference_audio == "target.wav"

    # emotion shift routes to the controllable model, which cannot take
    # embeddings either, so conditioning degrades to a description
    shifted = synthesize_speech(backend, story_plan(emotion_shift=True), config)
    assert shifted.records[0].mode == "description"
    assert shifted.records[0].model_id == "voxinstruct"
    description = backend.requests[2].description
    assert "a deep warm narrator voice" in description
    assert "emotion: overjoyed happy speech" in description

    # no database at all: description mode everywhere
    bare = synthesize_speech(backend, story_plan(),
                             PipelineConfig(retrieval_db=None))
    assert {record.mode for record in bare.records} == {"description"}


def test_synthesize_speech_offsets_are_exact_samples(tmp_path):
    backend = MockBackend(seed=0)
    config = PipelineConfig()
    track = synthesize_speech(backend, story_plan(), config)
    # 5 words then 4 words at 0.08 s/word, separated by round(0.25*24000)
    n0, n1, gap = 9600, 7680, 6000
    assert track.offsets == (0.0, (n0 + gap) / RATE)
    assert track.windows == ((0.0, n0 / RATE),
                             ((n0 + gap) / RATE, (n0 + gap + n1) / RATE))
    assert len(track.speech) == n0 + gap + n1
    # the gap is silent; the segments carry the clips verbatim
    assert np.all(track.speech.samples[n0:n0 + gap] == 0.0)
    spans = track.word_map.spans
    assert [s.word for s in spans] == ["Thunder", "rolled", "over", "the",
                                       "hills", "Rain", "followed", "soon",
                                       "after"]
    assert spans[5].start == pytest.approx(track.offsets[1], abs=1e-12)
    assert {s.sub_sentence_index for s in spans} == {0, 1}
    assert track.word_map.total_duration == pytest.approx(
        len(track.speech) / RATE, abs=1e-12)


def test_synthesize_speech_partial_pairs_and_zero_pairs(tmp_path, caplog):
    backend = MockBackend(seed=0, registry=EMB_REGISTRY)
    db_path = voice_database(tmp_path, backend)
    # ask for two pairs; the database holds exactly one
    config = PipelineConfig(registry=EMB_REGISTRY, retrieval_db=db_path,
                            pair_count=2, parallelism=1)
    with caplog.at_level("WARNING"):
        track = synthesize_speech(backend, story_plan(), config)
    assert track.records[0].pair_ids == (("em1", "n1"),)
    assert any("1 of 2 prosody pairs" in message for message in caplog.messages)

    # raise the MOS bar past every pair member: zero pairs, reference mode
    strict = PipelineConfig(registry=EMB_REGISTRY, retrieval_db=db_path,
                            mos_threshold=4.8, parallelism=1)
    track = synthesize_speech(backend, story_plan(), strict)
    assert track.records[0].pair_ids == ()
    assert track.records[0].mode == "reference_audio"
    assert track.records[0].alpha is None


def test_synthesize_speech_alpha_policies(tmp_path):
    backend = MockBackend(seed=0, registry=EMB_REGISTRY)
    db_path = voice_database(tmp_path, backend)
    planner_policy = PipelineConfig(
        registry=EMB_REGISTRY, retrieval_db=db_path, parallelism=1,
        alpha=AlphaConfig(policy="planner", value=1.0))
    track = synthesize_speech(backend, story_plan(alpha=0.75), planner_policy)
    assert track.records[0].alpha == 0.75
    # fixed policy ignores the plan's alpha
    fixed_policy = PipelineConfig(
        registry=EMB_REGISTRY, retrieval_db=db_path, parallelism=1,
        alpha=AlphaConfig(policy="fixed", value=0.25))
    track = synthesize_speech(backend, story_plan(alpha=0.75), fixed_policy)
    assert track.records[0].alpha == 0.25


def test_synthesize_speech_unit_embedding_renormalization(tmp_path):
    backend = RecordingBackend(seed=0, registry=EMB_REGISTRY)
    db_path = voice_database(tmp_path, backend)
    config = PipelineConfig(
        registry=EMB_REGISTRY, retrieval_db=db_path, parallelism=1,
        backend=BackendConfig(unit_speaker_embeddings=True))
    synthesize_speech(backend, story_plan(), config)
    embedding = backend.requests[0].speaker_embedding
    assert abs(float(np.linalg.norm(embedding.values)) - 1.0) < 1e-9


def test_synthesize_speech_backend_error_paths():
    class WrongRateBackend(MockBackend):
        pass

    with pytest.raises(RateMismatchError):
        synthesize_speech(WrongRateBackend(sample_rate=16000), story_plan(),
                          PipelineConfig())

    class SloppyAligner(MockBackend):
        def align(self, words, clip):
            result = super().align(words, clip)
            return AlignmentResult(spans=result.spans,
                                   clip_duration=result.clip_duration + 0.01)

    with pytest.raises(MalformedResponseError):
        synthesize_speech(SloppyAligner(), story_plan(), PipelineConfig())


# --- timing serialization ----------------------------------------------------------

def test_timing_round_trip(tmp_path):
    backend = MockBackend(seed=0)
    config = PipelineConfig()
    track = synthesize_speech(backend, story_plan(), config)
    data = serialize_timing(track)
    assert serialize_timing(track) == data  # byte-stable
    back = parse_timing(data, track.speech)
    assert back.offsets == track.offsets
    assert back.windows == track.windows
    assert back.word_map == track.word_map
    assert back.records == track.records


def test_parse_timing_rejections():
    speech = Clip(np.zeros(2400), RATE)
    with pytest.raises(SchemaViolationError):
        parse_timing(b"not json", speech)
    with pytest.raises(SchemaViolationError):
        parse_timing(b'{"schema_version": 9}', speech)
    track = synthesize_speech(MockBackend(), story_plan(), PipelineConfig())
    data = serialize_timing(track)
    wrong_rate = Clip(track.speech.samples, 48000)
    with pytest.raises(RateMismatchError):
        parse_timing(data, wrong_rate)
    truncated = json.loads(data)
    del truncated["offsets"]
    with pytest.raises(SchemaViolationError):
        parse_timing(json.dumps(truncated).encode(), track.speech)


# --- assets --------------------------------------------------------------------

def test_generate_assets_parallelism_invariant():
    backend = MockBackend(seed=0)
    config = PipelineConfig()
    track = synthesize_speech(backend, story_plan(), config)
    sheet = compose_cues(story_plan(), track, config)
    serial = generate_assets(backend, sheet, parallelism=1)
    threaded = generate_assets(backend, sheet, parallelism=8)
    assert set(serial) == set(threaded) == {c.cue_id for c in sheet.all_cues()}
    for cue in sheet.all_cues():
        assert np.array_equal(serial[cue.cue_id].samples,
                              threaded[cue.cue_id].samples)
        assert len(serial[cue.cue_id]) == round(cue.duration * RATE)

    empty = ScriptPlan(characters=story_plan().characters,
                       sub_sentences=(SubSentence("nar", "Just words", "flat",
                                                  (), 0),))
    empty_track = synthesize_speech(backend, empty, config)
    empty_sheet = compose_cues(empty, empty_track, config)
    assert generate_assets(backend, empty_sheet) == {}


# --- manifest ------------------------------------------------------------------

def test_manifest_chain_verifies_and_detects_tampering(tmp_path):
    digest_a = record_artifact(tmp_path, "plan.json", b'{"a": 1}', {})
    record_artifact(tmp_path, "speech.wav", b"RIFFdata",
                    {"plan.json": digest_a})
    assert verify_chain(tmp_path) == []

    manifest = load_manifest(tmp_path)
    assert set(manifest["artifacts"]) == {"plan.json", "speech.wav"}
    assert manifest["artifacts"]["speech.wav"]["inputs"] == {
        "plan.json": digest_a}

    # content tamper
    (tmp_path / "speech.wav").write_bytes(b"RIFFdatX")
    problems = verify_chain(tmp_path)
    assert problems == ["speech.wav: content digest mismatch"]

    # input drift: plan.json rewritten after speech consumed it
    record_artifact(tmp_path, "speech.wav", b"RIFFdata",
                    {"plan.json": digest_a})
    record_artifact(tmp_path, "plan.json", b'{"a": 2}', {})
    problems = verify_chain(tmp_path)
    assert problems == ["speech.wav: input plan.json changed after it was consumed"]

    (tmp_path / "plan.json").unlink()
    assert any("file missing" in problem for problem in verify_chain(tmp_path))


def test_load_manifest_rejections(tmp_path):
    assert load_manifest(tmp_path)["artifacts"] == {}
    (tmp_path / "manifest.json").write_text("{broken", "utf-8")
    with pytest.raises(ConfigError):
        load_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text('{"schema_version": 9}', "utf-8")
    with pytest.raises(ConfigError):
        load_manifest(tmp_path)


# --- produce -------------------------------------------------------------------

def test_produce_is_deterministic_and_pcm16_consistent():
    fixtures = {"planner": "```json\n" + plan_fixture_json() + "\n```"}

    def run():
        backend = MockBackend(seed=0, judge_fixtures=fixtures)
        return produce(backend, "a quiet night", PipelineConfig(parallelism=2))

    first, second = run(), run()
    assert encode_wav(first.master) == encode_wav(second.master)
    assert serialize_cue_sheet(first.sheet) == serialize_cue_sheet(second.sheet)
    assert serialize_timing(first.track) == serialize_timing(second.track)

    # the mix consumed PCM16-quantized inputs, so remixing the quantized
    # artifacts reproduces the master exactly
    remixed = mix(first.sheet, first.assets, first.track.speech)
    assert encode_wav(remixed) == encode_wav(first.master)
    for clip in list(first.assets.values()) + [first.track.speech]:
        assert encode_wav(decode_wav(encode_wav(clip))) == encode_wav(clip)
