import json

import pytest

from fablemix.backends.base import AlignmentResult, LocalSpan
from fablemix.cues import (
    Cue,
    CueSheet,
    WordSpan,
    WordTimestampMap,
    build_word_map,
    compile_cue_sheet,
    parse_cue_sheet,
    quantize,
    resolve_anchor,
    serialize_cue_sheet,
)
from fablemix.errors import (
    AnchorNotFoundError,
    EmptyScopeError,
    NonMonotoneAlignmentError,
    OffsetCountMismatchError,
    SchemaViolationError,
)
from fablemix.script import plan_from_dict


def uniform_alignment(words, duration):
    step = duration / len(words)
    return AlignmentResult(
        spans=tuple(LocalSpan(word=w, start=i * step, end=(i + 1) * step)
                    for i, w in enumerate(words)),
        clip_duration=duration)


def demo_plan(sub_texts, ambiance=(), bgm=()):
    return plan_from_dict({
        "schema_version": 1,
        "characters": [{"id": "nar", "display_name": "N",
                        "timbre_description": "plain", "language": "en"}],
        "sub_sentences": [
            {"character_id": "nar", "text": text,
             "emotion_description": "calm", "order_index": i}
            for i, text in enumerate(sub_texts)
        ],
        "ambiance": list(ambiance),
        "bgm": list(bgm),
    })


def test_quantize_grid():
    assert quantize(1.2345678) == 1.234568
    assert quantize(0.0) == 0.0
    assert quantize(2.0000004) == 2.0


def test_cue_validation():
    with pytest.raises(SchemaViolationError):
        Cue(cue_id="x", kind="weird", prompt="p", start_time=0, end_time=1, volume=0.5)
    with pytest.raises(SchemaViolationError):
        Cue(cue_id="x", kind="sfx", prompt="p", start_time=1.0, end_time=0.5, volume=0.5)
    with pytest.raises(SchemaViolationError):
        Cue(cue_id="x", kind="sfx", prompt="p", start_time=0.0, end_time=1.0, volume=0.0)
    with pytest.raises(SchemaViolationError):
        Cue(cue_id="x", kind="sfx", prompt="p", start_time=0.0, end_time=1.0,
            volume=0.5, duration=0.25)
    with pytest.raises(SchemaViolationError):
        Cue(cue_id="x", kind="sfx", prompt="p", start_time=0.0, end_time=1.0,
            volume=0.5, anchor=("", 1))
    cue = Cue(cue_id="x", kind="sfx", prompt="p", start_time=0.1000000004,
              end_time=0.3, volume=0.5)
    assert cue.start_time == 0.1
    assert cue.duration == 0.2


def test_cue_sheet_validation():
    good = Cue(cue_id="a", kind="sfx", prompt="p", start_time=0.0, end_time=0.5,
               volume=0.5)
    with pytest.raises(SchemaViolationError):
        CueSheet(total_duration=1.0, sample_rate=24000, ambiance_cues=(good,))
    late = Cue(cue_id="b", kind="sfx", prompt="p", start_time=0.9, end_time=1.5,
               volume=0.5)
    with pytest.raises(SchemaViolationError):
        CueSheet(total_duration=1.0, sample_rate=24000, sfx_cues=(late,))
    second = Cue(cue_id="c", kind="sfx", prompt="p", start_time=0.6, end_time=0.9,
                 volume=0.5)
    with pytest.raises(SchemaViolationError):
        CueSheet(total_duration=1.0, sample_rate=24000, sfx_cues=(second, good))
    with pytest.raises(SchemaViolationError):
        CueSheet(total_duration=1.0, sample_rate=0)


def test_word_map_shifts_alignments_onto_global_timeline():
    alignments = [uniform_alignment(["a", "b"], 0.4),
                  uniform_alignment(["c"], 0.3)]
    word_map = build_word_map(alignments, [0.0, 0.65])
    assert word_map.total_duration == pytest.approx(0.95)
    assert [(s.word, s.sub_sentence_index) for s in word_map.spans] == [
        ("a", 0), ("b", 0), ("c", 1)]
    assert word_map.spans[1].start == pytest.approx(0.2)
    assert word_map.spans[2].start == pytest.approx(0.65)
    # Oracle: each span start is offset + local index * (duration / words).
    assert word_map.spans[1].start == 0.0 + 1 * (0.4 / 2)


def test_word_map_input_validation():
    with pytest.raises(OffsetCountMismatchError):
        build_word_map([uniform_alignment(["a"], 0.1)], [0.0, 0.5])
    with pytest.raises(OffsetCountMismatchError):
        build_word_map([uniform_alignment(["a"], 0.1)], [-0.5])
    with pytest.raises(OffsetCountMismatchError):
        build_word_map([uniform_alignment(["a"], 0.1)] * 2, [0.5, 0.2])
    with pytest.raises(NonMonotoneAlignmentError):
        WordTimestampMap(spans=(WordSpan("w", 0.5, 0.9, 0),), total_duration=0.4)
    # A span running past its clip's stated duration is rejected.
    with pytest.raises(NonMonotoneAlignmentError):
        build_word_map([AlignmentResult(spans=(LocalSpan("w", 0.0, 0.2),),
                                        clip_duration=0.1)], [0.0])


def test_word_map_empty():
    word_map = build_word_map([], [])
    assert word_map.spans == ()
    assert word_map.total_duration == 0.0


def test_resolve_anchor_counts_within_sub_sentence():
    alignments = [uniform_alignment(["go", "Go!", "stop"], 0.3),
                  uniform_alignment(["go"], 0.1)]
    word_map = build_word_map(alignments, [0.0, 0.4])
    assert resolve_anchor(word_map, ("go", 2), 0) == pytest.approx(0.1)
    assert resolve_anchor(word_map, ("go", 1), 1) == pytest.approx(0.4)
    with pytest.raises(AnchorNotFoundError) as excinfo:
        resolve_anchor(word_map, ("go", 3), 0)
    assert excinfo.value.occurrence_index == 3
    with pytest.raises(AnchorNotFoundError) as excinfo:
        resolve_anchor(word_map, ("stap", 1), 0)
    assert excinfo.value.nearest == "stop"


def test_compile_places_sfx_at_anchor_onset():
    plan = demo_plan(["the storm broke [SFX: thunder crack@storm] storm again"])
    words = ["the", "storm", "broke", "storm", "again"]
    duration = 0.4
    word_map = build_word_map([uniform_alignment(words, duration)], [0.0])
    sheet = compile_cue_sheet(plan, word_map, [(0.0, duration)])
    assert len(sheet.sfx_cues) == 1
    cue = sheet.sfx_cues[0]
    # The tag sits before the second "storm": occurrence 2, word index 3.
    assert cue.anchor == ("storm", 2)
    assert cue.start_time == quantize(3 * duration / 5)
    assert cue.end_time == quantize(duration)  # clipped at program end
    assert cue.volume == 0.9


def test_compile_scene_cues_span_scope_windows():
    plan = demo_plan(
        ["one two", "three four", "five six"],
        ambiance=[{"prompt": "rain", "scope": [0, 2], "relative_volume": 0.3}],
        bgm=[{"prompt": "strings", "scope": [1, 1], "relative_volume": 0.4}],
    )
    alignments = [uniform_alignment(t.split(), 0.16) for t in
                  ["one two", "three four", "five six"]]
    offsets = [0.0, 0.4, 0.8]
    windows = [(o, o + 0.16) for o in offsets]
    word_map = build_word_map(alignments, offsets)
    sheet = compile_cue_sheet(plan, word_map, windows)
    amb = sheet.ambiance_cues[0]
    assert (amb.start_time, amb.end_time) == (0.0, quantize(0.96))
    bgm = sheet.bgm_cues[0]
    assert (bgm.start_time, bgm.end_time) == (quantize(0.4), quantize(0.56))
    assert bgm.volume == 0.4
    assert [c.cue_id for c in sheet.all_cues()] == ["ambiance-000", "bgm-000"]


def test_compile_sorts_sfx_by_onset_and_numbers_ids():
    plan = demo_plan(["[SFX: late@end] start middle end",
                      "[SFX: early@begin] begin close"])
    alignments = [uniform_alignment(["start", "middle", "end"], 0.3),
                  uniform_alignment(["begin", "close"], 0.2)]
    offsets = [0.0, 0.35]
    word_map = build_word_map(alignments, offsets)
    sheet = compile_cue_sheet(plan, word_map, [(0.0, 0.3), (0.35, 0.55)])
    assert [c.prompt for c in sheet.sfx_cues] == ["late", "early"]
    assert [c.cue_id for c in sheet.sfx_cues] == ["sfx-000", "sfx-001"]
    assert sheet.sfx_cues[0].start_time <= sheet.sfx_cues[1].start_time


def test_compile_lenient_drops_unresolvable_anchor():
    plan = demo_plan(["word [SFX: boom@word] only"])
    # The tag wants occurrence 2 of "word" but the text has just one.
    word_map = build_word_map([uniform_alignment(["word", "only"], 0.2)], [0.0])
    with pytest.raises(AnchorNotFoundError):
        compile_cue_sheet(plan, word_map, [(0.0, 0.2)])
    sheet = compile_cue_sheet(plan, word_map, [(0.0, 0.2)], lenient_anchors=True)
    assert sheet.sfx_cues == ()


def test_compile_scope_window_and_count_checks():
    plan = demo_plan(["a b"], ambiance=[{"prompt": "rain", "scope": [0, 0]}])
    word_map = build_word_map([uniform_alignment(["a", "b"], 0.2)], [0.0])
    with pytest.raises(OffsetCountMismatchError):
        compile_cue_sheet(plan, word_map, [])
    sheet = compile_cue_sheet(plan, word_map, [(0.0, 0.2)])
    assert sheet.ambiance_cues[0].end_time == 0.2


def test_scope_window_rejects_out_of_range_scopes():
    from fablemix.cues import _scope_window
    with pytest.raises(EmptyScopeError):
        _scope_window((0, 2), [(0.0, 0.1)], "/ambiance/0")
    with pytest.raises(EmptyScopeError):
        _scope_window((0, 0), [], "/ambiance/0")
    assert _scope_window((0, 1), [(0.0, 0.1), (0.2, 0.3)], "/x") == (0.0, 0.3)


def test_serialization_round_trips_bytes():
    cue = Cue(cue_id="sfx-000", kind="sfx", prompt="p", start_time=0.123456,
              end_time=1.0, volume=0.9, anchor=("word", 2))
    sheet = CueSheet(total_duration=2.0, sample_rate=24000, sfx_cues=(cue,))
    payload = serialize_cue_sheet(sheet)
    parsed = parse_cue_sheet(payload)
    assert serialize_cue_sheet(parsed) == payload
    assert parsed.sfx_cues[0].anchor == ("word", 2)
    assert parsed.sfx_cues[0].start_time == 0.123456


def test_serialization_is_sorted_and_fixed_point():
    sheet = CueSheet(total_duration=1.5, sample_rate=24000)
    payload = serialize_cue_sheet(sheet)
    text = payload.decode("utf-8")
    assert '"total_duration": 1.500000' in text
    assert json.loads(text)["schema_version"] == 1


def test_parse_cue_sheet_errors():
    with pytest.raises(SchemaViolationError):
        parse_cue_sheet(b"not json")
    with pytest.raises(SchemaViolationError):
        parse_cue_sheet(b'{"schema_version": 9}')
    with pytest.raises(SchemaViolationError):
        parse_cue_sheet(json.dumps({
            "schema_version": 1, "total_duration": 1.0, "sample_rate": 24000,
            "sfx_cues": "nope", "ambiance_cues": [], "bgm_cues": [],
        }).encode())
