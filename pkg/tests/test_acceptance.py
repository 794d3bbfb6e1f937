"""Acceptance checklist.

Each numbered test covers one release gate and prints a visible PASS/FAIL
line with its runtime, so `pytest tests/test_acceptance.py` doubles as the
sign-off report. Tolerances are pinned in the assertions; every check has a
wall-clock budget that fails the run when exceeded.
"""
import contextlib
import math
import os
import random
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fablemix.audio import Clip, encode_wav, render, silence
from fablemix.backends.conformance import HttpHarness, run_conformance
from fablemix.backends.mock import MockBackend
from fablemix.cli import main
from fablemix.cues import (
    Cue,
    CueSheet,
    build_word_map,
    compile_cue_sheet,
    parse_cue_sheet,
    quantize,
    serialize_cue_sheet,
)
from fablemix.errors import (
    NoCapableModelError,
    NoNeutralSampleError,
    ZeroDirectionError,
)
from fablemix.evaluation.correlation import pearson
from fablemix.evaluation.prompts import DIMENSIONS
from fablemix.evaluation.scoring import STAGE_SEQUENCE, evaluate
from fablemix.evaluation.sweep import (
    MEAN_COLUMN,
    SWEEP_KINDS,
    AudioSample,
    stimuli_sweep,
)
from fablemix.prosody import (
    SpeakerEmbedding,
    apply_emotion,
    average_direction,
    emotional_direction,
    unit,
)
from fablemix.retrieval import filter_quality, pair_emotion_neutral, top_k
from fablemix.script import parse_inline_sfx, plan_from_dict
from fablemix.selection import (
    DEFAULT_REGISTRY,
    ModelProfile,
    SelectionRequest,
    build_registry,
    select_model,
)
from helpers import inject_tags, random_database

GOLDEN_CUES = Path(__file__).parent / "data" / "golden_cues.json"


@contextlib.contextmanager
def checkpoint(capsys, number, title, budget_seconds):
    """Time a check and print one PASS/FAIL line that survives capture."""
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        elapsed = time.perf_counter() - start
        with capsys.disabled():
            print(f"\nacceptance {number:02d} FAIL {title} ({elapsed:.2f}s)")
        raise
    elapsed = time.perf_counter() - start
    verdict = "PASS" if elapsed <= budget_seconds else "FAIL"
    with capsys.disabled():
        print(f"\nacceptance {number:02d} {verdict} {title} "
              f"({elapsed:.2f}s, budget {budget_seconds:g}s)")
    assert elapsed <= budget_seconds, \
        f"check {number} ran {elapsed:.2f}s, budget {budget_seconds:g}s"


def test_01_prosody_math(capsys):
    with checkpoint(capsys, 1, "prosody math: antisymmetry, m=1 reduction, "
                    "unit norm 1e-9, zero-shift identity, |delta|=|alpha| 1e-9",
                    5.0):
        rng = np.random.default_rng(101)
        dimensions = (8, 64, 512)
        for trial in range(200):
            d = dimensions[trial % len(dimensions)]

            def emb():
                return SpeakerEmbedding(rng.standard_normal(d), "acc")

            emotional, neutral = emb(), emb()
            forward = emotional_direction(emotional, neutral, "joy")
            backward = emotional_direction(neutral, emotional, "joy")
            assert np.array_equal(forward.values, -backward.values)
            self_direction = emotional_direction(emotional, emotional, "joy")
            assert not self_direction.values.any()
            with pytest.raises(ZeroDirectionError):
                unit(self_direction)

            # a single pair averages to exactly its own normalized direction
            single = unit(average_direction([forward]))
            norm = float(np.linalg.norm(forward.values))
            assert np.allclose(single.values, forward.values / norm,
                               rtol=0.0, atol=1e-12)
            assert abs(float(np.linalg.norm(single.values)) - 1.0) <= 1e-9

            extras = [emotional_direction(emb(), emb(), "joy")
                      for _ in range(int(rng.integers(0, 3)))]
            pooled = unit(average_direction([forward, *extras]))
            assert abs(float(np.linalg.norm(pooled.values)) - 1.0) <= 1e-9

            target = emb()
            assert np.array_equal(apply_emotion(target, pooled, 0.0).values,
                                  target.values)
            alpha = float(rng.uniform(-1.4, 1.4))
            shifted = apply_emotion(target, pooled, alpha)
            delta = float(np.linalg.norm(shifted.values - target.values))
            assert abs(delta - abs(alpha)) <= 1e-9


def test_02_retrieval_oracle_equivalence(capsys):
    with checkpoint(capsys, 2, "retrieval: brute-force parity 1e-12 on 100 "
                    "databases, filter idempotence, 1000 pair invariants",
                    30.0):
        rng = np.random.default_rng(202)

        def brute_force(query, entries):
            def cosine(a, b):
                dot = sum(x * y for x, y in zip(a, b))
                na = sum(x * x for x in a) ** 0.5
                nb = sum(x * x for x in b) ** 0.5
                return dot / (na * nb)
            scored = [(entry, cosine(query, entry.embedding))
                      for entry in entries]
            scored.sort(key=lambda item: (-item[1], item[0].entry_id))
            return scored

        for _ in range(100):
            db = random_database(rng, dimension=int(rng.integers(2, 17)),
                                 n_entries=int(rng.integers(1, 201)))
            query = rng.standard_normal(db.dimension)
            k = int(rng.integers(1, len(db) + 1))
            expected = brute_force(query, db.entries)[:k]
            actual = top_k(query, db, k)
            assert [e.entry_id for e, _ in actual] \
                == [e.entry_id for e, _ in expected]
            for (_, sim_a), (_, sim_b) in zip(actual, expected):
                assert abs(sim_a - sim_b) <= 1e-12
            threshold = float(rng.uniform(1.0, 5.0))
            once = filter_quality(db.entries, threshold)
            assert filter_quality(once, threshold) == once
            assert all(entry.mos >= threshold for entry in once)

        checked = 0
        while checked < 1000:
            db = random_database(rng, dimension=4, n_entries=40)
            for entry in db:
                if entry.emotion_label == "neutral":
                    continue
                try:
                    pair = pair_emotion_neutral(entry, db)
                except NoNeutralSampleError:
                    continue
                assert pair.emotional is entry
                assert pair.neutral.speaker_id == entry.speaker_id
                assert pair.neutral.emotion_label == "neutral"
                assert pair.emotional.emotion_label != "neutral"
                candidates = [e for e in db
                              if e.speaker_id == entry.speaker_id
                              and e.emotion_label == "neutral"]
                best = min(candidates, key=lambda e: (-e.mos, e.entry_id))
                assert pair.neutral.entry_id == best.entry_id
                checked += 1
                if checked >= 1000:
                    break


def test_03_tag_grammar_round_trip(capsys):
    with checkpoint(capsys, 3, "tag grammar: 500 synthesized texts with 0-10 "
                    "tags round-trip exactly", 5.0):
        rng = random.Random(303)
        for _ in range(500):
            tagged, clean, expected = inject_tags(rng, rng.randint(0, 10))
            got_clean, cues = parse_inline_sfx(tagged)
            assert got_clean == clean
            assert len(cues) == len(expected)
            assert [(c.description, c.anchor_word, c.occurrence_index)
                    for c in cues] == expected


def _random_tagged_script(rng):
    """Sub-sentence texts plus the (sub, position, word, occurrence) oracle."""
    vocabulary = ("storm", "door", "night", "wind", "steps", "lamp", "rain")
    subs, tags = [], []
    for order in range(rng.randint(1, 4)):
        words = [rng.choice(vocabulary) for _ in range(rng.randint(3, 12))]
        positions = sorted(rng.sample(range(len(words)),
                                      k=min(rng.randint(0, 3), len(words))))
        parts = []
        for i, word in enumerate(words):
            if i in positions:
                occurrence = sum(1 for w in words[:i] if w == word) + 1
                parts.append(f"[SFX: {rng.choice(('creak', 'thud', 'hiss'))}"
                             f"@{word}]")
                tags.append((order, i, word, occurrence))
            parts.append(word)
        subs.append({"character_id": "nar", "text": " ".join(parts),
                     "emotion_description": "even", "order_index": order})
    n = len(subs)
    plan = plan_from_dict({
        "schema_version": 1,
        "characters": [{"id": "nar", "display_name": "N",
                        "timbre_description": "even voice", "language": "en"}],
        "sub_sentences": subs,
        "ambiance": [{"prompt": "soft rain", "scope": [0, n - 1],
                      "relative_volume": 0.3}],
        "bgm": [{"prompt": "low strings", "scope": [n - 1, n - 1],
                 "relative_volume": 0.4}],
    })
    return plan, tags


def test_04_cue_compilation(capsys, tmp_path):
    with checkpoint(capsys, 4, "cue compilation: sfx start == anchor onset "
                    "exactly, duration 1e-6, byte round-trip, golden demo "
                    "sheet byte-stable", 5.0):
        backend = MockBackend(seed=0)
        rng = random.Random(404)
        for _ in range(30):
            plan, tags = _random_tagged_script(rng)
            alignments, offsets, windows = [], [], []
            cursor = 0.0
            for sub in plan.sub_sentences:
                clean, _ = parse_inline_sfx(sub.text)
                words = clean.split()
                clip = silence(0.08 * len(words))
                alignments.append(backend.align(words, clip))
                offsets.append(cursor)
                windows.append((cursor, cursor + alignments[-1].clip_duration))
                cursor += alignments[-1].clip_duration
            word_map = build_word_map(alignments, offsets)
            sheet = compile_cue_sheet(plan, word_map, windows)

            # onset oracle straight from the aligner output, not the compiler
            expected = sorted(
                (word, occurrence,
                 quantize(offsets[sub] + alignments[sub].spans[position].start))
                for sub, position, word, occurrence in tags)
            produced = sorted((cue.anchor[0], cue.anchor[1], cue.start_time)
                              for cue in sheet.sfx_cues)
            assert produced == expected
            for cue in sheet.all_cues():
                assert abs(cue.duration - (cue.end_time - cue.start_time)) \
                    <= 1e-6

            data = serialize_cue_sheet(sheet)
            assert serialize_cue_sheet(parse_cue_sheet(data)) == data

        # bundled demo plan compiles to the committed golden cue sheet
        workspace = tmp_path / "ws"
        assert main(["demo", "--out", str(workspace)]) == 0
        assert main(["generate", "--config", str(workspace / "config.json"),
                     str(workspace / "instruction.txt")]) == 0
        produced = (workspace / "out" / "cues.json").read_bytes()
        assert produced == GOLDEN_CUES.read_bytes()


def test_05_mixer(capsys):
    with checkpoint(capsys, 5, "mixer: impulse at round(t*rate) x100, "
                    "superposition 1e-12, empty sheet == speech bytes, "
                    "peak <= 0.999, shuffle invariance 1e-12", 20.0):
        rate = 24000
        rng = np.random.default_rng(505)
        impulse = Clip(np.array([1.0]), rate)

        for _ in range(100):
            micros = int(rng.integers(0, 9_500_000))
            t = micros / 1e6
            sheet = CueSheet(total_duration=10.0, sample_rate=rate, sfx_cues=(
                Cue("sfx-000", "sfx", "tick", t, t + 0.25, 0.5),))
            out = render(sheet, {"sfx-000": impulse}, silence(10.0, rate))
            nonzero = np.flatnonzero(out.samples)
            assert nonzero.tolist() == [round(t * rate)]
            assert out.samples[round(t * rate)] == 0.5

        speech = Clip(0.1 * np.sin(np.linspace(0.0, 40.0, rate * 2)), rate)
        tone = Clip(0.2 * np.sin(np.linspace(0.0, 90.0, rate // 2)), rate)
        cue_a = Cue("ambiance-000", "ambiance", "air", 0.0, 2.0, 0.4)
        cue_b = Cue("sfx-000", "sfx", "tap", 0.5, 0.75, 0.6)
        base = render(CueSheet(2.0, rate), {}, speech)
        assert encode_wav(base) == encode_wav(speech)
        only_a = render(CueSheet(2.0, rate, ambiance_cues=(cue_a,)),
                        {"ambiance-000": tone}, speech)
        only_b = render(CueSheet(2.0, rate, sfx_cues=(cue_b,)),
                        {"sfx-000": tone}, speech)
        both = render(CueSheet(2.0, rate, sfx_cues=(cue_b,),
                               ambiance_cues=(cue_a,)),
                      {"ambiance-000": tone, "sfx-000": tone}, speech)
        residual = both.samples - (only_a.samples + only_b.samples
                                   - base.samples)
        assert float(np.max(np.abs(residual))) <= 1e-12

        loud_speech = Clip(0.9 * np.ones(rate), rate)
        loud = render(CueSheet(1.0, rate, sfx_cues=(
            Cue("sfx-000", "sfx", "blast", 0.0, 1.0, 1.0),)),
            {"sfx-000": Clip(np.ones(rate), rate)}, loud_speech)
        assert loud.peak <= 0.999 + 1e-12

        # nine sfx cues in three equal-start groups; permuting the order in
        # which tied cues are summed must not change the mix
        starts = [0.2, 0.2, 0.2, 0.8, 0.8, 0.8, 1.4, 1.4, 1.4]
        grains = {i: Clip(0.05 * rng.standard_normal(rate // 4), rate)
                  for i in range(9)}
        order_b = [2, 0, 1, 5, 4, 3, 8, 6, 7]

        def mix(order):
            cues, assets = [], {}
            for slot, source in enumerate(order):
                cue_id = f"sfx-{slot:03d}"
                cues.append(Cue(cue_id, "sfx", "grain", starts[slot],
                                starts[slot] + 0.25, 0.9))
                assets[cue_id] = grains[source]
            sheet = CueSheet(2.0, rate, sfx_cues=tuple(cues))
            return render(sheet, assets, speech)

        drift = mix(list(range(9))).samples - mix(order_b).samples
        assert float(np.max(np.abs(drift))) <= 1e-12


def test_06_pearson(capsys):
    with checkpoint(capsys, 6, "pearson: identities 1e-12, worked example "
                    "0.8 1e-12 vs raw-sums oracle", 1.0):
        def raw_sums(x, y):
            n = len(x)
            sx, sy = sum(x), sum(y)
            sxx = sum(v * v for v in x)
            syy = sum(v * v for v in y)
            sxy = sum(a * b for a, b in zip(x, y))
            return (n * sxy - sx * sy) / math.sqrt(
                (n * sxx - sx * sx) * (n * syy - sy * sy))

        x = [1.0, 2.0, 3.0, 4.0]
        assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)
        assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)
        assert pearson(x, [3.0 * v + 7.0 for v in x]) \
            == pytest.approx(1.0, abs=1e-12)
        y = [1.0, 3.0, 2.0, 4.0]
        assert pearson(x, y) == pytest.approx(0.8, abs=1e-12)
        assert pearson(x, y) == pytest.approx(raw_sums(x, y), abs=1e-12)


def _score_block(row):
    return ("Reasoning first.\n```json\n"
            f'{{"quality": {row[0]}, "naturalness": {row[1]}, '
            f'"expressiveness": {row[2]}, "immersion": {row[3]}, '
            f'"overall": {row[4]}}}\n```')


def test_07_evaluation_protocol(capsys):
    with checkpoint(capsys, 7, "evaluation: 3-run stats vs hand math 1e-12, "
                    "five stages per run, one/zero-shot example counts, "
                    "sweep deltas exactly 0", 10.0):
        rows = [(4, 3, 5, 4, 4), (3, 3, 4, 2, 3), (5, 4, 3, 3, 4)]
        fixtures = {f"acc-run{i}": ["ack"] * 4 + [_score_block(row)]
                    for i, row in enumerate(rows)}
        backend = MockBackend(judge_fixtures=fixtures)
        report = evaluate(backend, "tale.wav", "context", runs=3,
                          session_base="acc")
        for column, dimension in enumerate(DIMENSIONS):
            values = [row[column] for row in rows]
            mean = sum(values) / 3
            std = math.sqrt(sum((v - mean) ** 2 for v in values) / 3)
            assert abs(report.means[dimension] - mean) <= 1e-12
            assert abs(report.stds[dimension] - std) <= 1e-12
        hand_dim_mean = sum(sum(row[c] for row in rows) / 3
                            for c in range(4)) / 4
        assert abs(report.dimension_mean - hand_dim_mean) <= 1e-12
        stage_labels = [label for label, _ in STAGE_SEQUENCE]
        for run in report.runs:
            assert [label for label, _ in run.exchanges] == stage_labels

        example = "Benchmark example: warm narration scored all fours."
        wildcard = MockBackend(judge_fixtures={"*": _score_block((4,) * 5)})
        one_shot = evaluate(wildcard, "a.wav", "", runs=1, mode="one_shot",
                            reference_example=example)
        prompts = [exchange.prompt
                   for _, exchange in one_shot.runs[0].exchanges]
        assert sum(prompt.count(example) for prompt in prompts) == 1
        zero_shot = evaluate(wildcard, "a.wav", "", runs=1, mode="zero_shot")
        assert all(example not in exchange.prompt
                   for _, exchange in zero_shot.runs[0].exchanges)

        per_sample = {"s1": 4, "s2": 2, "s3": 5, "s4": 3}
        sweep_fixtures = {}
        stimuli = ["none"] + [f"{kind}/motivation_drive"
                              for kind in SWEEP_KINDS]
        for sample_id, value in per_sample.items():
            for stimulus in stimuli:
                for run in range(2):
                    sweep_fixtures[f"{sample_id}:{stimulus}-run{run}"] = (
                        ["ack"] * 4 + [_score_block((value,) * 5)])
        sweep_backend = MockBackend(judge_fixtures=sweep_fixtures)
        samples = [AudioSample(sid, f"{sid}.wav", "ctx")
                   for sid in sorted(per_sample)]
        human = {sid: {d: float(v) for d in DIMENSIONS}
                 for sid, v in per_sample.items()}
        result = stimuli_sweep(sweep_backend, samples, human, runs=2)
        for kind in SWEEP_KINDS:
            for dimension in DIMENSIONS:
                assert result.deltas[kind][dimension] == 0.0
            assert result.deltas[kind][MEAN_COLUMN] == 0.0


def test_08_model_selection(capsys):
    with checkpoint(capsys, 8, "model selection: three anchored scenarios, "
                    "50 random registries filter-safe and rank-monotone",
                    2.0):
        clone = select_model(DEFAULT_REGISTRY, SelectionRequest(
            language="en", text_emotion="joy", reference_emotion="joy",
            emotion_shift=False))
        assert clone.model_id == "f5-tts"
        shift = select_model(DEFAULT_REGISTRY, SelectionRequest(
            language="en", text_emotion="fear", reference_emotion="neutral",
            emotion_shift=True))
        assert shift.model_id == "voxinstruct"
        dialect = select_model(DEFAULT_REGISTRY, SelectionRequest(
            language="zh-dialect", needs_paralinguistics=True))
        assert dialect.model_id == "cosyvoice2"

        rng = random.Random(808)
        for _ in range(50):
            n = rng.randint(1, 6)
            cloning = rng.sample(range(1, 20), n)
            control = rng.sample(range(1, 20), n)
            profiles = [ModelProfile(
                model_id=f"m{i}",
                languages=frozenset(rng.sample(
                    ["en", "zh", "ja", "ko", "zh-dialect"],
                    rng.randint(1, 3))),
                cloning_rank=cloning[i],
                controllability_rank=control[i],
                supports_paralinguistics=rng.random() < 0.5,
                supports_speaker_embedding=False,
                emotion_clone_languages=frozenset(),
            ) for i in range(n)]
            registry = build_registry(profiles)
            language = rng.choice(["en", "zh", "ja", "ko", "zh-dialect"])
            needs_para = rng.random() < 0.5
            wants_shift = rng.random() < 0.5
            request = SelectionRequest(language=language,
                                       emotion_shift=wants_shift,
                                       needs_paralinguistics=needs_para)
            eligible = [p for p in profiles
                        if language in p.languages
                        and (not needs_para or p.supports_paralinguistics)]
            if not eligible:
                with pytest.raises(NoCapableModelError):
                    select_model(registry, request)
                continue
            selection = select_model(registry, request)
            winner = next(p for p in profiles
                          if p.model_id == selection.model_id)
            assert language in winner.languages
            if needs_para:
                assert winner.supports_paralinguistics
            if wants_shift:
                assert winner.controllability_rank == min(
                    p.controllability_rank for p in eligible)
            else:
                assert winner.cloning_rank == min(
                    p.cloning_rank for p in eligible)


def test_09_end_to_end_determinism(capsys, tmp_path):
    with checkpoint(capsys, 9, "end-to-end: two seeded CLI runs produce "
                    "byte-identical master.wav and cues.json", 60.0):
        workspace = tmp_path / "ws"
        assert main(["demo", "--out", str(workspace)]) == 0
        outputs = []
        for name in ("run-a", "run-b"):
            out_dir = tmp_path / name
            completed = subprocess.run(
                [sys.executable, "-m", "fablemix.cli", "generate",
                 "--config", str(workspace / "config.json"),
                 "--out", str(out_dir), "--seed", "0",
                 str(workspace / "instruction.txt")],
                capture_output=True, text=True, cwd=tmp_path)
            assert completed.returncode == 0, completed.stderr
            outputs.append(out_dir)
        first, second = outputs
        assert (first / "master.wav").read_bytes() \
            == (second / "master.wav").read_bytes()
        assert (first / "cues.json").read_bytes() \
            == (second / "cues.json").read_bytes()


@pytest.mark.skipif("ADAPTER_URL" not in os.environ,
                    reason="set ADAPTER_URL to check an external adapter")
def test_10_adapter_conformance(capsys):
    with checkpoint(capsys, 10, "adapter: wire conformance suite plus "
                    "monotone alignment on a 10-clip corpus", 600.0):
        harness = HttpHarness(os.environ["ADAPTER_URL"],
                              token=os.environ.get("ADAPTER_TOKEN"))
        report = run_conformance(harness, align_corpus_size=10)
        assert report.ok, report.summary()
