"""Command-line front end.

Each stage reads its inputs from the output directory (or explicit paths),
writes its artifact files there, and chains content digests in
manifest.json, so a finished production carries verifiable provenance.
Exit codes: 0 success, 2 configuration, 3 backend, 4 plan/schema,
5 anchor/alignment, 1 anything else.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .audio import decode_wav, encode_wav, load_assets, save_assets
from .backends.trace import TraceRecorder
from .config import PipelineConfig, default_config, load_config, make_backend, with_seed
from .cues import parse_cue_sheet, serialize_cue_sheet
from .demo import write_demo_workspace
from .errors import (
    AlignmentError,
    BackendError,
    ConfigError,
    FablemixError,
    PlanError,
    SelectionError,
)
from .evaluation import (
    AudioSample,
    correlation_table,
    evaluate,
    parse_stimulus,
    read_human_scores,
    read_metric_scores,
    render_correlation_figure,
    render_sweep_figure,
    stimuli_sweep,
)
from .jsonutil import canonical_dumps, sha256_hex
from .pipeline import (
    compose_cues,
    generate_assets,
    mix,
    parse_timing,
    produce,
    record_artifact,
    run_plan,
    serialize_timing,
    synthesize_speech,
    verify_chain,
)
from .script import parse_plan, serialize_plan

log = logging.getLogger(__name__)


def _load(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else default_config()
    if getattr(args, "seed", None) is not None:
        config = with_seed(config, args.seed)
    if getattr(args, "parallelism", None) is not None:
        config = replace(config, parallelism=args.parallelism)
    if getattr(args, "out", None) is not None:
        config = replace(config, out_dir=Path(args.out))
    return config


def _languages(config: PipelineConfig) -> tuple:
    tags = set()
    for profile in config.registry.profiles:
        tags.update(profile.languages)
    return tuple(sorted(tags))


def _read_artifact(out_dir: Path, name: str, override=None) -> tuple[bytes, str, str]:
    """Bytes, digest, and manifest label of a stage input."""
    path = Path(override) if override else out_dir / name
    if not path.is_file():
        raise ConfigError(f"missing stage input: {path}")
    payload = path.read_bytes()
    label = name if override is None else path.name
    return payload, sha256_hex(payload), label


# --- subcommands -------------------------------------------------------------


def cmd_demo(args) -> int:
    config_path = write_demo_workspace(args.out)
    root = config_path.parent
    print(f"demo workspace: {root}")
    print(f"next: fablemix generate --config {config_path} {root / 'instruction.txt'}")
    return 0


def cmd_plan(args) -> int:
    config = _load(args)
    backend = make_backend(config)
    instruction_path = Path(args.instruction)
    if not instruction_path.is_file():
        raise ConfigError(f"instruction file not found: {instruction_path}")
    instruction = instruction_path.read_text(encoding="utf-8")
    plan = run_plan(backend, instruction, library=config.paralinguistic_library,
                    languages=_languages(config))
    payload = serialize_plan(plan)
    record_artifact(config.out_dir, "plan.json", payload,
                    {instruction_path.name: sha256_hex(instruction.encode("utf-8"))})
    print(f"wrote {config.out_dir / 'plan.json'} "
          f"({len(plan.characters)} characters, {len(plan.sub_sentences)} sub-sentences)")
    return 0


def cmd_synthesize(args) -> int:
    config = _load(args)
    backend = make_backend(config)
    plan_bytes, plan_digest, plan_label = _read_artifact(config.out_dir, "plan.json",
                                                         args.plan)
    plan = parse_plan(plan_bytes)
    track = synthesize_speech(backend, plan, config)
    inputs = {plan_label: plan_digest}
    record_artifact(config.out_dir, "speech.wav", encode_wav(track.speech), inputs)
    record_artifact(config.out_dir, "timing.json", serialize_timing(track), inputs)
    print(f"wrote {config.out_dir / 'speech.wav'} "
          f"({track.speech.duration:.2f}s, {len(track.word_map.spans)} aligned words)")
    return 0


def cmd_compose(args) -> int:
    config = _load(args)
    plan_bytes, plan_digest, plan_label = _read_artifact(config.out_dir, "plan.json",
                                                         args.plan)
    speech_bytes, speech_digest, speech_label = _read_artifact(
        config.out_dir, "speech.wav", args.speech)
    timing_bytes, timing_digest, timing_label = _read_artifact(
        config.out_dir, "timing.json", args.timing)
    plan = parse_plan(plan_bytes)
    track = parse_timing(timing_bytes, decode_wav(speech_bytes))
    sheet = compose_cues(plan, track, config, lenient_anchors=args.lenient_anchors)
    record_artifact(config.out_dir, "cues.json", serialize_cue_sheet(sheet), {
        plan_label: plan_digest,
        speech_label: speech_digest,
        timing_label: timing_digest,
    })
    print(f"wrote {config.out_dir / 'cues.json'} "
          f"({len(sheet.sfx_cues)} sfx, {len(sheet.ambiance_cues)} ambiance, "
          f"{len(sheet.bgm_cues)} bgm)")
    return 0


def _assets_for(config: PipelineConfig, sheet, cues_digest: str) -> dict:
    """Load the asset store if it covers the sheet, else generate and save it."""
    directory = config.out_dir / "assets"
    wanted = {cue.cue_id for cue in sheet.all_cues()}
    if (directory / "manifest.json").is_file():
        assets = load_assets(directory)
        if wanted <= set(assets):
            return {cue_id: assets[cue_id] for cue_id in wanted}
        log.info("asset store incomplete; regenerating")
    backend = make_backend(config)
    assets = generate_assets(backend, sheet, config.parallelism)
    save_assets(directory, assets, sheet.sample_rate)
    manifest_bytes = (directory / "manifest.json").read_bytes()
    record_artifact(config.out_dir, "assets/manifest.json", manifest_bytes,
                    {"cues.json": cues_digest})
    # Mix from the persisted (PCM16) clips so reruns reproduce exactly.
    return load_assets(directory)


def cmd_mix(args) -> int:
    config = _load(args)
    cues_bytes, cues_digest, cues_label = _read_artifact(config.out_dir, "cues.json",
                                                         args.cues)
    speech_bytes, speech_digest, speech_label = _read_artifact(
        config.out_dir, "speech.wav", args.speech)
    sheet = parse_cue_sheet(cues_bytes)
    speech = decode_wav(speech_bytes)
    assets = _assets_for(config, sheet, cues_digest)
    master = mix(sheet, assets, speech)
    record_artifact(config.out_dir, "master.wav", encode_wav(master), {
        cues_label: cues_digest,
        speech_label: speech_digest,
    })
    print(f"wrote {config.out_dir / 'master.wav'} ({master.duration:.2f}s)")
    return 0


def cmd_generate(args) -> int:
    config = _load(args)
    backend = TraceRecorder(make_backend(config))
    instruction_path = Path(args.instruction)
    if not instruction_path.is_file():
        raise ConfigError(f"instruction file not found: {instruction_path}")
    instruction = instruction_path.read_text(encoding="utf-8")
    result = produce(backend, instruction, config,
                     lenient_anchors=args.lenient_anchors,
                     languages=_languages(config))
    out = config.out_dir
    instruction_digest = sha256_hex(instruction.encode("utf-8"))

    plan_digest = record_artifact(out, "plan.json", serialize_plan(result.plan),
                                  {instruction_path.name: instruction_digest})
    speech_digest = record_artifact(out, "speech.wav", encode_wav(result.track.speech),
                                    {"plan.json": plan_digest})
    timing_digest = record_artifact(out, "timing.json", serialize_timing(result.track),
                                    {"plan.json": plan_digest})
    cues_digest = record_artifact(out, "cues.json", serialize_cue_sheet(result.sheet), {
        "plan.json": plan_digest,
        "speech.wav": speech_digest,
        "timing.json": timing_digest,
    })
    save_assets(out / "assets", result.assets, result.sheet.sample_rate)
    assets_manifest = (out / "assets" / "manifest.json").read_bytes()
    assets_digest = record_artifact(out, "assets/manifest.json", assets_manifest,
                                    {"cues.json": cues_digest})
    record_artifact(out, "master.wav", encode_wav(result.master), {
        "cues.json": cues_digest,
        "speech.wav": speech_digest,
        "assets/manifest.json": assets_digest,
    })
    backend.save(out / "trace.jsonl")

    problems = verify_chain(out)
    if problems:
        for problem in problems:
            log.error("manifest: %s", problem)
        return 1
    for name in ("plan.json", "speech.wav", "timing.json", "cues.json",
                 "assets/manifest.json", "master.wav", "trace.jsonl"):
        print(f"wrote {out / name}")
    print("manifest chain verified")
    return 0


def cmd_evaluate(args) -> int:
    config = _load(args)
    backend = make_backend(config)
    audio_path = Path(args.audio)
    if not audio_path.is_file():
        raise ConfigError(f"audio file not found: {audio_path}")
    context = ""
    if args.context:
        context_path = Path(args.context)
        if not context_path.is_file():
            raise ConfigError(f"context file not found: {context_path}")
        context = context_path.read_text(encoding="utf-8")
    reference = None
    if args.reference_example:
        reference = Path(args.reference_example).read_text(encoding="utf-8")
    report = evaluate(backend, str(audio_path), context, runs=args.runs,
                      stimulus=parse_stimulus(args.stimulus), mode=args.mode,
                      reference_example=reference)
    payload = canonical_dumps(report.to_dict()).encode("utf-8")
    record_artifact(config.out_dir, "report.json", payload,
                    {audio_path.name: sha256_hex(audio_path.read_bytes())})
    print(f"wrote {config.out_dir / 'report.json'}")
    for dimension, mean in report.means.items():
        print(f"{dimension:<16}{mean:5.2f} ± {report.stds[dimension]:.2f}")
    print(f"{'dimension mean':<16}{report.dimension_mean:5.2f}")
    return 0


def cmd_correlate(args) -> int:
    config = _load(args)
    metric = read_metric_scores(args.metric_csv)
    human = read_human_scores(args.human_csv)
    table = correlation_table(metric, human)
    csv_payload = table.to_csv().encode("utf-8")
    inputs = {
        Path(args.metric_csv).name: sha256_hex(Path(args.metric_csv).read_bytes()),
        Path(args.human_csv).name: sha256_hex(Path(args.human_csv).read_bytes()),
    }
    record_artifact(config.out_dir, "correlation.csv", csv_payload, inputs)
    figure_path = config.out_dir / "correlation.png"
    render_correlation_figure(table, figure_path)
    record_artifact(config.out_dir, "correlation.png", figure_path.read_bytes(),
                    {"correlation.csv": sha256_hex(csv_payload)})
    print(table.to_text())
    print(f"wrote {config.out_dir / 'correlation.csv'} and {figure_path}")
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    backend = make_backend(config)
    audio_dir = Path(args.audio_dir)
    if not audio_dir.is_dir():
        raise ConfigError(f"audio directory not found: {audio_dir}")
    samples = [AudioSample(sample_id=path.stem, audio=str(path))
               for path in sorted(audio_dir.glob("*.wav"))]
    human = read_human_scores(args.human_csv)
    result = stimuli_sweep(backend, samples, human, runs=args.runs,
                           principle=args.principle, mode=args.mode)
    csv_payload = result.to_csv().encode("utf-8")
    record_artifact(config.out_dir, "sweep.csv", csv_payload, {
        Path(args.human_csv).name: sha256_hex(Path(args.human_csv).read_bytes()),
    })
    figure_path = config.out_dir / "sweep.png"
    render_sweep_figure(result, figure_path)
    record_artifact(config.out_dir, "sweep.png", figure_path.read_bytes(),
                    {"sweep.csv": sha256_hex(csv_payload)})
    print(result.to_csv(), end="")
    print(f"wrote {config.out_dir / 'sweep.csv'} and {figure_path}")
    return 0


def cmd_backends_check(args) -> int:
    config = _load(args)
    backend = make_backend(config)
    capabilities = backend.capabilities()
    print(f"backend: {capabilities.get('backend_id')} "
          f"(protocol {capabilities.get('protocol_version')})")
    print(f"endpoints: {', '.join(capabilities.get('endpoints', ()))}")
    for profile in capabilities.get("profiles", ()):
        languages = ",".join(sorted(profile.get("languages", ())))
        flags = []
        if profile.get("supports_paralinguistics"):
            flags.append("para")
        if profile.get("supports_speaker_embedding"):
            flags.append("spk-emb")
        extra = f" [{' '.join(flags)}]" if flags else ""
        print(f"  {profile.get('model_id'):<14} languages={languages} "
              f"clone#{profile.get('cloning_rank')} "
              f"ctrl#{profile.get('controllability_rank')}{extra}")
    return 0


def cmd_verify(args) -> int:
    config = _load(args)
    problems = verify_chain(config.out_dir)
    if problems:
        for problem in problems:
            print(f"FAIL {problem}")
        return 1
    print(f"manifest chain verified: {config.out_dir}")
    return 0


# --- parser -------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser, seed: bool = True) -> None:
    parser.add_argument("--config", help="path to the pipeline config JSON")
    parser.add_argument("--out", help="output directory (overrides config)")
    if seed:
        parser.add_argument("--seed", type=int, help="mock backend seed override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fablemix",
        description="Training-free audiobook production and evaluation engine.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("demo", help="write a self-contained demo workspace")
    p.add_argument("--out", default="demo", help="workspace directory")
    p.set_defaults(func=cmd_demo)

    p = commands.add_parser("plan", help="run the planner on an instruction file")
    _add_common(p)
    p.add_argument("instruction", help="instruction text file")
    p.set_defaults(func=cmd_plan)

    p = commands.add_parser("synthesize", help="synthesize speech for a plan")
    _add_common(p)
    p.add_argument("--plan", help="plan file (default: <out>/plan.json)")
    p.set_defaults(func=cmd_synthesize)

    p = commands.add_parser("compose", help="compile the cue sheet")
    _add_common(p, seed=False)
    p.add_argument("--plan", help="plan file (default: <out>/plan.json)")
    p.add_argument("--speech", help="speech WAV (default: <out>/speech.wav)")
    p.add_argument("--timing", help="timing file (default: <out>/timing.json)")
    p.add_argument("--lenient-anchors", action="store_true",
                   help="drop unresolvable SFX anchors instead of failing")
    p.set_defaults(func=cmd_compose)

    p = commands.add_parser("mix", help="render the master track")
    _add_common(p)
    p.add_argument("--cues", help="cue sheet (default: <out>/cues.json)")
    p.add_argument("--speech", help="speech WAV (default: <out>/speech.wav)")
    p.add_argument("--parallelism", type=int, help="asset generation threads")
    p.set_defaults(func=cmd_mix)

    p = commands.add_parser("generate", help="full chain: instruction to master WAV")
    _add_common(p)
    p.add_argument("instruction", help="instruction text file")
    p.add_argument("--lenient-anchors", action="store_true",
                   help="drop unresolvable SFX anchors instead of failing")
    p.add_argument("--parallelism", type=int, help="asset generation threads")
    p.set_defaults(func=cmd_generate)

    p = commands.add_parser("evaluate", help="judge one audio file")
    _add_common(p)
    p.add_argument("audio", help="audio file to evaluate")
    p.add_argument("--context", help="text file with transcript/context")
    p.add_argument("--runs", type=int, default=3, help="independent judge runs")
    p.add_argument("--stimulus", default="none",
                   help="stimulus as kind or kind/principle (default none)")
    p.add_argument("--mode", choices=("zero_shot", "one_shot"), default="zero_shot")
    p.add_argument("--reference-example",
                   help="text file with the one-shot calibration example")
    p.set_defaults(func=cmd_evaluate)

    p = commands.add_parser("correlate",
                            help="correlate metric scores against human scores")
    _add_common(p, seed=False)
    p.add_argument("metric_csv", help="CSV: id plus one column per dimension")
    p.add_argument("human_csv", help="CSV: id,rater plus one column per dimension")
    p.set_defaults(func=cmd_correlate)

    p = commands.add_parser("sweep", help="stimulus sweep over an audio set")
    _add_common(p)
    p.add_argument("audio_dir", help="directory of <sample_id>.wav files")
    p.add_argument("human_csv", help="CSV: id,rater plus one column per dimension")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--principle", default="motivation_drive")
    p.add_argument("--mode", choices=("zero_shot", "one_shot"), default="zero_shot")
    p.set_defaults(func=cmd_sweep)

    p = commands.add_parser("backends-check", help="print backend capabilities")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_backends_check)

    p = commands.add_parser("verify", help="re-verify the artifact digest chain")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except BackendError as exc:
        log.error("%s", exc)
        return 3
    except (PlanError, SelectionError) as exc:
        log.error("%s", exc)
        return 4
    except AlignmentError as exc:
        log.error("%s", exc)
        return 5
    except FablemixError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
