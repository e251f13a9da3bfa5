"""Operator CLI: synth, train, drive, replay, bench.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import signal
import sys

from .bench import run_bench
from .chair import ChairParams  # noqa: F401  (re-exported for config docs)
from .classifier import (
    ModelKind,
    ModelLoadError,
    SessionState,
    TrainingSession,
    cross_validate,
    fit,
    load_model,
    run_protocol,
    save_model,
)
from .config import ServiceConfig, scenario_to_dict
from .dsp import epoch_stream, extract_features
from .pipeline import PipelineCore, run_offline, source_frames
from .scenarios import acceptance_scenario, drive_scenario
from .service import Service, command_sequence, replay_session
from .signal_model import CommandLabel, ValidationError
from .synth import (
    IntentInterval,
    ScenarioSpec,
    SessionRecording,
    generate_recording,
    load_csv,
    write_csv,
)
from .wire import ProtocolError

log = logging.getLogger("neurochair")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _load_config(args) -> ServiceConfig:
    path = args.config or os.environ.get("NEUROCHAIR_CONFIG")
    if path:
        config = ServiceConfig.load(path)
    else:
        config = ServiceConfig(scenario=drive_scenario())
    doc = config.to_dict()
    for item in args.set or []:
        key, _, value = item.partition("=")
        if not _apply_override(doc, key.split("."), value):
            raise ValidationError(f"override references unknown config key: {key!r}")
        config = ServiceConfig.from_dict(doc)
    if args.seed is not None:
        doc = config.to_dict()
        if "synth" in doc.get("source", {}):
            doc["source"]["synth"]["seed"] = args.seed
        doc["classifier"]["seed"] = args.seed
        config = ServiceConfig.from_dict(doc)
    if getattr(args, "listen", None):
        host, _, port = args.listen.rpartition(":")
        doc = config.to_dict()
        doc["listen"] = {"host": host or "127.0.0.1", "port": int(port)}
        config = ServiceConfig.from_dict(doc)
    if getattr(args, "no_realtime", False):
        doc = config.to_dict()
        doc["realtime"] = False
        config = ServiceConfig.from_dict(doc)
    return config


def _apply_override(doc: dict, path: list[str], value: str) -> bool:
    node = doc
    for key in path[:-1]:
        if not isinstance(node, dict) or key not in node:
            return False
        node = node[key]
    if not isinstance(node, dict) or path[-1] not in node:
        return False
    node[path[-1]] = json.loads(value) if value and value[0] in '{["0123456789-tfn' else value
    return True


def _tile_scenario(scenario: ScenarioSpec, duration_s: float) -> ScenarioSpec:
    if duration_s <= 0:
        raise ValidationError(f"duration must be > 0, got {duration_s}")
    script = []
    total = 0.0
    while total < duration_s:
        for label, dur in scenario.intent_script:
            if total >= duration_s:
                break
            dur = min(dur, duration_s - total)
            script.append((label, dur))
            total += dur
    doc = scenario_to_dict(scenario)
    doc["intent_script"] = [[l.label, d] for l, d in script]
    from .config import scenario_from_dict
    return scenario_from_dict(doc)


def cmd_synth(args) -> int:
    config = _load_config(args)
    if config.scenario is None:
        raise ValidationError("synth requires a config with a synth source")
    scenario = config.scenario
    if args.duration is not None:
        scenario = _tile_scenario(scenario, args.duration)
    rec = generate_recording(scenario, config.montage, config.bands)
    out = args.out or "session.csv"
    write_csv(rec, out)
    gt_path = os.path.splitext(out)[0] + ".intents.json"
    with open(gt_path, "w") as fh:
        json.dump([{"label": iv.label.label, "t_start": iv.t_start, "t_end": iv.t_end}
                   for iv in rec.intervals], fh, indent=2)

    counts = _per_class_epoch_counts(rec, config)
    if args.json:
        print(json.dumps({"rows": len(rec.frames), "csv": out,
                          "ground_truth": gt_path, "epochs_per_class": counts}))
    else:
        print(f"wrote {len(rec.frames)} rows to {out} (+ {gt_path})")
        for label, n in counts.items():
            print(f"  {label}: {n} epochs")
    return EXIT_OK


def _per_class_epoch_counts(rec: SessionRecording, config: ServiceConfig) -> dict[str, int]:
    counts = {label.label: 0 for label in CommandLabel}
    for epoch in epoch_stream(rec.frames, config.montage, config.epoch_len_s, config.hop_s):
        for iv in rec.intervals:
            if epoch.t_start >= iv.t_start - 1e-9 and epoch.t_end <= iv.t_end + 1e-9:
                counts[iv.label.label] += 1
                break
    return counts


def _protocol_from_intervals(intervals) -> list[tuple[CommandLabel, int, float]]:
    """Derive a neutral-first protocol from contiguous ground-truth blocks."""
    protocol: list[tuple[CommandLabel, int, float]] = []
    for iv in intervals:
        dur = iv.t_end - iv.t_start
        if protocol and protocol[-1][0] == iv.label and abs(protocol[-1][2] - dur) < 1e-9:
            label, count, d = protocol[-1]
            protocol[-1] = (label, count + 1, d)
        else:
            protocol.append((iv.label, 1, dur))
    present = {p[0] for p in protocol}
    missing = [c.label for c in CommandLabel if c not in present]
    if missing:
        raise ValidationError(f"training data is missing classes: {', '.join(missing)}")
    return protocol


def cmd_train(args) -> int:
    config = _load_config(args)
    if args.data:
        rec = load_csv(args.data, config.montage)
        # the CSV label column merges back-to-back trials of the same class;
        # a sibling .intents.json (as written by synth) keeps trial boundaries
        gt_path = os.path.splitext(args.data)[0] + ".intents.json"
        if os.path.exists(gt_path):
            with open(gt_path) as fh:
                intervals = tuple(
                    IntentInterval(label=CommandLabel.from_name(iv["label"]),
                                   t_start=float(iv["t_start"]),
                                   t_end=float(iv["t_end"]))
                    for iv in json.load(fh))
            rec = SessionRecording(montage=rec.montage, frames=rec.frames,
                                   intervals=intervals)
    else:
        if config.scenario is None:
            raise ValidationError("train requires --data or a synth source in config")
        rec = generate_recording(config.scenario, config.montage, config.bands)
    if not rec.intervals:
        raise ValidationError("training data has no ground-truth labels")

    protocol = _protocol_from_intervals(rec.intervals)
    session = TrainingSession(protocol=protocol)
    core = PipelineCore(config, model=None, publish=lambda *a: None)

    def feature_iter():
        for frame in rec.frames:
            for epoch in core.epocher.push(frame):
                yield extract_features(epoch, config.bands, core.filter_chain,
                                       config.segment_len, config.overlap)

    def cue_logger(label, event, t):
        log.info("cue %s %s at t=%.2fs", label.label, event, t)

    run_protocol(session, feature_iter(), cue_logger)
    assert session.state == SessionState.COMPLETE

    kind = config.classifier.kind
    kwargs = (dict(ridge=config.classifier.ridge) if kind == ModelKind.LINEAR_DISCRIMINANT
              else dict(n_trees=config.classifier.n_trees,
                        max_depth=config.classifier.max_depth))
    model = fit(session, kind, seed=config.classifier.seed,
                channel_names=config.montage.channel_names,
                band_names=[b.name.value for b in config.bands],
                sampling_rate_hz=config.montage.sampling_rate_hz, **kwargs)
    report = cross_validate(session, kind, config.classifier.cv_folds,
                            seed=config.classifier.seed, **kwargs)
    model.training_summary["cv"] = report.to_dict()

    out = args.out or "model.json"
    save_model(model, out)

    if args.json:
        print(json.dumps({"model": out, "kind": kind.value, "cv": report.to_dict()}))
    else:
        print(f"model written to {out} ({kind.value})")
        print(f"cross-validated accuracy: {report.accuracy:.3f} "
              f"(floor {config.classifier.cv_floor})")
        for label, acc in report.per_class_accuracy.items():
            print(f"  {label}: {acc:.3f}")
    if report.accuracy < config.classifier.cv_floor:
        print(f"CV accuracy {report.accuracy:.3f} below floor "
              f"{config.classifier.cv_floor}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_drive(args) -> int:
    config = _load_config(args)
    model = load_model(args.model) if args.model else None
    service = Service(config, model, record_path=args.record)
    service.start()
    print(f"listening on {config.host}:{service.port}", flush=True)

    interrupted = []

    def on_int(signum, frame):
        interrupted.append(signum)
        service.stream_done.set()

    old = signal.signal(signal.SIGINT, on_int)
    try:
        service.run_until_done(timeout=args.duration)
    finally:
        signal.signal(signal.SIGINT, old)
        service.stop()
    print("service stopped", flush=True)
    return EXIT_OK


def cmd_replay(args) -> int:
    messages = replay_session(args.session)
    commands = command_sequence(messages)
    result = {"messages": len(messages), "commands": commands}
    if args.config or os.environ.get("NEUROCHAIR_CONFIG"):
        config = _load_config(args)
        model = load_model(args.model) if args.model else None
        rerun = run_offline(config, model)
        rerun_commands = command_sequence(rerun.log.messages)
        result["rerun_commands"] = rerun_commands
        result["match"] = rerun_commands == commands
    if args.json:
        print(json.dumps(result))
    else:
        print(f"{len(messages)} messages, {len(commands)} commands")
        for seq, cmd, src in commands:
            print(f"  #{seq} {cmd} (source {src})")
        if "match" in result:
            print("re-run matches" if result["match"] else "RE-RUN MISMATCH")
    if result.get("match") is False:
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args)
    if args.model:
        model = load_model(args.model)
    else:
        raise ValidationError("bench requires --model")
    report = run_bench(config, model)
    doc = report.to_dict()
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
    print(json.dumps(doc) if args.json else report.text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="neurochair",
        description="EEG-driven wheelchair pipeline: synthesize, train, drive, "
                    "replay, benchmark.")
    parser.add_argument("--config", help="service config JSON "
                        "(or NEUROCHAIR_CONFIG env var)")
    parser.add_argument("--seed", type=int, help="override scenario/classifier seed")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (dotted path)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("synth", help="generate a synthetic session CSV")
    p.add_argument("--duration", type=float, help="session length in seconds")
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the training protocol and fit a model")
    p.add_argument("--data", help="session CSV with labels (default: config synth source)")
    p.add_argument("--out", help="model output path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("drive", help="serve the live pipeline")
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--listen", metavar="HOST:PORT")
    p.add_argument("--record", help="session log JSONL path")
    p.add_argument("--duration", type=float, help="stop after N seconds")
    p.add_argument("--no-realtime", action="store_true",
                   help="process the source as fast as possible")
    p.set_defaults(func=cmd_drive)

    p = sub.add_parser("replay", help="inspect/verify a recorded session log")
    p.add_argument("session", help="session JSONL log")
    p.add_argument("--model", help="model for deterministic re-run comparison")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="measure accuracy, latency and throughput")
    p.add_argument("--model", help="trained model JSON")
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ProtocolError, ModelLoadError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # pragma: no cover - defensive
        log.exception("runtime failure")
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
