"""Responsiveness and accuracy bench over a ground-truth scenario.

Reports command accuracy against the intent intervals, detection latency,
the dwell-inclusive command latency measured from the prediction log (to be
compared against the analytic epoch_len + (dwell-1)*hop), processing
throughput relative to real time, and collisions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import TrainedModel
from .config import ServiceConfig
from .pipeline import run_offline
from .signal_model import CommandLabel
from .synth import IntentInterval


@dataclass
class BenchReport:
    n_commands: int
    n_correct: int
    command_accuracy: float
    detection_latency_s: dict[str, float]      # issued_at - interval start
    dwell_latency_s: dict[str, float]          # measured from the prediction log
    analytic_dwell_latency_s: float            # epoch_len + (dwell-1)*hop
    processing_latency_s: dict[str, float]     # wall-clock per-epoch processing
    throughput_x_realtime: float
    collisions: int
    stream_duration_s: float
    wall_time_s: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_commands": self.n_commands,
            "n_correct": self.n_correct,
            "command_accuracy": self.command_accuracy,
            "detection_latency_s": self.detection_latency_s,
            "dwell_latency_s": self.dwell_latency_s,
            "analytic_dwell_latency_s": self.analytic_dwell_latency_s,
            "processing_latency_s": self.processing_latency_s,
            "throughput_x_realtime": self.throughput_x_realtime,
            "collisions": self.collisions,
            "stream_duration_s": self.stream_duration_s,
            "wall_time_s": self.wall_time_s,
            **self.extras,
        }

    def text(self) -> str:
        lines = [
            f"commands emitted: {self.n_commands} ({self.n_correct} correct, "
            f"accuracy {self.command_accuracy:.3f})",
            f"detection latency (s): {_fmt_stats(self.detection_latency_s)}",
            f"dwell-inclusive latency (s): {_fmt_stats(self.dwell_latency_s)} "
            f"(analytic {self.analytic_dwell_latency_s:.3f})",
            f"processing latency per epoch (s): {_fmt_stats(self.processing_latency_s)}",
            f"throughput: {self.throughput_x_realtime:.1f}x real-time",
            f"collisions: {self.collisions}",
        ]
        return "\n".join(lines)


def _fmt_stats(stats: dict[str, float]) -> str:
    if not stats:
        return "n/a"
    return ", ".join(f"{k}={v:.3f}" for k, v in stats.items())


def _percentiles(values: list[float]) -> dict[str, float]:
    if not values:
        return {}
    arr = np.asarray(values)
    return {"p50": float(np.percentile(arr, 50)),
            "p90": float(np.percentile(arr, 90)),
            "max": float(arr.max())}


def _interval_at(intervals: tuple[IntentInterval, ...], t: float) -> IntentInterval | None:
    for iv in intervals:
        if iv.t_start <= t < iv.t_end or (iv is intervals[-1] and t >= iv.t_start):
            return iv
    return None


def measure_dwell_latency(predictions, command_msg, config: ServiceConfig) -> float | None:
    """Span from the start of the first epoch in the command's qualifying dwell
    run to its emission time (dwell-inclusive, structural latency)."""
    label = command_msg.payload["source"]
    theta = config.decoder.threshold
    n = config.decoder.dwell
    run = []
    for p in predictions:
        if p.t > command_msg.t + 1e-9:
            break
        conf = max(p.payload["confidences"])
        ok = p.payload["label"] == label and (
            label == "Neutral" or conf >= theta)
        run = run + [p] if ok else []
    if len(run) < n:
        return None
    first = run[-n]
    return command_msg.t - first.payload["t_start"]


def run_bench(config: ServiceConfig, model: TrainedModel) -> BenchReport:
    from .pipeline import source_frames

    rec = source_frames(config)
    result = run_offline(config, model)
    commands = result.commands
    predictions = result.log.by_type("prediction")

    n_correct = 0
    detection, dwell = [], []
    for cmd in commands:
        iv = _interval_at(rec.intervals, cmd.t - 1e-9)
        if iv is not None and iv.label.label == cmd.payload["source"]:
            n_correct += 1
            if iv.label != CommandLabel.NEUTRAL:
                detection.append(cmd.t - iv.t_start)
        dl = measure_dwell_latency(predictions, cmd, config)
        if dl is not None:
            dwell.append(dl)

    analytic = config.epoch_len_s + (config.decoder.dwell - 1) * config.hop_s
    throughput = (result.stream_duration_s / result.wall_time_s
                  if result.wall_time_s > 0 else float("inf"))
    return BenchReport(
        n_commands=len(commands),
        n_correct=n_correct,
        command_accuracy=(n_correct / len(commands)) if commands else 0.0,
        detection_latency_s=_percentiles(detection),
        dwell_latency_s=_percentiles(dwell),
        analytic_dwell_latency_s=analytic,
        processing_latency_s=_percentiles(result.core.processing_times),
        throughput_x_realtime=throughput,
        collisions=result.chair.collisions,
        stream_duration_s=result.stream_duration_s,
        wall_time_s=result.wall_time_s,
    )
