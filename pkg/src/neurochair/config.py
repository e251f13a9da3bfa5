"""Service configuration: one JSON document wiring every pipeline stage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .chair import ChairParams, World, default_world
from .classifier import (
    DEFAULT_RF_MAX_DEPTH,
    DEFAULT_RF_TREES,
    DEFAULT_RIDGE_LAMBDA,
    ModelKind,
)
from .decoder import DecoderConfig
from .dsp import (
    DEFAULT_EPOCH_LEN_S,
    DEFAULT_HOP_S,
    DEFAULT_OVERLAP,
    DEFAULT_SEGMENT_LEN,
)
from .signal_model import (
    Band,
    BandDefinition,
    ChannelDescriptor,
    CommandLabel,
    DEFAULT_BANDS,
    Montage,
    ValidationError,
    default_montage,
)
from .synth import ScenarioSpec, SignatureComponent


def montage_to_dict(m: Montage) -> dict:
    return {"channels": [c.name for c in m.channels],
            "sampling_rate_hz": m.sampling_rate_hz}


def montage_from_dict(doc: dict) -> Montage:
    return Montage(channels=tuple(ChannelDescriptor(n) for n in doc["channels"]),
                   sampling_rate_hz=float(doc["sampling_rate_hz"]))


def bands_to_list(bands: tuple[BandDefinition, ...]) -> list:
    return [[b.name.value, b.low_hz, b.high_hz] for b in bands]


def bands_from_list(items: list) -> tuple[BandDefinition, ...]:
    return tuple(BandDefinition(Band(n), float(lo), float(hi)) for n, lo, hi in items)


def scenario_to_dict(s: ScenarioSpec) -> dict:
    return {
        "seed": s.seed,
        "noise_amplitude_uv": s.noise_amplitude_uv,
        "rhythm_amplitude_uv": s.rhythm_amplitude_uv,
        "mains_hz": s.mains_hz,
        "mains_amplitude_uv": s.mains_amplitude_uv,
        "signatures": {label.label: [[c.channel, c.band.value, c.gain] for c in comps]
                       for label, comps in s.signatures.items()},
        "intent_script": [[label.label, dur] for label, dur in s.intent_script],
    }


def scenario_from_dict(doc: dict) -> ScenarioSpec:
    return ScenarioSpec(
        seed=int(doc["seed"]),
        noise_amplitude_uv=float(doc.get("noise_amplitude_uv", 2.0)),
        rhythm_amplitude_uv=float(doc.get("rhythm_amplitude_uv", 1.0)),
        mains_hz=doc.get("mains_hz"),
        mains_amplitude_uv=float(doc.get("mains_amplitude_uv", 0.0)),
        signatures={
            CommandLabel.from_name(k): tuple(
                SignatureComponent(ch, Band(band), float(gain)) for ch, band, gain in v)
            for k, v in doc.get("signatures", {}).items()
        },
        intent_script=tuple((CommandLabel.from_name(l), float(d))
                            for l, d in doc["intent_script"]),
    )


@dataclass(frozen=True)
class ClassifierConfig:
    kind: ModelKind = ModelKind.LINEAR_DISCRIMINANT
    ridge: float = DEFAULT_RIDGE_LAMBDA
    n_trees: int = DEFAULT_RF_TREES
    max_depth: int = DEFAULT_RF_MAX_DEPTH
    seed: int = 0
    cv_folds: int = 5
    cv_floor: float = 0.85


@dataclass(frozen=True)
class ServiceConfig:
    montage: Montage = field(default_factory=default_montage)
    bands: tuple[BandDefinition, ...] = DEFAULT_BANDS
    bandpass: tuple[float, float] = (0.5, 45.0)
    notch_hz: float | None = None
    epoch_len_s: float = DEFAULT_EPOCH_LEN_S
    hop_s: float = DEFAULT_HOP_S
    segment_len: int = DEFAULT_SEGMENT_LEN
    overlap: float = DEFAULT_OVERLAP
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    chair: ChairParams = field(default_factory=ChairParams)
    chair_step_dt_s: float = 0.05
    world: World = field(default_factory=default_world)
    scenario: ScenarioSpec | None = None
    replay_path: str | None = None
    host: str = "127.0.0.1"
    port: int = 8765
    telemetry_hz: float = 20.0
    realtime: bool = True
    debug_frames: bool = False
    protocol_trials: int = 8
    protocol_trial_duration_s: float = 8.0

    def __post_init__(self):
        nyq = self.montage.nyquist_hz
        lo, hi = self.bandpass
        if not (0 < lo < hi < nyq):
            raise ValidationError(
                f"bandpass [{lo}, {hi}] invalid for Nyquist {nyq} Hz")
        if self.notch_hz is not None and not (0 < self.notch_hz < nyq):
            raise ValidationError(f"notch {self.notch_hz} Hz outside (0, Nyquist)")
        if not (0 < self.hop_s <= self.epoch_len_s):
            raise ValidationError("need 0 < hop_s <= epoch_len_s")
        if self.segment_len > round(self.epoch_len_s * self.montage.sampling_rate_hz):
            raise ValidationError("welch segment_len exceeds epoch length in samples")
        if not (0 < self.telemetry_hz <= 200):
            raise ValidationError(f"telemetry_hz out of range: {self.telemetry_hz}")
        if not (0 < self.chair_step_dt_s <= 0.1):
            raise ValidationError(f"chair step dt must be in (0, 0.1]: {self.chair_step_dt_s}")
        if self.scenario is None and self.replay_path is None:
            raise ValidationError("config needs a source: synth scenario or replay path")
        # every band must at least start below Nyquist
        for b in self.bands:
            if b.low_hz >= nyq:
                raise ValidationError(
                    f"band {b.name.value} starts at {b.low_hz} Hz, above Nyquist {nyq}")

    def to_dict(self) -> dict:
        return {
            "montage": montage_to_dict(self.montage),
            "bands": bands_to_list(self.bands),
            "filters": {"bandpass": list(self.bandpass), "notch_hz": self.notch_hz},
            "epoching": {"epoch_len_s": self.epoch_len_s, "hop_s": self.hop_s},
            "welch": {"segment_len": self.segment_len, "overlap": self.overlap},
            "classifier": {
                "kind": self.classifier.kind.value,
                "ridge": self.classifier.ridge,
                "n_trees": self.classifier.n_trees,
                "max_depth": self.classifier.max_depth,
                "seed": self.classifier.seed,
                "cv_folds": self.classifier.cv_folds,
                "cv_floor": self.classifier.cv_floor,
            },
            "decoder": {
                "threshold": self.decoder.threshold,
                "dwell": self.decoder.dwell,
                "refractory_s": self.decoder.refractory_s,
                "neutral_releases": self.decoder.neutral_releases,
            },
            "chair": {"speed_mps": self.chair.speed_mps,
                      "turn_duration_s": self.chair.turn_duration_s,
                      "step_dt_s": self.chair_step_dt_s},
            "world": self.world.to_dict(),
            "source": ({"synth": scenario_to_dict(self.scenario)}
                       if self.scenario is not None else {"replay": self.replay_path}),
            "listen": {"host": self.host, "port": self.port},
            "telemetry_hz": self.telemetry_hz,
            "realtime": self.realtime,
            "debug_frames": self.debug_frames,
            "protocol": {"trials": self.protocol_trials,
                         "trial_duration_s": self.protocol_trial_duration_s},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ServiceConfig":
        try:
            filters = doc.get("filters", {})
            epoching = doc.get("epoching", {})
            welch = doc.get("welch", {})
            clf = doc.get("classifier", {})
            dec = doc.get("decoder", {})
            chair = doc.get("chair", {})
            listen = doc.get("listen", {})
            source = doc.get("source", {})
            proto = doc.get("protocol", {})
            world_doc = doc.get("world")
            if isinstance(world_doc, dict) and "path" in world_doc:
                world = World.load(world_doc["path"])
            elif isinstance(world_doc, dict):
                world = World.from_dict(world_doc)
            else:
                world = default_world()
            return cls(
                montage=(montage_from_dict(doc["montage"]) if "montage" in doc
                         else default_montage()),
                bands=(bands_from_list(doc["bands"]) if "bands" in doc else DEFAULT_BANDS),
                bandpass=tuple(filters.get("bandpass", (0.5, 45.0))),
                notch_hz=filters.get("notch_hz"),
                epoch_len_s=float(epoching.get("epoch_len_s", DEFAULT_EPOCH_LEN_S)),
                hop_s=float(epoching.get("hop_s", DEFAULT_HOP_S)),
                segment_len=int(welch.get("segment_len", DEFAULT_SEGMENT_LEN)),
                overlap=float(welch.get("overlap", DEFAULT_OVERLAP)),
                classifier=ClassifierConfig(
                    kind=ModelKind(clf.get("kind", "LinearDiscriminant")),
                    ridge=float(clf.get("ridge", DEFAULT_RIDGE_LAMBDA)),
                    n_trees=int(clf.get("n_trees", DEFAULT_RF_TREES)),
                    max_depth=int(clf.get("max_depth", DEFAULT_RF_MAX_DEPTH)),
                    seed=int(clf.get("seed", 0)),
                    cv_folds=int(clf.get("cv_folds", 5)),
                    cv_floor=float(clf.get("cv_floor", 0.85)),
                ),
                decoder=DecoderConfig(
                    threshold=float(dec.get("threshold", 0.6)),
                    dwell=int(dec.get("dwell", 3)),
                    refractory_s=float(dec.get("refractory_s", 1.0)),
                    neutral_releases=bool(dec.get("neutral_releases", True)),
                ),
                chair=ChairParams(speed_mps=float(chair.get("speed_mps", 0.5)),
                                  turn_duration_s=float(chair.get("turn_duration_s", 1.5))),
                chair_step_dt_s=float(chair.get("step_dt_s", 0.05)),
                world=world,
                scenario=(scenario_from_dict(source["synth"]) if "synth" in source else None),
                replay_path=source.get("replay"),
                host=listen.get("host", "127.0.0.1"),
                port=int(listen.get("port", 8765)),
                telemetry_hz=float(doc.get("telemetry_hz", 20.0)),
                realtime=bool(doc.get("realtime", True)),
                debug_frames=bool(doc.get("debug_frames", False)),
                protocol_trials=int(proto.get("trials", 8)),
                protocol_trial_duration_s=float(proto.get("trial_duration_s", 8.0)),
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed service config: {e}") from None

    @classmethod
    def load(cls, path) -> "ServiceConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
