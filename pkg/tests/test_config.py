import dataclasses

import pytest

from neurochair.chair import Rect, World
from neurochair.config import ClassifierConfig, ServiceConfig
from neurochair.scenarios import acceptance_scenario, drive_scenario
from neurochair.signal_model import ValidationError


def base_config(**kw):
    return ServiceConfig(scenario=drive_scenario(), **kw)


def test_round_trip_through_dict():
    cfg = base_config(notch_hz=50.0, telemetry_hz=10.0,
                      world=World(bounds=Rect(-3, -3, 3, 3),
                                  obstacles=(Rect(1, 1, 2, 2),)))
    assert ServiceConfig.from_dict(cfg.to_dict()) == cfg


def test_round_trip_through_file(tmp_path):
    cfg = base_config(protocol_trials=4, protocol_trial_duration_s=6.0)
    p = tmp_path / "config.json"
    cfg.save(p)
    assert ServiceConfig.load(p) == cfg


def test_scenario_survives_round_trip():
    cfg = ServiceConfig(scenario=acceptance_scenario(seed=9, trials_per_class=3))
    again = ServiceConfig.from_dict(cfg.to_dict())
    assert again.scenario == cfg.scenario


def test_requires_a_source():
    with pytest.raises(ValidationError, match="source"):
        ServiceConfig()


def test_bandpass_must_fit_under_nyquist():
    with pytest.raises(ValidationError):
        base_config(bandpass=(0.5, 64.0))
    with pytest.raises(ValidationError):
        base_config(bandpass=(45.0, 0.5))


def test_hop_and_segment_validated():
    with pytest.raises(ValidationError):
        base_config(hop_s=2.0, epoch_len_s=1.0)
    with pytest.raises(ValidationError):
        base_config(segment_len=256, epoch_len_s=1.0)  # 256 > 128 samples


def test_telemetry_and_chair_dt_ranges():
    with pytest.raises(ValidationError):
        base_config(telemetry_hz=0)
    with pytest.raises(ValidationError):
        base_config(chair_step_dt_s=0.5)


def test_notch_above_nyquist_rejected():
    with pytest.raises(ValidationError):
        base_config(notch_hz=70.0)


def test_malformed_document_rejected():
    with pytest.raises(ValidationError):
        ServiceConfig.from_dict({"montage": {"channels": ["C3"]}})  # missing rate


def test_world_from_inline_dict():
    doc = base_config().to_dict()
    doc["world"] = {"bounds": [-2, -2, 2, 2], "obstacles": [[0, 0, 1, 1]],
                    "footprint_radius": 0.2}
    cfg = ServiceConfig.from_dict(doc)
    assert cfg.world.obstacles == (Rect(0, 0, 1, 1),)


def test_world_from_path(tmp_path):
    wp = tmp_path / "world.json"
    wp.write_text('{"bounds": [-4, -4, 4, 4], "obstacles": []}')
    doc = base_config().to_dict()
    doc["world"] = {"path": str(wp)}
    cfg = ServiceConfig.from_dict(doc)
    assert cfg.world.bounds == Rect(-4, -4, 4, 4)


def test_defaults_are_spec_values():
    cfg = base_config()
    assert cfg.montage.sampling_rate_hz == 128.0
    assert cfg.bandpass == (0.5, 45.0)
    assert (cfg.epoch_len_s, cfg.hop_s) == (1.0, 0.25)
    assert (cfg.segment_len, cfg.overlap) == (64, 0.5)
    assert cfg.decoder.threshold == 0.6
    assert cfg.decoder.dwell == 3
    assert cfg.decoder.refractory_s == 1.0
    assert cfg.chair.speed_mps == 0.5
    assert cfg.chair.turn_duration_s == 1.5
    assert ClassifierConfig().cv_floor == 0.85
