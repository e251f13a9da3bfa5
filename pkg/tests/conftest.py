import numpy as np
import pytest

from neurochair.classifier import ModelKind, TrainingSession, fit, run_protocol
from neurochair.cli import _protocol_from_intervals
from neurochair.config import ServiceConfig
from neurochair.dsp import extract_features
from neurochair.pipeline import PipelineCore
from neurochair.scenarios import acceptance_scenario, drive_scenario
from neurochair.signal_model import default_montage
from neurochair.synth import generate_recording


@pytest.fixture(scope="session")
def montage():
    return default_montage()


def extract_session(config, rec):
    """Run the neutral-first protocol headlessly over a labeled recording."""
    core = PipelineCore(config, model=None, publish=lambda *a: None)

    def feats():
        for frame in rec.frames:
            for epoch in core.epocher.push(frame):
                yield extract_features(epoch, config.bands, core.filter_chain,
                                       config.segment_len, config.overlap)

    session = TrainingSession(protocol=_protocol_from_intervals(rec.intervals))
    return run_protocol(session, feats())


@pytest.fixture(scope="session")
def small_training_session():
    """5 trials/class at 8 s: enough for 5-fold trial-grouped CV, fast."""
    scenario = acceptance_scenario(seed=11, trials_per_class=5)
    config = ServiceConfig(scenario=scenario)
    rec = generate_recording(scenario, config.montage, config.bands)
    return extract_session(config, rec)


@pytest.fixture(scope="session")
def lda_model(small_training_session):
    return fit(small_training_session, ModelKind.LINEAR_DISCRIMINANT,
               channel_names=default_montage().channel_names,
               band_names=["Delta", "Theta", "Alpha", "Beta", "Gamma"],
               sampling_rate_hz=128.0)


@pytest.fixture(scope="session")
def drive_config():
    return ServiceConfig(scenario=drive_scenario(), realtime=False)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
