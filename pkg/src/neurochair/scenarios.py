"""Shipped synthetic scenarios with documented signal-to-noise ratios."""

from __future__ import annotations

from .signal_model import Band, CommandLabel
from .synth import ScenarioSpec, SignatureComponent

# Per-class band/channel signatures: each class boosts one rhythm component
# on one or two channels. With gain g the in-band component power rises by
# g^2 over its rest level (rhythm_amplitude_uv RMS = 1 uV -> 1 uV^2 at rest,
# g=3 -> 9 uV^2 active) against a ~2 uV-RMS pink-noise floor, i.e. an in-band
# SNR of roughly 9:1 during intent versus ~1:1 at rest.
ACCEPTANCE_SIGNATURES = {
    CommandLabel.PUSH: (SignatureComponent("F3", Band.BETA, 3.0),
                        SignatureComponent("F4", Band.BETA, 3.0)),
    CommandLabel.PULL: (SignatureComponent("P3", Band.BETA, 3.0),
                        SignatureComponent("P4", Band.BETA, 3.0)),
    CommandLabel.LEFT: (SignatureComponent("C3", Band.ALPHA, 3.0),
                        SignatureComponent("T3", Band.ALPHA, 3.0)),
    CommandLabel.RIGHT: (SignatureComponent("C4", Band.ALPHA, 3.0),
                         SignatureComponent("T4", Band.ALPHA, 3.0)),
}


def training_script(trials_per_class: int = 20, trial_duration_s: float = 8.0):
    """Intent script matching the neutral-first protocol block order."""
    script = []
    for label in CommandLabel:
        script.extend([(label, trial_duration_s)] * trials_per_class)
    return tuple(script)


def acceptance_scenario(seed: int = 42, trials_per_class: int = 20,
                        trial_duration_s: float = 8.0) -> ScenarioSpec:
    """5-class training scenario: 20 trials/class, 8 s trials, documented SNR."""
    return ScenarioSpec(
        seed=seed,
        intent_script=training_script(trials_per_class, trial_duration_s),
        signatures=ACCEPTANCE_SIGNATURES,
        noise_amplitude_uv=2.0,
        rhythm_amplitude_uv=1.0,
    )


def drive_scenario(seed: int = 7, command_s: float = 6.0, rest_s: float = 4.0,
                   sequence: tuple[CommandLabel, ...] = (
                       CommandLabel.PUSH, CommandLabel.RIGHT, CommandLabel.PUSH,
                       CommandLabel.LEFT, CommandLabel.PULL),
                   repeats: int = 1) -> ScenarioSpec:
    """Driving scenario: commands separated by neutral rests, for bench/demo."""
    script = [(CommandLabel.NEUTRAL, rest_s)]
    for _ in range(repeats):
        for label in sequence:
            script.append((label, command_s))
            script.append((CommandLabel.NEUTRAL, rest_s))
    return ScenarioSpec(
        seed=seed,
        intent_script=tuple(script),
        signatures=ACCEPTANCE_SIGNATURES,
        noise_amplitude_uv=2.0,
        rhythm_amplitude_uv=1.0,
    )
