import json

import numpy as np
import pytest

from neurochair.classifier import (
    ModelKind,
    ModelLoadError,
    ProtocolError,
    SessionState,
    TrainingSession,
    cross_validate,
    default_protocol,
    fit,
    load_model,
    predict,
    run_protocol,
    save_model,
)
from neurochair.dsp import FeatureVector
from neurochair.signal_model import CommandLabel, ValidationError

D = 6  # features per vector in synthetic blob sessions


def fv(values, t0=0.0, t1=1.0):
    return FeatureVector(values=np.asarray(values, dtype=float).reshape(1, -1),
                         t_start=t0, t_end=t1)


def blob_session(rng, n_trials=5, per_trial=6, sigma=0.05, spread=10.0):
    """Well-separated Gaussian blobs, >= 10 sigma apart, grouped into trials."""
    centers = {c: rng.normal(0, 1, size=D) + spread * int(c) * np.eye(D)[int(c) % D]
               for c in CommandLabel}
    session = TrainingSession(protocol=[(c, n_trials, 1.0) for c in CommandLabel])
    session.collected = {c: [] for c in CommandLabel}
    for c in CommandLabel:
        for _ in range(n_trials):
            session.collected[c].append(
                [fv(centers[c] + rng.normal(0, sigma, size=D)) for _ in range(per_trial)])
    session.state = SessionState.COMPLETE
    return session, centers


def timed_feature_stream(total_s, epoch_len=1.0, hop=0.25, dim=D):
    t = 0.0
    while t + epoch_len <= total_s + 1e-9:
        yield fv(np.full(dim, t), t0=t, t1=t + epoch_len)
        t += hop


# ----------------------------------------------------------------- protocol

def test_protocol_must_start_with_neutral():
    with pytest.raises(ProtocolError):
        TrainingSession(protocol=[(CommandLabel.PUSH, 4, 8.0)])


def test_full_protocol_populates_five_classes():
    session = TrainingSession(protocol=default_protocol(trials=4, trial_duration_s=8.0))
    stream = timed_feature_stream(5 * 4 * 8.0)
    run_protocol(session, stream)
    assert session.state == SessionState.COMPLETE
    assert set(session.collected) == set(CommandLabel)
    assert all(len(trials) == 4 for trials in session.collected.values())


def test_trial_yields_29_epochs_at_default_windowing():
    session = TrainingSession(protocol=default_protocol(trials=2, trial_duration_s=8.0))
    run_protocol(session, timed_feature_stream(5 * 2 * 8.0))
    for trials in session.collected.values():
        assert [len(t) for t in trials] == [29, 29]  # floor((8-1)/0.25)+1


def test_stream_ending_mid_trial_aborts():
    session = TrainingSession(protocol=default_protocol(trials=4, trial_duration_s=8.0))
    with pytest.raises(ProtocolError, match="mid-trial"):
        run_protocol(session, timed_feature_stream(40.0))  # only 1.25 of 5 blocks
    assert session.state == SessionState.IDLE


def test_cues_emitted_in_neutral_first_order():
    session = TrainingSession(protocol=default_protocol(trials=1, trial_duration_s=4.0))
    cues = []
    run_protocol(session, timed_feature_stream(20.0),
                 cue_sink=lambda label, event, t: cues.append((label.label, event)))
    starts = [label for label, event in cues if event == "start"]
    assert starts == ["Neutral", "Push", "Pull", "Left", "Right"]


# ---------------------------------------------------------------------- fit

def test_degenerate_separable_case_perfect_training_accuracy(rng):
    session, centers = blob_session(rng, sigma=0.0)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    for c, center in centers.items():
        assert predict(model, fv(center)).label == c


def test_lda_matches_nearest_centroid_oracle(rng):
    session, centers = blob_session(rng)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    mean_of = {c: np.mean([f.flat for trial in session.collected[c] for f in trial],
                          axis=0) for c in CommandLabel}
    # the oracle is only unambiguous close to a centroid, so probe there
    for c in CommandLabel:
        x = mean_of[c] + rng.normal(0, 0.01, size=D)
        oracle = min(CommandLabel, key=lambda k: np.linalg.norm(x - mean_of[k]))
        assert predict(model, fv(x)).label == oracle == c


def test_rf_separable(rng):
    session, centers = blob_session(rng)
    model = fit(session, ModelKind.RANDOM_FOREST, seed=1, n_trees=20)
    for c, center in centers.items():
        assert predict(model, fv(center)).label == c


def test_fit_rejects_class_with_too_few_samples(rng):
    session, _ = blob_session(rng)
    session.collected[CommandLabel.RIGHT] = [[fv(np.zeros(D))]]
    with pytest.raises(ValidationError, match="Right"):
        fit(session, ModelKind.LINEAR_DISCRIMINANT)


def test_zero_variance_features_flagged(rng):
    session, _ = blob_session(rng)
    for trials in session.collected.values():
        for trial in trials:
            for i, f in enumerate(trial):
                v = f.values.copy()
                v[0, 0] = 7.0  # constant feature
                trial[i] = FeatureVector(values=v, t_start=f.t_start, t_end=f.t_end)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    assert model.zero_variance_mask[0]
    assert model.feature_std[0] == 1.0


# ------------------------------------------------------------------ predict

def test_confidences_sum_to_one(rng, lda_model):
    for _ in range(20):
        x = rng.normal(0, 50, size=lda_model.n_features)
        p = predict(lda_model, fv(x))
        assert abs(p.confidences.sum() - 1.0) <= 1e-9
        assert np.all(p.confidences >= 0)


def test_predict_far_outside_training_support(rng):
    session, _ = blob_session(rng)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    p = predict(model, fv(np.full(D, 1e6)))
    assert abs(p.confidences.sum() - 1.0) <= 1e-9


def test_predict_dimension_mismatch(rng):
    session, _ = blob_session(rng)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    with pytest.raises(ValidationError):
        predict(model, fv(np.zeros(D + 1)))


def test_uniform_amplitude_shift_leaves_lda_decisions_unchanged(rng):
    """A constant shift applied at train and test time (the log-power effect
    of uniform amplitude scaling) does not change argmax decisions."""
    session, _ = blob_session(rng)
    model_a = fit(session, ModelKind.LINEAR_DISCRIMINANT)

    shifted = TrainingSession(protocol=session.protocol)
    shifted.collected = {
        c: [[FeatureVector(values=f.values + 2.0, t_start=f.t_start, t_end=f.t_end)
             for f in trial] for trial in trials]
        for c, trials in session.collected.items()}
    shifted.state = SessionState.COMPLETE
    model_b = fit(shifted, ModelKind.LINEAR_DISCRIMINANT)

    for _ in range(50):
        x = rng.normal(0, 5, size=D)
        assert (predict(model_a, fv(x)).label
                == predict(model_b, fv(x + 2.0)).label)


def test_rf_deterministic_given_seed(rng):
    session, _ = blob_session(rng)
    m1 = fit(session, ModelKind.RANDOM_FOREST, seed=7, n_trees=10)
    m2 = fit(session, ModelKind.RANDOM_FOREST, seed=7, n_trees=10)
    assert json.dumps(m1.params) == json.dumps(m2.params)


# ----------------------------------------------------------- cross-validate

def test_cv_perfectly_separable(rng):
    session, _ = blob_session(rng)
    report = cross_validate(session, ModelKind.LINEAR_DISCRIMINANT, 5)
    assert report.accuracy == 1.0


def test_cv_shuffled_labels_near_chance(rng):
    """Permutation test over 20 repetitions: shuffled labels -> ~0.2."""
    accs = []
    for rep in range(20):
        r = np.random.default_rng(100 + rep)
        session, _ = blob_session(r)
        # pool all trials and reassign labels randomly, keeping group structure
        all_trials = [t for c in CommandLabel for t in session.collected[c]]
        perm = r.permutation(len(all_trials))
        session.collected = {c: [] for c in CommandLabel}
        for i, j in enumerate(perm):
            session.collected[CommandLabel(i % 5)].append(all_trials[j])
        accs.append(cross_validate(session, ModelKind.LINEAR_DISCRIMINANT, 5,
                                   seed=rep).accuracy)
    assert abs(np.mean(accs) - 0.2) <= 0.1


def test_cv_k1_rejected(rng):
    session, _ = blob_session(rng)
    with pytest.raises(ValidationError):
        cross_validate(session, ModelKind.LINEAR_DISCRIMINANT, 1)


def test_cv_fewer_trials_than_folds_rejected(rng):
    session, _ = blob_session(rng, n_trials=3)
    with pytest.raises(ValidationError):
        cross_validate(session, ModelKind.LINEAR_DISCRIMINANT, 5)


def test_cv_no_group_leakage(rng, monkeypatch):
    """Every trial's epochs land in exactly one fold."""
    import neurochair.classifier as clf
    session, _ = blob_session(rng)
    seen_folds: list[np.ndarray] = []
    orig = clf._rebuild_collected

    def spy(X, y, groups):
        seen_folds.append(set(map(int, np.unique(groups))))
        return orig(X, y, groups)

    monkeypatch.setattr(clf, "_rebuild_collected", spy)
    cross_validate(session, ModelKind.LINEAR_DISCRIMINANT, 5)
    all_groups = set().union(*seen_folds)
    for train_groups in seen_folds:
        held_out = all_groups - train_groups
        assert held_out  # each fold holds out whole trials
        assert held_out.isdisjoint(train_groups)


# -------------------------------------------------------------- persistence

def test_save_load_round_trip_bit_identical(tmp_path, rng):
    session, _ = blob_session(rng)
    for kind in ModelKind:
        model = fit(session, kind, seed=3, n_trees=10)
        path = tmp_path / f"{kind.value}.json"
        save_model(model, path)
        loaded = load_model(path)
        for _ in range(100):
            x = rng.normal(0, 5, size=D)
            p1, p2 = predict(model, fv(x)), predict(loaded, fv(x))
            assert np.array_equal(p1.confidences, p2.confidences)
            assert p1.label == p2.label


def test_load_truncated_file(tmp_path, rng):
    session, _ = blob_session(rng)
    model = fit(session, ModelKind.LINEAR_DISCRIMINANT)
    path = tmp_path / "m.json"
    save_model(model, path)
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(ModelLoadError):
        load_model(path)


def test_load_wrong_schema_version(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(ModelLoadError):
        load_model(path)
