"""Neutral-first training protocol, classifiers, cross-validation, persistence.

Two model kinds: a shared-covariance linear discriminant (closed form, the
default) and a from-scratch random forest (majority vote with vote-fraction
confidences). Both are deterministic given a seed and serialize to versioned
JSON with bit-exact round-trip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dsp import FeatureVector
from .signal_model import CommandLabel, ValidationError

MODEL_SCHEMA_VERSION = 1
CLASSES = tuple(CommandLabel)  # Neutral first, by construction

DEFAULT_RIDGE_LAMBDA = 1e-3
DEFAULT_RF_TREES = 100
DEFAULT_RF_MAX_DEPTH = 8


class ModelKind(Enum):
    LINEAR_DISCRIMINANT = "LinearDiscriminant"
    RANDOM_FOREST = "RandomForest"


class ProtocolError(ValidationError):
    """Training protocol violation or abort."""


class ModelLoadError(ValueError):
    """Model file is corrupt, truncated, or has an unknown schema version."""


class SessionState(Enum):
    IDLE = "Idle"
    RECORDING = "Recording"
    COMPLETE = "Complete"


@dataclass
class TrainingSession:
    """Protocol definition plus per-trial collected feature vectors."""

    protocol: list[tuple[CommandLabel, int, float]]  # (label, trial_count, trial_duration_s)
    collected: dict[CommandLabel, list[list[FeatureVector]]] = field(default_factory=dict)
    state: SessionState = SessionState.IDLE
    recording_label: CommandLabel | None = None

    def __post_init__(self):
        if not self.protocol:
            raise ProtocolError("empty training protocol")
        if self.protocol[0][0] != CommandLabel.NEUTRAL:
            raise ProtocolError(
                f"protocol must start with Neutral, got {self.protocol[0][0].label}"
            )
        labels = [p[0] for p in self.protocol]
        if len(set(labels)) != len(labels):
            raise ProtocolError("duplicate label in protocol")
        if labels != sorted(labels):
            raise ProtocolError(
                "protocol blocks must follow class order Neutral, Push, Pull, Left, Right"
            )
        for label, count, dur in self.protocol:
            if count < 1 or dur <= 0:
                raise ProtocolError(f"invalid trial spec for {label.label}: {count} x {dur}s")


def default_protocol(trials: int = 8, trial_duration_s: float = 8.0
                     ) -> list[tuple[CommandLabel, int, float]]:
    return [(label, trials, trial_duration_s) for label in CLASSES]


def run_protocol(session: TrainingSession, feature_stream, cue_sink=None) -> TrainingSession:
    """Consume a timed feature stream, cueing and recording each trial in order.

    The stream yields FeatureVectors with stream-relative time bounds; trial k
    of the flattened protocol covers [k*dur, (k+1)*dur). A feature belongs to
    a trial iff its epoch lies fully inside the trial's bounds.
    """
    if session.state != SessionState.IDLE:
        raise ProtocolError(f"session must be Idle to run, is {session.state.value}")

    trials: list[tuple[CommandLabel, float, float]] = []
    cursor = 0.0
    for label, count, dur in session.protocol:
        for _ in range(count):
            trials.append((label, cursor, cursor + dur))
            cursor += dur

    def cue(label, event, t):
        if cue_sink is not None:
            cue_sink(label, event, t)

    session.collected = {label: [] for label, _, _ in session.protocol}
    it = iter(feature_stream)
    pending: FeatureVector | None = None
    for label, t0, t1 in trials:
        session.state = SessionState.RECORDING
        session.recording_label = label
        cue(label, "start", t0)
        bucket: list[FeatureVector] = []
        saw_end = False
        while True:
            if pending is not None:
                fv, pending = pending, None
            else:
                try:
                    fv = next(it)
                except StopIteration:
                    break
            if fv.t_end > t1 + 1e-9:
                pending = fv
                saw_end = True
                break
            if fv.t_start >= t0 - 1e-9:
                bucket.append(fv)
        if not saw_end and (not bucket or bucket[-1].t_end < t1 - 0.5):
            session.state = SessionState.IDLE
            session.recording_label = None
            raise ProtocolError(
                f"feature stream ended mid-trial ({label.label} [{t0}, {t1})s); "
                "session aborted with partial data"
            )
        session.collected[label].append(bucket)
        cue(label, "stop", t1)
    session.state = SessionState.COMPLETE
    session.recording_label = None
    return session


def _session_matrix(session: TrainingSession):
    """Flatten a complete session into (X, y, trial_groups, shape)."""
    if session.state != SessionState.COMPLETE:
        raise ProtocolError("session is not Complete")
    X, y, groups = [], [], []
    shape = None
    gid = 0
    for label in sorted(session.collected):
        for trial in session.collected[label]:
            for fv in trial:
                if shape is None:
                    shape = fv.values.shape
                X.append(fv.flat)
                y.append(int(label))
                groups.append(gid)
            gid += 1
    if not X:
        raise ValidationError("session has no feature vectors")
    return np.array(X), np.array(y), np.array(groups), shape


@dataclass(frozen=True)
class Prediction:
    confidences: np.ndarray  # one per class, sums to 1
    label: CommandLabel
    t_start: float
    t_end: float

    def __post_init__(self):
        c = np.asarray(self.confidences, dtype=float)
        if np.any(c < 0) or abs(c.sum() - 1.0) > 1e-9:
            raise ValidationError("confidences must be a probability distribution")
        c.setflags(write=False)
        object.__setattr__(self, "confidences", c)


@dataclass
class TrainedModel:
    kind: ModelKind
    params: dict
    feature_mean: np.ndarray
    feature_std: np.ndarray
    zero_variance_mask: np.ndarray
    classes: tuple[CommandLabel, ...]
    channel_names: list[str]
    band_names: list[str]
    sampling_rate_hz: float
    training_summary: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return int(self.feature_mean.size)


def _normalize_stats(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=0)
    zero = std <= 0
    std = np.where(zero, 1.0, std)
    return mean, std, zero


# ---------------------------------------------------------------- linear discriminant

def _fit_lda(Xz: np.ndarray, y: np.ndarray, ridge: float) -> dict:
    n, d = Xz.shape
    means = np.zeros((len(CLASSES), d))
    pooled = np.zeros((d, d))
    for c in CLASSES:
        xc = Xz[y == int(c)]
        means[int(c)] = xc.mean(axis=0)
        centered = xc - means[int(c)]
        pooled += centered.T @ centered
    cov = pooled / max(1, n - len(CLASSES)) + ridge * np.eye(d)
    precision = np.linalg.inv(cov)
    return {"means": means, "precision": precision, "ridge": ridge}


def _predict_lda(params: dict, xz: np.ndarray) -> np.ndarray:
    means = np.asarray(params["means"])
    precision = np.asarray(params["precision"])
    diffs = xz[None, :] - means
    # equal priors; log-likelihood up to a shared constant
    scores = -0.5 * np.einsum("ci,ij,cj->c", diffs, precision, diffs)
    scores -= scores.max()
    p = np.exp(scores)
    return p / p.sum()


# ---------------------------------------------------------------- random forest

def _gini_best_split(X: np.ndarray, y: np.ndarray, feat_idx: np.ndarray, n_classes: int):
    """Best (feature, threshold) among feat_idx by Gini impurity, or None."""
    n = len(y)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    best = None  # (impurity, feature, threshold)
    for f in feat_idx:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        counts_left = np.cumsum(onehot[order], axis=0)[:-1]  # after i+1 samples left
        n_left = np.arange(1, n)
        n_right = n - n_left
        counts_right = counts_left[-1] + onehot[order][-1] - counts_left
        gini_l = 1.0 - np.sum((counts_left / n_left[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((counts_right / n_right[:, None]) ** 2, axis=1)
        imp = (n_left * gini_l + n_right * gini_r) / n
        valid = xs[1:] > xs[:-1]  # split only between distinct values
        if not np.any(valid):
            continue
        imp = np.where(valid, imp, np.inf)
        i = int(np.argmin(imp))
        if best is None or imp[i] < best[0]:
            thr = 0.5 * (xs[i] + xs[i + 1])
            best = (float(imp[i]), int(f), thr)
    return best


def _grow_tree(X: np.ndarray, y: np.ndarray, rng: np.random.Generator,
               max_depth: int, mtry: int, n_classes: int) -> dict:
    """Recursive CART tree as nested dicts (JSON-serializable)."""

    def node(idx, depth):
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        if depth >= max_depth or len(idx) < 2 or counts.max() == counts.sum():
            return {"leaf": (counts / counts.sum()).tolist()}
        feat_idx = rng.choice(X.shape[1], size=mtry, replace=False)
        best = _gini_best_split(X[idx], y[idx], feat_idx, n_classes)
        if best is None:
            return {"leaf": (counts / counts.sum()).tolist()}
        _, f, thr = best
        left = idx[X[idx, f] <= thr]
        right = idx[X[idx, f] > thr]
        return {"f": f, "thr": thr,
                "l": node(left, depth + 1), "r": node(right, depth + 1)}

    return node(np.arange(len(y)), 0)


def _tree_vote(tree: dict, x: np.ndarray) -> np.ndarray:
    while "leaf" not in tree:
        tree = tree["l"] if x[tree["f"]] <= tree["thr"] else tree["r"]
    leaf = np.asarray(tree["leaf"])
    out = np.zeros_like(leaf)
    out[int(np.argmax(leaf))] = 1.0  # hard majority vote per tree
    return out


def _fit_rf(Xz: np.ndarray, y: np.ndarray, seed: int, n_trees: int,
            max_depth: int) -> dict:
    rng = np.random.default_rng(seed)
    n, d = Xz.shape
    mtry = max(1, int(round(math.sqrt(d))))
    trees = []
    for _ in range(n_trees):
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(Xz[boot], y[boot], rng, max_depth, mtry, len(CLASSES)))
    return {"trees": trees, "seed": seed, "n_trees": n_trees,
            "max_depth": max_depth, "mtry": mtry}


def _predict_rf(params: dict, xz: np.ndarray) -> np.ndarray:
    votes = np.zeros(len(CLASSES))
    for tree in params["trees"]:
        votes += _tree_vote(tree, xz)
    return votes / votes.sum()


# ---------------------------------------------------------------- public API

def fit(session: TrainingSession, kind: ModelKind = ModelKind.LINEAR_DISCRIMINANT,
        seed: int = 0, ridge: float = DEFAULT_RIDGE_LAMBDA,
        n_trees: int = DEFAULT_RF_TREES, max_depth: int = DEFAULT_RF_MAX_DEPTH,
        channel_names: list[str] | None = None, band_names: list[str] | None = None,
        sampling_rate_hz: float = 0.0) -> TrainedModel:
    X, y, groups, shape = _session_matrix(session)
    for c in CLASSES:
        if np.sum(y == int(c)) < 2:
            raise ValidationError(
                f"class {c.label} has fewer than 2 feature vectors; model underdetermined"
            )
    mean, std, zero = _normalize_stats(X)
    Xz = (X - mean) / std
    if kind == ModelKind.LINEAR_DISCRIMINANT:
        params = _fit_lda(Xz, y, ridge)
    else:
        params = _fit_rf(Xz, y, seed, n_trees, max_depth)
    model = TrainedModel(
        kind=kind, params=params, feature_mean=mean, feature_std=std,
        zero_variance_mask=zero, classes=CLASSES,
        channel_names=channel_names or [f"ch{i}" for i in range(shape[0])],
        band_names=band_names or [f"band{i}" for i in range(shape[1])],
        sampling_rate_hz=sampling_rate_hz,
        training_summary={
            "per_class_trials": {c.label: len(session.collected.get(c, []))
                                 for c in CLASSES},
            "per_class_samples": {c.label: int(np.sum(y == int(c))) for c in CLASSES},
        },
    )
    return model


def predict(model: TrainedModel, features: FeatureVector) -> Prediction:
    x = features.flat
    if x.size != model.n_features:
        raise ValidationError(
            f"feature dimension {x.size} does not match model ({model.n_features})"
        )
    xz = (x - model.feature_mean) / model.feature_std
    if model.kind == ModelKind.LINEAR_DISCRIMINANT:
        conf = _predict_lda(model.params, xz)
    else:
        conf = _predict_rf(model.params, xz)
    conf = conf / conf.sum()
    return Prediction(confidences=conf, label=CommandLabel(int(np.argmax(conf))),
                      t_start=features.t_start, t_end=features.t_end)


def _predict_matrix(model: TrainedModel, Xz: np.ndarray) -> np.ndarray:
    if model.kind == ModelKind.LINEAR_DISCRIMINANT:
        return np.array([np.argmax(_predict_lda(model.params, x)) for x in Xz])
    return np.array([np.argmax(_predict_rf(model.params, x)) for x in Xz])


@dataclass(frozen=True)
class CVReport:
    accuracy: float
    per_class_accuracy: dict[str, float]
    confusion: np.ndarray  # rows true, columns predicted
    k_folds: int

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy,
                "per_class_accuracy": self.per_class_accuracy,
                "confusion": self.confusion.tolist(), "k_folds": self.k_folds}


def cross_validate(session: TrainingSession, kind: ModelKind, k_folds: int = 5,
                   seed: int = 0, **fit_kwargs) -> CVReport:
    """Stratified, trial-grouped k-fold CV: no trial's epochs span folds."""
    if k_folds < 2:
        raise ValidationError(f"k_folds must be >= 2, got {k_folds}")
    X, y, groups, _ = _session_matrix(session)
    rng = np.random.default_rng(seed)

    fold_of_group: dict[int, int] = {}
    for c in CLASSES:
        class_groups = np.unique(groups[y == int(c)])
        if len(class_groups) < k_folds:
            raise ValidationError(
                f"class {c.label} has {len(class_groups)} trials, fewer than "
                f"{k_folds} folds"
            )
        perm = rng.permutation(class_groups)
        for i, g in enumerate(perm):
            fold_of_group[int(g)] = i % k_folds

    folds = np.array([fold_of_group[int(g)] for g in groups])
    n_classes = len(CLASSES)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    for k in range(k_folds):
        train, test = folds != k, folds == k
        assert not np.any(train & test)
        sub = TrainingSession(protocol=session.protocol)
        sub.state = SessionState.COMPLETE
        sub.collected = _rebuild_collected(X[train], y[train], groups[train])
        model = fit(sub, kind, seed=seed, **fit_kwargs)
        Xz = (X[test] - model.feature_mean) / model.feature_std
        pred = _predict_matrix(model, Xz)
        for t, p in zip(y[test], pred):
            confusion[t, p] += 1
    correct = np.trace(confusion)
    per_class = {}
    for c in CLASSES:
        row = confusion[int(c)]
        per_class[c.label] = float(row[int(c)] / row.sum()) if row.sum() else 0.0
    return CVReport(accuracy=float(correct / confusion.sum()),
                    per_class_accuracy=per_class, confusion=confusion, k_folds=k_folds)


def _rebuild_collected(X, y, groups):
    collected: dict[CommandLabel, list[list[FeatureVector]]] = {c: [] for c in CLASSES}
    d = X.shape[1]
    for g in np.unique(groups):
        idx = np.where(groups == g)[0]
        label = CommandLabel(int(y[idx[0]]))
        trial = [FeatureVector(values=X[i].reshape(1, d), t_start=0.0, t_end=0.0)
                 for i in idx]
        collected[label].append(trial)
    return collected


# ---------------------------------------------------------------- persistence

def save_model(model: TrainedModel, path) -> None:
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": model.kind.value,
        "params": _params_to_json(model),
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "zero_variance_mask": model.zero_variance_mask.astype(bool).tolist(),
        "classes": [c.label for c in model.classes],
        "channel_names": model.channel_names,
        "band_names": model.band_names,
        "sampling_rate_hz": model.sampling_rate_hz,
        "training_summary": model.training_summary,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)  # floats via repr: shortest exact round-trip


def _params_to_json(model: TrainedModel) -> dict:
    if model.kind == ModelKind.LINEAR_DISCRIMINANT:
        p = model.params
        return {"means": np.asarray(p["means"]).tolist(),
                "precision": np.asarray(p["precision"]).tolist(),
                "ridge": p["ridge"]}
    return model.params  # trees are already plain dicts/lists


def load_model(path) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelLoadError(f"{path}: corrupt model file ({e})") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != MODEL_SCHEMA_VERSION:
        raise ModelLoadError(
            f"{path}: unsupported schema version {doc.get('schema_version')!r}"
            if isinstance(doc, dict) else f"{path}: not a model document"
        )
    try:
        kind = ModelKind(doc["kind"])
        params = doc["params"]
        if kind == ModelKind.LINEAR_DISCRIMINANT:
            params = {"means": np.array(params["means"]),
                      "precision": np.array(params["precision"]),
                      "ridge": params["ridge"]}
        classes = tuple(CommandLabel.from_name(c) for c in doc["classes"])
        if classes != CLASSES:
            raise ModelLoadError(f"{path}: unexpected class list {doc['classes']}")
        return TrainedModel(
            kind=kind, params=params,
            feature_mean=np.array(doc["feature_mean"]),
            feature_std=np.array(doc["feature_std"]),
            zero_variance_mask=np.array(doc["zero_variance_mask"], dtype=bool),
            classes=classes,
            channel_names=doc["channel_names"],
            band_names=doc["band_names"],
            sampling_rate_hz=doc["sampling_rate_hz"],
            training_summary=doc.get("training_summary", {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ModelLoadError):
            raise
        raise ModelLoadError(f"{path}: malformed model document ({e})") from None
