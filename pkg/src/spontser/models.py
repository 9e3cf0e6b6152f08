"""Emotion recognizers built from the SVM primitives.

* ``BaselineModel``: one-vs-rest emotion SVM, spontaneity ignored.
* ``HierarchicalModel``: a context-level spontaneity SVM routes each
  utterance to an emotion SVM trained only on scripted or only on
  spontaneous speech.
* ``JointEmotionModel``: a single linear model over the 8
  (spontaneity, emotion) tuples.

All three standardize features with statistics fitted on their training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, MissingBranchData, SingleClass
from .pooling import concat_context, context_matrix
from .svm import (
    KernelSpec,
    TrainConfig,
    predict_joint,
    train_binary,
    train_joint,
    train_multiclass_ovr,
)

BRANCH_NAMES = ("scripted", "spontaneous")

EMOTION_CONFIG = TrainConfig(kernel=KernelSpec("linear"))
SPONT_CONFIG = TrainConfig(kernel=KernelSpec("rbf"))
JOINT_CONFIG = TrainConfig(kernel=KernelSpec("linear"))


def config_echo(cfg):
    return {
        "C": cfg.C,
        "kernel": cfg.kernel.kind,
        "gamma": cfg.kernel.gamma,
        "tolerance": cfg.tolerance,
        "max_passes": cfg.max_passes,
        "seed": cfg.seed,
    }


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X):
        X = np.asarray(X, dtype=np.float64)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(X.mean(axis=0), scale)

    @property
    def dim(self):
        return self.mean.size

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.dim:
            raise DimensionMismatch(f"feature dimension {X.shape[-1]} != model dimension {self.dim}")
        return (X - self.mean) / self.scale


@dataclass(frozen=True)
class LabeledDialog:
    dialog_id: str
    features: np.ndarray  # (n, d), recording order
    spontaneity: int
    emotions: np.ndarray  # (n,)

    def __len__(self):
        return self.features.shape[0]


def stack_dialogs(dialogs):
    X = np.vstack([dlg.features for dlg in dialogs])
    emotions = np.concatenate([dlg.emotions for dlg in dialogs]).astype(np.int64)
    spont = np.concatenate([np.full(len(dlg), dlg.spontaneity) for dlg in dialogs]).astype(np.int64)
    return X, spont, emotions


# -- baseline ----------------------------------------------------------------


@dataclass(frozen=True)
class BaselineModel:
    scaler: Standardizer
    emo_clf: object
    config: dict = field(default_factory=dict)

    kind = "baseline"

    @property
    def d(self):
        return self.scaler.dim

    def predict_emotions(self, X):
        return self.emo_clf.predict_many(self.scaler.transform(np.atleast_2d(X)))


def train_baseline(X, emotions, cfg=EMOTION_CONFIG):
    scaler = Standardizer.fit(X)
    clf = train_multiclass_ovr(scaler.transform(X), emotions, cfg)
    return BaselineModel(scaler, clf, {"emotion": config_echo(cfg)})


def predict_baseline(model, x):
    return int(model.predict_emotions(np.asarray(x).reshape(1, -1))[0])


# -- hierarchical ------------------------------------------------------------


@dataclass(frozen=True)
class HierarchicalModel:
    scaler: Standardizer
    spont_clf: object
    emo_clf_scripted: object
    emo_clf_spontaneous: object
    ell: int = 10
    config: dict = field(default_factory=dict)

    kind = "hierarchical"

    @property
    def d(self):
        return self.scaler.dim

    def branch(self, spont):
        return self.emo_clf_spontaneous if spont == 1 else self.emo_clf_scripted


def train_hierarchical(dialogs, emotion_cfg=EMOTION_CONFIG, spont_cfg=SPONT_CONFIG, ell=10):
    """Fit the spontaneity router on ``ell``-utterance contexts and one emotion SVM per branch.

    The router sees every training utterance as a context anchor, labelled
    with its dialog's spontaneity.
    """
    dialogs = list(dialogs)
    for label, name in enumerate(BRANCH_NAMES):
        branch = [dlg for dlg in dialogs if dlg.spontaneity == label]
        if not branch:
            raise MissingBranchData(name, f"{name}: no training dialogs")
        present = np.unique(np.concatenate([dlg.emotions for dlg in branch]))
        if present.size < 2:
            raise MissingBranchData(name, f"{name}: needs >= 2 emotion classes, found {present.tolist()}")
    X, spont, emotions = stack_dialogs(dialogs)
    scaler = Standardizer.fit(X)
    contexts = np.vstack([context_matrix(scaler.transform(dlg.features), ell) for dlg in dialogs])
    spont_clf = train_binary(contexts, np.where(spont == 1, 1.0, -1.0), spont_cfg)
    Z = scaler.transform(X)
    branches = []
    for label in (0, 1):
        mask = spont == label
        branches.append(train_multiclass_ovr(Z[mask], emotions[mask], replace(emotion_cfg, seed=emotion_cfg.seed + 100 * label)))
    config = {"emotion": config_echo(emotion_cfg), "spontaneity": config_echo(spont_cfg), "ell": ell}
    return HierarchicalModel(scaler, spont_clf, branches[0], branches[1], ell, config)


def predict_hierarchical(model, dialog_features, anchor):
    """Route the anchor utterance through the spontaneity decision.

    Returns ``(emotion, spont_decision)``; the context window covers the
    anchor and up to ``ell - 1`` earlier utterances of the same dialog.
    """
    Z = model.scaler.transform(np.atleast_2d(dialog_features))
    ctx = concat_context(Z, anchor, model.ell).values
    label, _margin = model.spont_clf.predict(ctx)
    spont = 1 if label > 0 else 0
    emotion = model.branch(spont).predict(Z[anchor])
    return int(emotion), spont


def predict_hierarchical_dialog(model, dialog_features):
    """Predict every utterance of one dialog; returns ``(emotions, spont)`` arrays."""
    Z = model.scaler.transform(np.atleast_2d(dialog_features))
    ctx = context_matrix(Z, model.ell)
    spont = (model.spont_clf.decision(ctx) >= 0).astype(np.int64)
    emotions = np.empty(Z.shape[0], dtype=np.int64)
    for label in (0, 1):
        mask = spont == label
        if mask.any():
            emotions[mask] = model.branch(label).predict_many(Z[mask])
    return emotions, spont


# -- joint ---------------------------------------------------------------------


@dataclass(frozen=True)
class JointEmotionModel:
    scaler: Standardizer
    joint: object
    config: dict = field(default_factory=dict)

    kind = "joint"

    @property
    def d(self):
        return self.scaler.dim

    def predict_tuples(self, X):
        rows = self.joint.predict_rows(self.scaler.transform(np.atleast_2d(X)))
        return rows // 4, rows % 4


def train_joint_emotion(X, spont, emotions, cfg=JOINT_CONFIG):
    tuples = np.column_stack([np.asarray(spont), np.asarray(emotions)])
    if np.unique(tuples, axis=0).shape[0] < 2:
        raise SingleClass("only one (spontaneity, emotion) tuple present")
    scaler = Standardizer.fit(X)
    joint = train_joint(scaler.transform(X), tuples, cfg)
    return JointEmotionModel(scaler, joint, {"joint": config_echo(cfg)})


def predict_joint_emotion(model, x):
    """Return ``(emotion, spont_decision)`` from the best-scoring tuple."""
    spont, emotion = predict_joint(model.joint, model.scaler.transform(np.asarray(x, dtype=np.float64).reshape(1, -1)))
    return emotion, spont


def predict_corpus(model, dialogs):
    """Predictions for a list of dialog feature matrices.

    Returns ``(emotions, spont)`` concatenated in dialog order; a baseline
    model has no spontaneity output and yields -1 there.
    """
    emo_parts, spont_parts = [], []
    for feats in dialogs:
        feats = np.atleast_2d(feats)
        if model.kind == "hierarchical":
            e, s = predict_hierarchical_dialog(model, feats)
        elif model.kind == "joint":
            s, e = model.predict_tuples(feats)
        else:
            e = model.predict_emotions(feats)
            s = np.full(e.size, -1)
        emo_parts.append(np.asarray(e, dtype=np.int64))
        spont_parts.append(np.asarray(s, dtype=np.int64))
    if not emo_parts:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(emo_parts), np.concatenate(spont_parts)
