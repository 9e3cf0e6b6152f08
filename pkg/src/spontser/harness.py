"""Experiment drivers: splits, accuracy reports, context sweeps and LLD ablations."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadConfig, DegenerateSplit, EmptyFeature, LengthMismatch, UnknownDescriptor
from .lld import DESCRIPTOR_GROUPS, descriptor_group
from .models import (
    EMOTION_CONFIG,
    JOINT_CONFIG,
    SPONT_CONFIG,
    Standardizer,
    predict_corpus,
    stack_dialogs,
    train_baseline,
    train_hierarchical,
    train_joint_emotion,
)
from .pooling import context_matrix, track_slices
from .svm import train_binary

ABLATION_MODES = ("drop_base_and_delta", "drop_base_keep_delta")


@dataclass(frozen=True)
class SplitSpec:
    scheme: str = "by_session_holdout"
    holdout_session: str | None = None  # None -> last session id in sorted order
    fraction: float = 0.2
    seed: int = 0

    def validate(self):
        if self.scheme not in ("by_session_holdout", "random_by_dialog"):
            raise BadConfig(f"unknown split scheme {self.scheme!r}")
        if not 0.0 < self.fraction < 1.0:
            raise BadConfig(f"split fraction must lie in (0, 1) (got {self.fraction})")
        return self


def split_corpus(corpus, spec=SplitSpec()):
    """Dialog-atomic train/test split; both parts keep corpus order."""
    spec.validate()
    dialogs = corpus.dialogs()
    ids = list(dialogs)
    if spec.scheme == "by_session_holdout":
        sessions = sorted({u.session_id for u in corpus})
        if not sessions:
            raise DegenerateSplit("corpus is empty")
        held = spec.holdout_session if spec.holdout_session is not None else sessions[-1]
        test_ids = {d for d in ids if dialogs[d][0].session_id == held}
    else:
        if len(ids) < 2:
            raise DegenerateSplit(f"cannot split {len(ids)} dialog(s) into two nonempty parts")
        n_test = int(np.floor(spec.fraction * len(ids) + 0.5))
        n_test = min(max(n_test, 1), len(ids) - 1)
        perm = np.random.default_rng(spec.seed).permutation(len(ids))
        test_ids = {ids[i] for i in perm[:n_test]}
    train_ids = [d for d in ids if d not in test_ids]
    if not train_ids or not test_ids:
        raise DegenerateSplit(f"split leaves {len(train_ids)} train and {len(test_ids)} test dialogs")
    return corpus.subset(train_ids), corpus.subset(test_ids)


# -- metrics -------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    overall_accuracy: float
    per_class_accuracy: tuple  # None where a class has no test samples
    spont_accuracy: float | None
    scripted_accuracy: float | None
    confusion: np.ndarray  # rows truth, columns prediction
    n_test: int

    def rows(self):
        out = [("overall_accuracy", self.overall_accuracy)]
        out += [(f"class_{c}_accuracy", acc) for c, acc in enumerate(self.per_class_accuracy)]
        out += [("spont_accuracy", self.spont_accuracy), ("scripted_accuracy", self.scripted_accuracy)]
        out.append(("n_test", self.n_test))
        for i in range(4):
            for j in range(4):
                out.append((f"confusion_{i}_{j}", int(self.confusion[i, j])))
        return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6f}"


def evaluate(predictions, truth):
    """Accuracy report for emotion predictions against ground-truth utterances."""
    pred = np.asarray(predictions, dtype=np.int64).reshape(-1)
    truth = list(truth)
    if pred.size != len(truth):
        raise LengthMismatch(f"{pred.size} predictions for {len(truth)} utterances")
    if not truth:
        raise LengthMismatch("no test utterances")
    true_e = np.array([u.emotion for u in truth], dtype=np.int64)
    spont = np.array([u.spontaneity for u in truth], dtype=np.int64)
    confusion = np.zeros((4, 4), dtype=np.int64)
    np.add.at(confusion, (true_e, pred), 1)
    row_sums = confusion.sum(axis=1)
    per_class = tuple(float(confusion[c, c] / row_sums[c]) if row_sums[c] else None for c in range(4))
    correct = pred == true_e

    def part(mask):
        return float(correct[mask].mean()) if mask.any() else None

    return EvalReport(
        overall_accuracy=float(np.trace(confusion) / pred.size),
        per_class_accuracy=per_class,
        spont_accuracy=part(spont == 1),
        scripted_accuracy=part(spont == 0),
        confusion=confusion,
        n_test=int(pred.size),
    )


def eval_csv_text(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for name, value in report.rows():
        w.writerow([name, _fmt(value)])
    return buf.getvalue()


# -- spontaneity experiments ---------------------------------------------------


def spontaneity_accuracy(train, test, ell=1, cfg=SPONT_CONFIG, columns=None):
    """Train the context-level spontaneity SVM on ``train`` and score every test anchor."""

    def pick(X):
        return X if columns is None else X[:, columns]

    X_train = np.vstack([pick(d.features) for d in train])
    scaler = Standardizer.fit(X_train)
    ctx = np.vstack([context_matrix(scaler.transform(pick(d.features)), ell) for d in train])
    y = np.concatenate([np.full(len(d), 1.0 if d.spontaneity else -1.0) for d in train])
    clf = train_binary(ctx, y, cfg)
    hits = total = 0
    for d in test:
        margins = clf.decision(context_matrix(scaler.transform(pick(d.features)), ell))
        hits += int(np.sum((margins >= 0) == bool(d.spontaneity)))
        total += len(d)
    return hits / total


def context_sweep(train, test, ell_values, cfg=SPONT_CONFIG):
    """Spontaneity accuracy for each context length; rows ``(ell, accuracy)`` sorted by ell."""
    ell_values = sorted(set(int(v) for v in ell_values))
    if not ell_values:
        raise BadConfig("ell_values is empty")
    return [(ell, spontaneity_accuracy(train, test, ell, cfg)) for ell in ell_values]


def sweep_csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["ell", "accuracy"])
    for ell, acc in rows:
        w.writerow([ell, f"{acc:.6f}"])
    return buf.getvalue()


def ablation_columns(descriptor_names, excluded, mode):
    """Pooled-feature columns kept when dropping the descriptor groups in ``excluded``."""
    if mode not in ABLATION_MODES:
        raise BadConfig(f"unknown ablation mode {mode!r}")
    unknown = sorted(set(excluded) - set(DESCRIPTOR_GROUPS))
    if unknown:
        raise UnknownDescriptor(f"unknown descriptor(s) {unknown}; choose from {list(DESCRIPTOR_GROUPS)}")
    dropped = set()
    for name, (base, de) in track_slices(descriptor_names).items():
        if descriptor_group(name) in excluded:
            dropped.update(base)
            if mode == "drop_base_and_delta":
                dropped.update(de)
    total = 24 * len(descriptor_names)
    keep = np.array([c for c in range(total) if c not in dropped], dtype=np.int64)
    if keep.size == 0:
        raise EmptyFeature("every feature track was excluded")
    return keep


def exclusion_label(excluded):
    return "+".join(g for g in DESCRIPTOR_GROUPS if g in excluded) or "none"


def ablate_features(train, test, descriptor_names, exclusion_sets, mode, cfg=SPONT_CONFIG, ell=1):
    """Spontaneity accuracy with descriptor groups removed.

    ``train``/``test`` carry full pooled features; rows are
    ``(excluded, mode, dim, accuracy)``.
    """
    rows = []
    for excluded in exclusion_sets:
        excluded = frozenset(excluded)
        cols = ablation_columns(descriptor_names, excluded, mode)
        acc = spontaneity_accuracy(train, test, ell, cfg, columns=cols)
        rows.append((exclusion_label(excluded), mode, int(cols.size), acc))
    return sorted(rows, key=lambda r: (r[1], r[0]))


def ablate_csv_text(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["excluded", "mode", "dim", "accuracy"])
    for excluded, mode, dim, acc in rows:
        w.writerow([excluded, mode, dim, f"{acc:.6f}"])
    return buf.getvalue()


# -- emotion experiments -------------------------------------------------------


def compare_models(train, test, test_utterances, ell=10, emotion_cfg=EMOTION_CONFIG, spont_cfg=SPONT_CONFIG, joint_cfg=JOINT_CONFIG):
    """Train baseline, hierarchical and joint models; evaluate each on ``test``."""
    X, spont, emotions = stack_dialogs(train)
    models = {
        "baseline": train_baseline(X, emotions, emotion_cfg),
        "hierarchical": train_hierarchical(train, emotion_cfg, spont_cfg, ell),
        "joint": train_joint_emotion(X, spont, emotions, joint_cfg),
    }
    reports = {}
    for name, model in models.items():
        pred, _ = predict_corpus(model, [d.features for d in test])
        reports[name] = evaluate(pred, test_utterances)
    return models, reports


def write_text(path, text):
    Path(path).write_text(text, encoding="utf-8")
