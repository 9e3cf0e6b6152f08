import hashlib

import numpy as np
import pytest

from spontser.errors import DimensionMismatch, MissingBranchData, SingleClass
from spontser.models import (
    BaselineModel,
    HierarchicalModel,
    JointEmotionModel,
    LabeledDialog,
    Standardizer,
    predict_baseline,
    predict_corpus,
    predict_hierarchical,
    predict_hierarchical_dialog,
    predict_joint_emotion,
    stack_dialogs,
    train_baseline,
    train_hierarchical,
    train_joint_emotion,
)
from spontser.persist import model_bytes
from spontser.svm import BinarySVM, JointModel, KernelSpec, OneVsRestSVM, predict_joint, tuple_row

D = 6
EMO_CENTRES = np.array([[-4.0, -4.0], [4.0, -4.0], [-4.0, 4.0], [4.0, 4.0]])
SPONT_MAP = (1, 0, 3, 2)


def branch_corpus(seed=0, n_dialogs=8, per=12, divergent=True, spread=0.4):
    """Dialog features: column 0 carries spontaneity, columns 1-2 an emotion centroid."""
    rng = np.random.default_rng(seed)
    dialogs = []
    for d in range(n_dialogs):
        spont = d % 2
        emotions = rng.integers(0, 4, per)
        emotions[:4] = [0, 1, 2, 3]
        pattern = [SPONT_MAP[e] if (spont and divergent) else e for e in emotions]
        X = rng.normal(0, spread, size=(per, D))
        X[:, 0] += 3.0 if spont else -3.0
        X[:, 1:3] += EMO_CENTRES[pattern]
        dialogs.append(LabeledDialog(f"d{d}", X, spont, emotions.astype(np.int64)))
    return dialogs


def const_binary(dim, bias):
    return BinarySVM(np.zeros((0, dim)), np.zeros(0), float(bias), KernelSpec("linear"))


class CountingOVR(OneVsRestSVM):
    """One-vs-rest stub that always answers ``label`` and records every row it scores."""

    def __init__(self, label, dim):
        biases = [-1.0] * 4
        biases[label] = 1.0
        object.__setattr__(self, "machines", tuple(const_binary(dim, b) for b in biases))
        object.__setattr__(self, "seen", [])

    @property
    def calls(self):
        return len(self.seen)

    def decision(self, X):
        X = np.atleast_2d(X)
        self.seen.extend(row.copy() for row in X)
        return super().decision(X)


def identity_scaler(d):
    return Standardizer(np.zeros(d), np.ones(d))


def stub_hierarchy(spont_bias, ell=3):
    return HierarchicalModel(
        identity_scaler(D), const_binary(D * ell, spont_bias), CountingOVR(1, D), CountingOVR(3, D), ell
    )


# -- baseline -----------------------------------------------------------------


def test_baseline_separable():
    dialogs = branch_corpus(divergent=False)
    X, _, emotions = stack_dialogs(dialogs)
    model = train_baseline(X, emotions)
    assert np.array_equal(model.predict_emotions(X), emotions)
    assert predict_baseline(model, X[0]) == emotions[0]


def test_baseline_single_emotion():
    X = np.random.default_rng(0).normal(size=(10, 3))
    with pytest.raises(SingleClass):
        train_baseline(X, np.full(10, 2))


def test_baseline_deterministic_bytes():
    X, _, emotions = stack_dialogs(branch_corpus())
    assert model_bytes(train_baseline(X, emotions)) == model_bytes(train_baseline(X, emotions))


# -- hierarchical ---------------------------------------------------------------


def test_hierarchical_submodels_fit_training_data():
    dialogs = branch_corpus()
    model = train_hierarchical(dialogs, ell=4)
    X, spont, emotions = stack_dialogs(dialogs)
    Z = model.scaler.transform(X)
    assert model.spont_clf.dim == D * 4
    for label in (0, 1):
        mask = spont == label
        assert np.array_equal(model.branch(label).predict_many(Z[mask]), emotions[mask])
    pred, routed = predict_corpus(model, [d.features for d in dialogs])
    assert np.array_equal(routed, spont)
    assert np.array_equal(pred, emotions)


def test_hierarchical_missing_branch():
    scripted_only = [d for d in branch_corpus() if d.spontaneity == 0]
    with pytest.raises(MissingBranchData) as info:
        train_hierarchical(scripted_only)
    assert info.value.branch == "spontaneous"
    spont_only = [d for d in branch_corpus() if d.spontaneity == 1]
    with pytest.raises(MissingBranchData, match="scripted") as info:
        train_hierarchical(spont_only)
    assert info.value.branch == "scripted"


def test_hierarchical_branch_needs_two_emotions():
    dialogs = branch_corpus()
    one = [
        LabeledDialog(d.dialog_id, d.features, d.spontaneity, np.zeros(len(d), dtype=np.int64))
        if d.spontaneity == 1 else d
        for d in dialogs
    ]
    with pytest.raises(MissingBranchData) as info:
        train_hierarchical(one)
    assert info.value.branch == "spontaneous"


def test_hierarchical_ell_one_shape():
    model = train_hierarchical(branch_corpus(), ell=1)
    assert model.spont_clf.dim == D and model.d == D


@pytest.mark.parametrize("bias, branch_label, expected", [(1.0, 1, 3), (-1.0, 0, 1)])
def test_stub_routing(bias, branch_label, expected):
    model = stub_hierarchy(bias)
    feats = np.random.default_rng(0).normal(size=(5, D))
    emotion, spont = predict_hierarchical(model, feats, 3)
    assert (emotion, spont) == (expected, branch_label)
    used, unused = model.branch(branch_label), model.branch(1 - branch_label)
    assert used.calls == 1 and unused.calls == 0


def test_routing_exclusive_for_every_utterance():
    model = stub_hierarchy(0.0)  # margin 0 routes to the spontaneous branch
    feats = np.random.default_rng(1).normal(size=(7, D))
    emotions, spont = predict_hierarchical_dialog(model, feats)
    assert np.all(spont == 1) and np.all(emotions == 3)
    assert model.emo_clf_spontaneous.calls == 7 and model.emo_clf_scripted.calls == 0


def test_anchor_feature_shared_with_baseline():
    """Hierarchy and baseline score the same standardized anchor feature."""
    feats = np.random.default_rng(2).normal(size=(4, D))
    scaler = identity_scaler(D)
    hier = stub_hierarchy(-1.0)
    predict_hierarchical(hier, feats, 2)
    base_clf = CountingOVR(1, D)
    predict_baseline(BaselineModel(scaler, base_clf), feats[2])
    digest = lambda a: hashlib.sha256(np.ascontiguousarray(a, dtype="<f8").tobytes()).hexdigest()  # noqa: E731
    assert digest(hier.emo_clf_scripted.seen[0]) == digest(base_clf.seen[0]) == digest(feats[2])


def test_hierarchical_dimension_mismatch():
    model = stub_hierarchy(1.0)
    with pytest.raises(DimensionMismatch):
        predict_hierarchical(model, np.zeros((3, D + 1)), 0)


def test_hierarchy_beats_baseline_on_divergent_data():
    train, test = branch_corpus(seed=0), branch_corpus(seed=1, n_dialogs=4)
    X, spont, emotions = stack_dialogs(train)
    _, _, test_emotions = stack_dialogs(test)
    hier = train_hierarchical(train, ell=3)
    base = train_baseline(X, emotions)
    h, _ = predict_corpus(hier, [d.features for d in test])
    b, _ = predict_corpus(base, [d.features for d in test])
    assert np.mean(h == test_emotions) == 1.0
    assert np.mean(h == test_emotions) - np.mean(b == test_emotions) >= 0.05


# -- joint ------------------------------------------------------------------------


def test_joint_separable_tuples():
    dialogs = branch_corpus()
    X, spont, emotions = stack_dialogs(dialogs)
    model = train_joint_emotion(X, spont, emotions)
    s, e = model.predict_tuples(X)
    assert np.array_equal(s, spont) and np.array_equal(e, emotions)
    for x, se, ee in zip(X[:10], spont, emotions):
        assert predict_joint_emotion(model, x) == (ee, se)


def test_joint_single_tuple():
    X = np.random.default_rng(0).normal(size=(6, 3))
    with pytest.raises(SingleClass):
        train_joint_emotion(X, np.ones(6, int), np.full(6, 2))


def test_joint_zero_and_one_hot():
    zero = JointEmotionModel(identity_scaler(3), JointModel(np.zeros((8, 3))))
    assert predict_joint_emotion(zero, [0.3, -1.0, 2.0]) == (0, 0)
    W = np.zeros((8, 8))
    W[tuple_row(1, 2), 0] = 1.0
    hot = JointEmotionModel(identity_scaler(8), JointModel(W))
    assert predict_joint_emotion(hot, np.eye(8)[0] * 5) == (2, 1)
    with pytest.raises(DimensionMismatch):
        predict_joint_emotion(hot, np.zeros(3))


def test_joint_emotion_equivariant_under_spont_relabel():
    rng = np.random.default_rng(4)
    for _ in range(20):
        W = rng.normal(size=(8, 5))
        swapped = np.vstack([W[4:], W[:4]])  # rows of spont 0 and 1 exchanged
        for x in rng.normal(size=(10, 5)):
            s, e = predict_joint(JointModel(W), x)
            s2, e2 = predict_joint(JointModel(swapped), x)
            assert e2 == e and s2 == 1 - s
