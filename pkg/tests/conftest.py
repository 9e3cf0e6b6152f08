import numpy as np
import pytest

from spontser.harness import split_corpus
from spontser.pipeline import corpus_dialogs, corpus_features
from spontser.synth import SynthSpec, gen_synth_corpus


@pytest.fixture(scope="session")
def synth_run(tmp_path_factory):
    """Default synthetic corpus with features and the default session split."""
    root = tmp_path_factory.mktemp("synth_default")
    corpus = gen_synth_corpus(SynthSpec(), root)
    features = corpus_features(corpus)
    train, test = split_corpus(corpus)
    return {
        "root": root,
        "corpus": corpus,
        "features": features,
        "train": train,
        "test": test,
        "train_dialogs": corpus_dialogs(train, features),
        "test_dialogs": corpus_dialogs(test, features),
    }


def clusters(rng, centers, per, spread):
    X = np.vstack([rng.normal(c, spread, size=(per, len(c))) for c in centers])
    y = np.repeat(np.arange(len(centers)), per)
    return X, y


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
