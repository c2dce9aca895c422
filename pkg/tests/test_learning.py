"""Desk-scale learning runs on a synthetic five-category corpus."""
import pytest

from doccategorizer.classifiers import TrainingSettings
from doccategorizer.evaluation import monte_carlo_cv, synthetic_corpus
from doccategorizer.evaluation.experiments import DESK_SETTINGS, trainer_fn

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def desk_corpus():
    return synthetic_corpus(k=5, n_per_class=200, overlap=0.2, doc_len=120, seed=0)


@pytest.fixture(scope="module")
def noisy_corpus():
    return synthetic_corpus(k=5, n_per_class=200, overlap=0.6, doc_len=120, seed=0)


def _macro_f1(key, corpus, **settings):
    run = trainer_fn(key, TrainingSettings.from_dict({**DESK_SETTINGS, **settings}), corpus.embeddings)
    return monte_carlo_cv(run, corpus.documents, corpus.y, runs=1, seed=0).mean["macro_f1"]


def test_cnn_separates_categories(desk_corpus):
    assert _macro_f1("cnn", desk_corpus) >= 0.90


def test_svm_separates_categories(desk_corpus):
    assert _macro_f1("svm", desk_corpus) >= 0.85


@pytest.mark.parametrize("key", ["cnn", "svm"])
def test_overlapping_categories_stay_learnable(noisy_corpus, key):
    assert _macro_f1(key, noisy_corpus) > 0.6
