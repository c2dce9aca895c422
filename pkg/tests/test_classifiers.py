import io
import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from sklearn.linear_model import SGDClassifier

from doccategorizer.classifiers import (
    BatchGenerator,
    CnnClassifier,
    CnnTrainer,
    SvmClassifier,
    SvmTrainer,
    TrainingSettings,
    as_indicators,
    cnn_build,
    document_text,
    get_trainer,
    load_classifier,
    save_classifier,
)
from doccategorizer.classifiers.statistics import COLUMNS
from doccategorizer.engine import Network
from doccategorizer.errors import (
    EmptyDatasetError,
    FormatVersionError,
    NotFoundError,
    SettingsError,
    ShapeError,
    TrainingInterrupted,
)
from doccategorizer.evaluation import split_validation
from doccategorizer.preprocessing import get_tokenizer


def _split(corpus, seed=0):
    y = corpus.y
    train_idx, val_idx = split_validation(y, seed=seed)
    docs = corpus.documents
    return [docs[i] for i in train_idx], y[train_idx], [docs[i] for i in val_idx], y[val_idx]


class TestSettings:
    def test_defaults(self):
        settings = TrainingSettings()
        assert settings.filter_lens == (1, 2, 3)
        assert settings.dtype == np.float32
        assert settings.activation == "leaky_relu"

    @pytest.mark.parametrize("values", [
        {"epochs": 0},
        {"dropout_rate": 1.0},
        {"filter_lens": []},
        {"max_timesteps": 2, "filter_lens": [1, 3]},
        {"activation": "softmax"},
        {"activation": "swish"},
        {"mode": "ranking"},
        {"learning_rate": 0},
        {"unknown_key": 1},
    ])
    def test_invalid(self, values):
        with pytest.raises(SettingsError):
            TrainingSettings.from_dict(values)

    def test_from_dict_overrides(self):
        settings = TrainingSettings.from_dict({"epochs": 3}, epochs=4, filter_lens=[2])
        assert settings.epochs == 4
        assert settings.filter_lens == (2,)


class TestIndicators:
    def test_index_vector(self):
        assert_array_equal(as_indicators([0, 2, 1]), [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
        assert as_indicators([0, 1], k=4).shape == (2, 4)

    def test_multi_class_needs_one_label(self):
        with pytest.raises(ValueError):
            as_indicators([[1, 1, 0]])
        assert as_indicators([[1, 1, 0]], mode="multi_label").shape == (1, 3)

    def test_document_text(self):
        buffer = io.StringIO("some text")
        assert document_text(buffer) == "some text"
        assert document_text(buffer) == "some text"
        with pytest.raises(TypeError):
            document_text(42)


class TestCnnBuild:
    def test_default_parameter_count(self):
        assert cnn_build(TrainingSettings(), 10, 300).count_params() == 421710

    def test_second_hidden_layer(self):
        settings = TrainingSettings(max_timesteps=10, filter_count=4, filter_lens=(2,), dense_size=6, dense_size2=5)
        net = cnn_build(settings, 3, 8)
        assert "hidden2" in net.nodes
        # conv 4*(2*8)+4, dense 4*6+6, dense 6*5+5, output 5*3+3
        assert net.count_params() == 68 + 30 + 35 + 18

    def test_needs_two_classes(self):
        with pytest.raises(SettingsError):
            cnn_build(TrainingSettings(max_timesteps=10), 1, 8)

    def test_output_shape(self):
        net = cnn_build(TrainingSettings(max_timesteps=12, filter_count=3, filter_lens=(1, 2)), 4, 5)
        probs = net.predict(np.random.default_rng(0).normal(size=(6, 12, 5)).astype(np.float32))
        assert probs.shape == (6, 4)
        assert_allclose(probs.sum(axis=1), 1.0, rtol=1e-5)


class TestBatchGenerator:
    def _generator(self, corpus, **kwargs):
        kwargs.setdefault("prefetch", False)
        return BatchGenerator(corpus.documents, corpus.y, corpus.embeddings, get_tokenizer("word"),
                              max_timesteps=20, batch_size=7, seed=3, **kwargs)

    def test_batches_cover_every_document_once(self, small_corpus):
        generator = self._generator(small_corpus)
        assert len(generator) == 5
        batches = list(generator.epoch(0))
        assert sum(x.shape[0] for x, _ in batches) == len(small_corpus.documents)
        assert all(x.shape[1:] == (20, 8) for x, _ in batches)
        indices = np.concatenate(generator.batches)
        assert sorted(indices.tolist()) == list(range(len(small_corpus.documents)))

    def test_order_changes_but_composition_does_not(self, small_corpus):
        generator = self._generator(small_corpus)
        orders = [generator.order(e).tolist() for e in range(6)]
        assert len({tuple(o) for o in orders}) > 1
        assert generator.order(2).tolist() == self._generator(small_corpus).order(2).tolist()

    def test_prefetch_yields_the_same_batches(self, small_corpus):
        plain = list(self._generator(small_corpus).epoch(1))
        prefetched = list(self._generator(small_corpus, prefetch=True).epoch(1))
        for (x1, y1), (x2, y2) in zip(plain, prefetched):
            assert_array_equal(x1, x2)
            assert_array_equal(y1, y2)

    def test_cache_is_reused_and_rebuilt(self, small_corpus, tmp_path):
        cache = str(tmp_path / "cache")
        generator = self._generator(small_corpus, cache_dir=cache)
        first = list(generator.epoch(0))
        assert len(os.listdir(cache)) == len(generator)
        with open(os.path.join(cache, "batch_00000.npz"), "wb") as f:
            f.write(b"garbage")
        again = list(generator.epoch(0))
        for (x1, _), (x2, _) in zip(first, again):
            assert_array_equal(x1, x2)

    def test_rejects_bad_input(self, small_corpus):
        with pytest.raises(EmptyDatasetError):
            BatchGenerator([], np.zeros((0, 3)), small_corpus.embeddings, get_tokenizer("word"), 10, 4)
        with pytest.raises(ShapeError):
            BatchGenerator(["a"], np.zeros((2, 3)), small_corpus.embeddings, get_tokenizer("word"), 10, 4)


class TestCnnTrainer:
    def test_one_checkpoint_per_epoch(self, small_corpus, tiny_settings, tmp_path):
        stats_path = str(tmp_path / "stats" / "statistics.csv")
        trainer = CnnTrainer(small_corpus.embeddings, statistics_path=stats_path)
        seen, progress = [], []
        checkpoints = trainer.train(*_split(small_corpus), settings=TrainingSettings.from_dict(tiny_settings),
                                    checkpoint_callback=seen.append,
                                    progress_callback=lambda p, action: progress.append(p))
        assert [c.epoch for c in checkpoints] == [0, 1]
        assert seen == checkpoints
        assert progress == sorted(progress)
        assert progress[-1] == pytest.approx(1.0)
        for c in checkpoints:
            assert c.y_actual.shape == (3, 3)
            assert set(c.statistics) >= set(COLUMNS[1:]) | {"accuracy"}
            assert 0.0 <= c.statistics["f1_macro"] <= 1.0
        frame = pd.read_csv(stats_path)
        assert list(frame.columns) == COLUMNS
        assert frame["epoch"].tolist() == [0, 1]

    def test_deterministic_for_a_seed(self, small_corpus, tiny_settings):
        settings = TrainingSettings.from_dict(tiny_settings)
        runs = [CnnTrainer(small_corpus.embeddings).train(*_split(small_corpus), settings=settings)
                for _ in range(2)]
        for a, b in zip(*runs):
            assert_array_equal(a.y_actual, b.y_actual)
            assert a.statistics["loss"] == b.statistics["loss"]
            assert a.statistics["val_loss"] == b.statistics["val_loss"]

    def test_checkpoints_are_independent_snapshots(self, small_corpus, tiny_settings):
        trainer = CnnTrainer(small_corpus.embeddings)
        first, last = trainer.train(*_split(small_corpus), settings=TrainingSettings.from_dict(tiny_settings))
        assert not np.array_equal(first.state.parameters()["output.W"], last.state.parameters()["output.W"])

    def test_saved_checkpoint_reproduces_validation_predictions(self, small_corpus, tiny_settings, tmp_path):
        x, y, x_val, y_val = _split(small_corpus)
        trainer = CnnTrainer(small_corpus.embeddings)
        checkpoints = trainer.train(x, y, x_val, y_val, settings=TrainingSettings.from_dict(tiny_settings))
        for c in checkpoints:
            directory = str(tmp_path / f"epoch{c.epoch}")
            save_classifier(trainer.create_classifier(c), directory)
            # embeddings without a source file are stored next to the network
            assert os.path.isfile(os.path.join(directory, "embeddings.txt"))
            classifier = load_classifier(directory)
            assert isinstance(classifier, CnnClassifier)
            assert_allclose(classifier.classify(x_val), c.y_actual, atol=1e-6)

    def test_validation_documents_never_train(self, small_corpus, tiny_settings, monkeypatch):
        docs, y = small_corpus.documents, small_corpus.y
        train_idx, val_idx = split_validation(y, seed=0)
        position = {doc: i for i, doc in enumerate(docs)}
        vectorized, fed_rows = [], []
        vectorize = BatchGenerator.vectorize
        train_on_batch = Network.train_on_batch

        def recording_vectorize(self, indices):
            vectorized.extend(position[self.x[i]] for i in indices)
            return vectorize(self, indices)

        def recording_train_on_batch(self, x, *args, **kwargs):
            fed_rows.append(x.shape[0])
            return train_on_batch(self, x, *args, **kwargs)

        monkeypatch.setattr(BatchGenerator, "vectorize", recording_vectorize)
        monkeypatch.setattr(Network, "train_on_batch", recording_train_on_batch)
        settings = TrainingSettings.from_dict(tiny_settings, epochs=3)
        CnnTrainer(small_corpus.embeddings).train([docs[i] for i in train_idx], y[train_idx],
                                                  [docs[i] for i in val_idx], y[val_idx], settings=settings)
        assert set(vectorized) == set(train_idx.tolist())
        assert not set(vectorized) & set(val_idx.tolist())
        assert sum(fed_rows) == 3 * len(train_idx)

    def test_training_loss_trends_down(self, small_corpus, tiny_settings):
        settings = TrainingSettings.from_dict(tiny_settings, epochs=10, batch_size=8, filter_count=8, dense_size=16,
                                              learning_rate=0.005)
        checkpoints = CnnTrainer(small_corpus.embeddings).train(*_split(small_corpus), settings=settings)
        losses = [c.statistics["loss"] for c in checkpoints]
        assert np.isfinite(losses).all()
        for start in range(len(losses) - 4):
            assert losses[start + 4] <= losses[start] + 1e-3
        assert np.mean(losses[-3:]) < losses[0]

    def test_float64_training(self, small_corpus, tiny_settings):
        settings = TrainingSettings.from_dict(tiny_settings, precision="float64", epochs=1)
        (checkpoint,) = CnnTrainer(small_corpus.embeddings).train(*_split(small_corpus), settings=settings)
        assert checkpoint.y_actual.dtype == np.float64
        assert_allclose(checkpoint.y_actual.sum(axis=1), 1.0)

    def test_multi_label_outputs_are_independent(self, small_corpus, tiny_settings):
        settings = TrainingSettings.from_dict(tiny_settings, mode="multi_label", epochs=1)
        (checkpoint,) = CnnTrainer(small_corpus.embeddings).train(*_split(small_corpus), settings=settings)
        assert ((checkpoint.y_actual > 0) & (checkpoint.y_actual < 1)).all()

    def test_should_stop_interrupts(self, small_corpus, tiny_settings):
        seen = []
        with pytest.raises(TrainingInterrupted):
            CnnTrainer(small_corpus.embeddings).train(*_split(small_corpus),
                                                      settings=TrainingSettings.from_dict(tiny_settings),
                                                      checkpoint_callback=seen.append, should_stop=lambda: True)
        assert seen == []

    def test_needs_embeddings(self, small_corpus, tiny_settings):
        with pytest.raises(SettingsError):
            CnnTrainer().train(*_split(small_corpus), settings=TrainingSettings.from_dict(tiny_settings))

    def test_loads_embeddings_from_settings(self, small_corpus, tiny_settings, tmp_path):
        path = str(tmp_path / "vectors.txt")
        small_corpus.embeddings.save(path)
        settings = TrainingSettings.from_dict(tiny_settings, embeddings=path, epochs=1)
        trainer = CnnTrainer()
        (checkpoint,) = trainer.train(*_split(small_corpus), settings=settings)
        directory = str(tmp_path / "classifier")
        trainer.create_classifier(checkpoint).save(directory)
        with open(os.path.join(directory, "classifier.json"), encoding="utf-8") as f:
            assert json.load(f)["embeddings"] == {"path": path, "format": "glove_text"}

    def test_empty_validation_set(self, small_corpus, tiny_settings):
        x, y, _, _ = _split(small_corpus)
        with pytest.raises(EmptyDatasetError):
            CnnTrainer(small_corpus.embeddings).train(x, y, [], np.zeros((0, 3)),
                                                      settings=TrainingSettings.from_dict(tiny_settings))

    def test_class_count_mismatch(self, small_corpus, tiny_settings):
        x, y, x_val, y_val = _split(small_corpus)
        with pytest.raises(ShapeError):
            CnnTrainer(small_corpus.embeddings).train(x, y, x_val, np.eye(4)[:len(x_val)],
                                                      settings=TrainingSettings.from_dict(tiny_settings))


class TestSvmTrainer:
    def test_single_checkpoint_at_last_pass(self, small_corpus, tmp_path):
        stats_path = str(tmp_path / "statistics.csv")
        settings = TrainingSettings(svm_epochs=5)
        progress = []
        checkpoints = SvmTrainer(statistics_path=stats_path).train(
            *_split(small_corpus), settings=settings, progress_callback=lambda p, action: progress.append(p))
        assert len(checkpoints) == 1
        assert checkpoints[0].epoch == 4
        assert progress == [0.2, 0.4, 0.6, 0.8, 1.0]
        assert pd.read_csv(stats_path)["epoch"].tolist() == [4]

    def test_separates_the_small_corpus(self, small_corpus):
        (checkpoint,) = SvmTrainer().train(*_split(small_corpus), settings=TrainingSettings())
        assert checkpoint.statistics["f1_macro"] == 1.0
        assert_allclose(checkpoint.y_actual.sum(axis=1), 1.0)

    def test_one_sgd_classifier_per_class(self, small_corpus):
        x, y, x_val, y_val = _split(small_corpus)
        settings = TrainingSettings(svm_epochs=3, seed=7)
        (checkpoint,) = SvmTrainer().train(x, y, x_val, y_val, settings=settings)

        tokenizer = get_tokenizer("word")
        features = checkpoint.state.tfidf.transform_many([tokenizer.tokenize(document_text(doc)) for doc in x])
        random_state = np.random.RandomState(7)
        expected = [SGDClassifier(loss="hinge", penalty="l2", alpha=settings.svm_lambda, random_state=random_state)
                    for _ in range(y.shape[1])]
        for _ in range(3):
            for c, estimator in enumerate(expected):
                estimator.partial_fit(features, np.where(y[:, c] > 0, 1, -1), classes=[-1, 1])
        assert_allclose(checkpoint.state.weights, np.vstack([e.coef_ for e in expected]))
        assert_allclose(checkpoint.state.intercepts, np.concatenate([e.intercept_ for e in expected]))

    def test_same_seed_same_weights(self, small_corpus):
        split = _split(small_corpus)
        first, = SvmTrainer().train(*split, settings=TrainingSettings(svm_epochs=4))
        second, = SvmTrainer().train(*split, settings=TrainingSettings(svm_epochs=4))
        assert_array_equal(first.state.weights, second.state.weights)
        assert first.statistics["loss"] == second.statistics["loss"]

    def test_documents_without_terms(self):
        with pytest.raises(EmptyDatasetError):
            SvmTrainer().train(["...", "!!"], [0, 1], ["?"], [0], settings=TrainingSettings())

    def test_save_and_load(self, small_corpus, tmp_path):
        x, y, x_val, y_val = _split(small_corpus)
        trainer = SvmTrainer()
        (checkpoint,) = trainer.train(x, y, x_val, y_val, settings=TrainingSettings(mode="multi_label"))
        trainer.create_classifier(checkpoint).save(str(tmp_path))
        classifier = load_classifier(str(tmp_path))
        assert isinstance(classifier, SvmClassifier)
        assert classifier.mode == "multi_label"
        assert_allclose(classifier.classify(x_val), checkpoint.y_actual)

    def test_needs_two_classes(self):
        with pytest.raises(SettingsError):
            SvmTrainer().train(["a b", "c d"], [[1], [1]], ["a"], [[1]], settings=TrainingSettings())


class TestRegistry:
    def test_get_trainer(self, small_corpus):
        assert isinstance(get_trainer("cnn", embedding_model=small_corpus.embeddings), CnnTrainer)
        assert isinstance(get_trainer("svm"), SvmTrainer)
        with pytest.raises(NotFoundError):
            get_trainer("bayes")

    def test_load_missing_or_foreign_directory(self, tmp_path):
        with pytest.raises(NotFoundError):
            load_classifier(str(tmp_path))
        (tmp_path / "classifier.json").write_text('{"format": "doccategorizer.classifier", "version": 7}')
        with pytest.raises(FormatVersionError):
            load_classifier(str(tmp_path))
