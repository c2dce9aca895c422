import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from doccategorizer.errors import EmbeddingFormatError, EmptyDatasetError, FormatVersionError
from doccategorizer.preprocessing import (
    EmbeddingModel,
    EmbeddingTransformation,
    TfIdfModel,
    TokenizationTransformation,
    embed_sequence,
    get_tokenizer,
    load_embeddings,
    sentence_tokenize,
    tfidf_fit,
    tfidf_transform,
    word_tokenize,
)


def _write(path, text: str) -> str:
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestTokenizers:
    def test_word_tokenize(self):
        assert word_tokenize("Hello, world!") == ["hello", "world"]
        assert word_tokenize("exam-\nple text") == ["example", "text"]
        assert word_tokenize("") == []

    def test_keeps_apostrophes_and_digits(self):
        assert word_tokenize("Don't stop 2 Ärger") == ["don't", "stop", "2", "ärger"]

    def test_hyphen_inside_a_line_splits(self):
        assert word_tokenize("state-of-the-art") == ["state", "of", "the", "art"]

    def test_idempotent_on_joined_output(self):
        text = "A re-\nmarkable: TEST, of (tokenization)... isn't it? 42!"
        tokens = word_tokenize(text)
        assert word_tokenize(" ".join(tokens)) == tokens

    def test_sentence_tokenize(self):
        assert sentence_tokenize("A. B? C!") == ["A.", "B?", "C!"]
        assert sentence_tokenize("no terminator") == ["no terminator"]
        assert sentence_tokenize("") == []

    def test_registry(self):
        assert get_tokenizer("word").tokenize("A b") == ["a", "b"]
        with pytest.raises(ValueError):
            get_tokenizer("bpe")
        assert TokenizationTransformation().transform(["x y", ""]) == [["x", "y"], []]


class TestEmbeddings:
    def test_glove_text(self, tmp_path):
        model = load_embeddings(_write(tmp_path / "e.txt", "cat 1 2 3\ndog 4 5 6\n"), "glove_text")
        assert (len(model), model.dim) == (2, 3)
        assert_array_equal(model.lookup("dog"), [4, 5, 6])
        assert model.source == str(tmp_path / "e.txt")

    def test_word2vec_text(self, tmp_path):
        model = load_embeddings(_write(tmp_path / "e.txt", "2 4\na 1 2 3 4\nb 5 6 7 8\n"), "word2vec_text")
        assert (len(model), model.dim) == (2, 4)

    def test_duplicate_word_keeps_last_vector(self, tmp_path):
        model = load_embeddings(_write(tmp_path / "e.txt", "a 1 1\nb 2 2\na 3 3\n"))
        assert len(model) == 2
        assert_array_equal(model.lookup("a"), [3, 3])

    @pytest.mark.parametrize("text,format", [
        ("a 1 2 3\nb 1 2\n", "glove_text"),
        ("", "glove_text"),
        ("a 1 x\n", "glove_text"),
        ("a\n", "glove_text"),
        ("a 1 2\n", "word2vec_text"),
        ("3 2\na 1 2\n", "word2vec_text"),
    ])
    def test_malformed_files(self, tmp_path, text, format):
        with pytest.raises(EmbeddingFormatError):
            load_embeddings(_write(tmp_path / "e.txt", text), format)

    @pytest.mark.parametrize("format", ["glove_text", "word2vec_text"])
    def test_save_and_reload(self, tmp_path, format):
        model = EmbeddingModel.from_dict({"a": [0.1, -2.5], "b": [1 / 3, 7.0]})
        model.save(str(tmp_path / "e.txt"), format=format)
        loaded = load_embeddings(str(tmp_path / "e.txt"), format)
        for word in ("a", "b"):
            assert_array_equal(loaded.lookup(word), model.lookup(word))

    def test_embed_sequence_pads_and_truncates(self):
        model = EmbeddingModel.from_dict({f"w{i}": [i, -i] for i in range(1, 11)})
        padded = embed_sequence(model, ["w1", "oov", "w2"], 4)
        assert_array_equal(padded, [[1, -1], [2, -2], [0, 0], [0, 0]])
        cut = embed_sequence(model, [f"w{i}" for i in range(1, 11)], 5)
        assert_array_equal(cut[:, 0], [1, 2, 3, 4, 5])
        assert not embed_sequence(model, ["x", "y"], 3).any()

    def test_embedding_transformation_shape(self):
        model = EmbeddingModel.from_dict({"a": [1, 2, 3]})
        out = EmbeddingTransformation(model, 6).transform([["a"] * 10, [], ["b", "a"]])
        assert out.shape == (3, 6, 3)
        assert out.dtype == np.float32
        assert_array_equal(out[2, 0], [1, 2, 3])


class TestTfIdf:
    def test_fit_counts_documents(self):
        model = tfidf_fit([["a", "b"], ["a"]])
        assert model.df == {"a": 2, "b": 1}
        assert model.n_documents == 2
        assert tfidf_fit([["a", "a", "b"], ["c"]]).df["a"] == 1

    def test_single_empty_document(self):
        assert len(tfidf_fit([[]])) == 0

    def test_empty_corpus(self):
        with pytest.raises(EmptyDatasetError):
            tfidf_fit([])

    def test_weight_closed_form(self):
        model = TfIdfModel({"x": 2, "y": 10}, 10)
        weights = model.weights(["x", "x", "x", "y"])
        assert weights["x"] == pytest.approx(3 * math.log(5))
        assert weights["y"] == 0.0

    def test_transform_is_normalized(self):
        model = tfidf_fit([["a", "b"], ["a", "c"], ["d"]])
        row = tfidf_transform(model, ["b", "c", "c", "unknown"]).toarray()[0]
        assert (row >= 0).all()
        assert np.linalg.norm(row) == pytest.approx(1.0)
        assert row[model.index["a"]] == 0.0
        assert row[model.index["c"]] == pytest.approx(2 * row[model.index["b"]])

    def test_empty_document_is_zero_vector(self):
        model = tfidf_fit([["a"], ["b"]])
        assert tfidf_transform(model, []).nnz == 0

    def test_save_and_load(self, tmp_path):
        model = tfidf_fit([["a", "b"], ["b", "c"], ["c"]])
        model.save(str(tmp_path / "tfidf.json"))
        loaded = TfIdfModel.load(str(tmp_path / "tfidf.json"))
        docs = [["a", "c"], ["b"]]
        assert_allclose(loaded.transform_many(docs).toarray(), model.transform_many(docs).toarray())

    def test_unknown_format_version(self, tmp_path):
        path = _write(tmp_path / "tfidf.json", '{"format": "doccategorizer.tfidf", "version": 9}')
        with pytest.raises(FormatVersionError):
            TfIdfModel.load(path)
