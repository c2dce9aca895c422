import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from loguru import logger

from doccategorizer.errors import EmptyDatasetError
from doccategorizer.preprocessing.embeddings import EmbeddingModel


@dataclass
class Corpus:
    documents: List[str]
    labels: np.ndarray
    class_names: List[str]
    embeddings: Optional[EmbeddingModel]

    @property
    def y(self) -> np.ndarray:
        return np.eye(len(self.class_names), dtype=np.int8)[self.labels]


def synthetic_corpus(k: int, n_per_class: int, vocab_size: int = 1000, overlap: float = 0.2, doc_len: int = 120,
                     seed: int = 0, dim: int = 50) -> Corpus:
    """Seeded labelled corpus with a tunable amount of class overlap.

    Every class owns a disjoint slice of the vocabulary. Each token of a
    document comes from the whole vocabulary with probability ``overlap`` and
    from the class's own slice otherwise, so overlap=0 gives perfectly
    separable classes and overlap=1 gives identical class distributions.
    Words get fixed random unit vectors.
    """
    if k < 2:
        raise ValueError(f"a corpus needs at least 2 classes, got {k}")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must be in [0, 1], got {overlap}")
    if vocab_size < k:
        raise ValueError(f"vocabulary of {vocab_size} words cannot give {k} classes a word each")
    if n_per_class < 1 or doc_len < 1:
        raise EmptyDatasetError("documents per class and document length must be positive")
    rng = np.random.default_rng(seed)
    width = max(4, len(str(vocab_size - 1)))
    words = [f"w{i:0{width}d}" for i in range(vocab_size)]
    share = vocab_size // k

    documents, labels = [], []
    for c in range(k):
        private = rng.integers(c * share, (c + 1) * share, size=(n_per_class, doc_len))
        shared = rng.integers(0, vocab_size, size=(n_per_class, doc_len))
        tokens = np.where(rng.random((n_per_class, doc_len)) < overlap, shared, private)
        documents.extend(" ".join(words[t] for t in row) for row in tokens)
        labels.extend([c] * n_per_class)
    order = rng.permutation(len(documents))
    vectors = rng.normal(size=(vocab_size, dim))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    embeddings = EmbeddingModel({w: i for i, w in enumerate(words)}, vectors)
    logger.debug("synthetic corpus: classes = {}, documents = {}, overlap = {}", k, len(documents), overlap)
    return Corpus(
        documents=[documents[i] for i in order],
        labels=np.asarray(labels, dtype=np.int64)[order],
        class_names=[f"class{c}" for c in range(k)],
        embeddings=embeddings,
    )


def load_text_corpus(directory: str) -> Corpus:
    """One sub-directory per category, each holding UTF-8 ``.txt`` documents.

    The returned corpus has no embeddings of its own (``embeddings`` is None).
    """
    class_names = sorted(d for d in os.listdir(directory) if os.path.isdir(os.path.join(directory, d)))
    documents, labels = [], []
    for c, name in enumerate(class_names):
        folder = os.path.join(directory, name)
        for file_name in sorted(os.listdir(folder)):
            if not file_name.endswith(".txt"):
                continue
            with open(os.path.join(folder, file_name), "r", encoding="utf-8") as f:
                documents.append(f.read())
            labels.append(c)
    if len(class_names) < 2 or not documents:
        raise EmptyDatasetError(f"{directory} needs at least two category folders with .txt files")
    logger.info("text corpus loaded: path = {}, classes = {}, documents = {}", directory, len(class_names),
                len(documents))
    return Corpus(documents, np.asarray(labels, dtype=np.int64), class_names, None)
