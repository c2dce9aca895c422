import os
from typing import Dict, Iterable, List, Optional

import numpy as np
from loguru import logger

from doccategorizer.errors import EmbeddingFormatError

FORMATS = ("word2vec_text", "glove_text")


class EmbeddingModel:
    """Fixed word vectors of a shared dimension |v|."""

    def __init__(self, vocab: Dict[str, int], vectors: np.ndarray, source: Optional[str] = None,
                 source_format: Optional[str] = None):
        vectors = np.asarray(vectors)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise EmbeddingFormatError(f"embedding vectors must be a (words, dim) matrix, got {vectors.shape}")
        if not vocab:
            raise EmbeddingFormatError("embedding vocabulary is empty")
        if len(vocab) != vectors.shape[0]:
            raise EmbeddingFormatError(f"{len(vocab)} words but {vectors.shape[0]} vectors")
        self.vocab = dict(vocab)
        self.vectors = vectors
        self.source = source
        self.source_format = source_format

    @classmethod
    def from_dict(cls, words: Dict[str, Iterable[float]]) -> "EmbeddingModel":
        vocab = {word: i for i, word in enumerate(words)}
        return cls(vocab, np.array([list(v) for v in words.values()], dtype=np.float64))

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    def lookup(self, word: str) -> np.ndarray:
        return self.vectors[self.vocab[word]]

    def indices(self, tokens: Iterable[str]) -> List[int]:
        vocab = self.vocab
        return [vocab[t] for t in tokens if t in vocab]

    def save(self, path: str, format: str = "glove_text") -> None:
        if format not in FORMATS:
            raise EmbeddingFormatError(f"unknown embedding format {format!r}")
        with open(path, "w", encoding="utf-8") as f:
            if format == "word2vec_text":
                f.write(f"{len(self.vocab)} {self.dim}\n")
            for word, index in self.vocab.items():
                f.write(word + " " + " ".join(repr(float(v)) for v in self.vectors[index]) + "\n")


def _parse_vector(parts: List[str], path: str, line_no: int) -> np.ndarray:
    try:
        return np.array(parts, dtype=np.float64)
    except ValueError:
        raise EmbeddingFormatError(f"{path}:{line_no}: non-numeric vector component") from None


def load_embeddings(path: str, format: str = "glove_text") -> EmbeddingModel:
    """Load a text embedding file.

    word2vec_text starts with a "vocab_count dim" header, glove_text has no
    header and takes its dimension from the first line. A word that occurs
    twice keeps its last vector.
    """
    if format not in FORMATS:
        raise EmbeddingFormatError(f"unknown embedding format {format!r}, expected one of {FORMATS}")
    vocab: Dict[str, int] = {}
    rows: List[np.ndarray] = []
    dim: Optional[int] = None
    declared: Optional[int] = None
    lines_read = 0
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.rstrip("\n").rstrip("\r").split()
            if not parts:
                continue
            if format == "word2vec_text" and declared is None:
                if len(parts) != 2 or not all(p.isdigit() for p in parts):
                    raise EmbeddingFormatError(f"{path}:{line_no}: expected header 'vocab_count dim'")
                declared, dim = int(parts[0]), int(parts[1])
                if dim < 1:
                    raise EmbeddingFormatError(f"{path}: dimension must be positive")
                continue
            if len(parts) < 2:
                raise EmbeddingFormatError(f"{path}:{line_no}: line has a word but no vector")
            word, vector = parts[0], _parse_vector(parts[1:], path, line_no)
            if dim is None:
                dim = vector.size
            elif vector.size != dim:
                raise EmbeddingFormatError(
                    f"{path}:{line_no}: vector for {word!r} has {vector.size} components, expected {dim}")
            lines_read += 1
            if word in vocab:
                rows[vocab[word]] = vector
            else:
                vocab[word] = len(rows)
                rows.append(vector)
    if not rows:
        raise EmbeddingFormatError(f"{path}: no word vectors found")
    if declared is not None and declared != lines_read:
        raise EmbeddingFormatError(f"{path}: header declares {declared} vectors, found {lines_read}")
    model = EmbeddingModel(vocab, np.vstack(rows), source=os.path.abspath(path), source_format=format)
    logger.info("embeddings loaded: path = {}, words = {}, dim = {}", path, len(model), model.dim)
    return model


def embed_sequence(model: EmbeddingModel, tokens: Iterable[str], max_timesteps: int, dtype=np.float32) -> np.ndarray:
    """Known-token vectors in order, cut to max_timesteps and zero post-padded."""
    if max_timesteps < 1:
        raise ValueError(f"max_timesteps must be positive, got {max_timesteps}")
    out = np.zeros((max_timesteps, model.dim), dtype=dtype)
    indices = model.indices(tokens)[:max_timesteps]
    if indices:
        out[:len(indices)] = model.vectors[indices]
    return out


class EmbeddingTransformation:
    def __init__(self, model: EmbeddingModel, max_timesteps: int, dtype=np.float32):
        self.model = model
        self.max_timesteps = max_timesteps
        self.dtype = dtype

    def transform(self, token_lists) -> np.ndarray:
        out = np.zeros((len(token_lists), self.max_timesteps, self.model.dim), dtype=self.dtype)
        for i, tokens in enumerate(token_lists):
            out[i] = embed_sequence(self.model, tokens, self.max_timesteps, self.dtype)
        return out
