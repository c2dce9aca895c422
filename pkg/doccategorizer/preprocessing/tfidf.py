import json
import math
from collections import Counter
from typing import Dict, Iterable, List, Sequence

import numpy as np
from loguru import logger
from scipy import sparse
from sklearn.preprocessing import normalize

from doccategorizer.errors import EmptyDatasetError, FormatVersionError

FORMAT_NAME = "doccategorizer.tfidf"
FORMAT_VERSION = 1


class TfIdfModel:
    """Document frequencies of a fitted corpus.

    Weights are raw term counts times ln(|D| / df), and every document vector
    is L2-normalized afterwards.
    """

    def __init__(self, df: Dict[str, int], n_documents: int):
        if n_documents < 1:
            raise EmptyDatasetError("a tf-idf model needs at least one document")
        for term, count in df.items():
            if not 1 <= count <= n_documents:
                raise ValueError(f"document frequency of {term!r} is {count}, outside [1, {n_documents}]")
        self.df = dict(df)
        self.n_documents = n_documents
        self.terms: List[str] = sorted(self.df)
        self.index = {term: i for i, term in enumerate(self.terms)}
        self.idf = np.array([math.log(n_documents / self.df[t]) for t in self.terms], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.terms)

    def weights(self, doc: Iterable[str]) -> Dict[str, float]:
        """Pre-normalization tf-idf weight of every known term in doc."""
        counts = Counter(t for t in doc if t in self.index)
        return {t: c * self.idf[self.index[t]] for t, c in counts.items()}

    def transform(self, doc: Iterable[str]) -> sparse.csr_matrix:
        return self.transform_many([doc])

    def transform_many(self, docs: Sequence[Iterable[str]]) -> sparse.csr_matrix:
        rows, cols, values = [], [], []
        for r, doc in enumerate(docs):
            for term, count in Counter(t for t in doc if t in self.index).items():
                rows.append(r)
                cols.append(self.index[term])
                values.append(count * self.idf[self.index[term]])
        matrix = sparse.csr_matrix((values, (rows, cols)), shape=(len(docs), len(self.terms)), dtype=np.float64)
        matrix.eliminate_zeros()
        # all-zero rows stay zero
        return normalize(matrix, norm="l2", axis=1)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump({"format": FORMAT_NAME, "version": FORMAT_VERSION,
                       "n_documents": self.n_documents, "df": self.df}, f)

    @classmethod
    def load(cls, path: str) -> "TfIdfModel":
        with open(path, "r", encoding="utf-8") as f:
            stored = json.load(f)
        if stored.get("format") != FORMAT_NAME or stored.get("version") != FORMAT_VERSION:
            raise FormatVersionError(
                f"{path}: unsupported tf-idf model format {stored.get('format')!r} v{stored.get('version')}")
        return cls(stored["df"], stored["n_documents"])


def tfidf_fit(corpus: Sequence[Iterable[str]]) -> TfIdfModel:
    if len(corpus) == 0:
        raise EmptyDatasetError("cannot fit tf-idf on an empty corpus")
    df: Counter = Counter()
    for doc in corpus:
        df.update(set(doc))
    model = TfIdfModel(df, len(corpus))
    logger.debug("tf-idf fitted: documents = {}, terms = {}", model.n_documents, len(model))
    return model


def tfidf_transform(model: TfIdfModel, doc: Iterable[str]) -> sparse.csr_matrix:
    """L2-normalized 1×|vocabulary| weight row for one document."""
    return model.transform(doc)
