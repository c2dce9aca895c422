"""Batch generation for the CNN trainer.

Batch composition is fixed once per training from the seed; only the order in
which batches are visited changes from epoch to epoch. When a cache directory
is given, the first epoch writes every vectorized batch to an ``.npz`` file
and later epochs read it back. A cache file that cannot be read is rebuilt.
"""
import glob
import os
import zipfile
from concurrent.futures import ThreadPoolExecutor
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from doccategorizer.classifiers.base import document_text
from doccategorizer.errors import EmptyDatasetError, ShapeError
from doccategorizer.preprocessing.embeddings import EmbeddingModel, EmbeddingTransformation

Batch = Tuple[np.ndarray, np.ndarray]


class BatchGenerator:
    def __init__(self, x: Sequence, y: np.ndarray, embedding_model: EmbeddingModel, tokenizer,
                 max_timesteps: int, batch_size: int, seed: int = 0, cache_dir: Optional[str] = None,
                 prefetch: bool = True, dtype=np.float32):
        if len(x) == 0:
            raise EmptyDatasetError("cannot generate batches from an empty training set")
        if batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {batch_size}")
        y = np.asarray(y)
        if y.shape[0] != len(x):
            raise ShapeError(f"{len(x)} documents but {y.shape[0]} label rows")
        self.x = x
        self.y = y
        self.tokenizer = tokenizer
        self.transformation = EmbeddingTransformation(embedding_model, max_timesteps, dtype)
        self.batch_size = batch_size
        self.seed = seed
        self.cache_dir = cache_dir
        self.prefetch = prefetch
        self.dtype = np.dtype(dtype)
        permutation = np.random.default_rng(seed).permutation(len(x))
        self.batches: List[np.ndarray] = [permutation[i:i + batch_size] for i in range(0, len(x), batch_size)]
        if cache_dir:
            os.makedirs(cache_dir, exist_ok=True)
            # a cache belongs to exactly one training run
            for stale in glob.glob(os.path.join(cache_dir, "batch_*.npz")):
                os.remove(stale)

    def __len__(self) -> int:
        return len(self.batches)

    def order(self, epoch: int) -> np.ndarray:
        return np.random.default_rng([self.seed, epoch]).permutation(len(self.batches))

    def vectorize(self, indices: np.ndarray) -> Batch:
        tokens = [self.tokenizer.tokenize(document_text(self.x[i])) for i in indices]
        return self.transformation.transform(tokens), self.y[indices].astype(self.dtype)

    def _cache_path(self, b: int) -> str:
        return os.path.join(self.cache_dir, f"batch_{b:05d}.npz")

    def load(self, b: int) -> Batch:
        if not self.cache_dir:
            return self.vectorize(self.batches[b])
        path = self._cache_path(b)
        if os.path.exists(path):
            try:
                with np.load(path) as stored:
                    x, y = stored["x"], stored["y"]
                if x.shape[0] == len(self.batches[b]) and y.shape[0] == x.shape[0]:
                    return x, y
            except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile) as e:
                logger.warning("batch cache {} unreadable, rebuilding: {}", path, e)
        x, y = self.vectorize(self.batches[b])
        np.savez(path, x=x, y=y)
        return x, y

    def epoch(self, epoch: int) -> Iterator[Batch]:
        """Yield every batch once, in this epoch's order."""
        order = self.order(epoch)
        if not self.prefetch or len(order) == 1:
            for b in order:
                yield self.load(b)
            return
        # single producer, one batch ahead of the consumer
        with ThreadPoolExecutor(max_workers=1, thread_name_prefix="batch-prefetch") as executor:
            pending = executor.submit(self.load, order[0])
            for b in order[1:]:
                current = pending.result()
                pending = executor.submit(self.load, b)
                yield current
            yield pending.result()

    def __iter__(self) -> Iterator[Batch]:
        return self.epoch(0)
