from typing import Callable, Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from doccategorizer.classifiers import TrainingSettings, get_trainer
from doccategorizer.evaluation.corpus import synthetic_corpus
from doccategorizer.evaluation.validation import CrossValidationResult, monte_carlo_cv
from doccategorizer.preprocessing.embeddings import EmbeddingModel

EXPERIMENTS = ("categories", "documents", "timesteps")
RESULT_COLUMNS = ["experiment", "value", "trainer", "macro_f1_mean", "macro_f1_std", "micro_f1_mean",
                  "micro_f1_std", "runs"]

# desk-scale network; full-size defaults are far too slow on a CPU
DESK_SETTINGS = dict(max_timesteps=120, batch_size=50, filter_count=32, filter_lens=(1, 2, 3), dense_size=64,
                     dropout_rate=0.3, epochs=10)


def trainer_fn(key: str, settings: TrainingSettings, embedding_model: Optional[EmbeddingModel] = None) -> Callable:
    """Adapt a registered trainer to the cross-validation callback; uses the last epoch's predictions."""

    def run(x_train, y_train, x_validate, y_validate, seed: int) -> np.ndarray:
        run_settings = settings.model_copy(update={"seed": seed % (2 ** 31)})
        trainer = get_trainer(key, embedding_model=embedding_model)
        checkpoints = trainer.train(x_train, y_train, x_validate, y_validate, settings=run_settings)
        return checkpoints[-1].y_actual

    return run


def run_experiment(experiment: str, values: Sequence[int], trainers: Iterable[str] = ("cnn", "svm"),
                   runs: int = 3, seed: int = 0, k: int = 5, n_per_class: int = 200, overlap: float = 0.2,
                   doc_len: int = 120, vocab_size: int = 1000, settings: Optional[Dict] = None,
                   workers: int = 1) -> pd.DataFrame:
    """Sweep one corpus or network dimension and compare trainers with Monte Carlo cross-validation.

    ``experiment`` selects what ``values`` vary: the number of categories, the
    documents per category or max_timesteps.
    """
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}, expected one of {EXPERIMENTS}")
    base = TrainingSettings.from_dict({**DESK_SETTINGS, **(settings or {})})
    rows = []
    for value in values:
        corpus = synthetic_corpus(
            k=value if experiment == "categories" else k,
            n_per_class=value if experiment == "documents" else n_per_class,
            vocab_size=vocab_size, overlap=overlap, doc_len=doc_len, seed=seed,
        )
        point_settings = base
        if experiment == "timesteps":
            point_settings = TrainingSettings.from_dict(base.model_dump(), max_timesteps=value)
        for key in trainers:
            result: CrossValidationResult = monte_carlo_cv(
                trainer_fn(key, point_settings, corpus.embeddings), corpus.documents, corpus.y,
                runs=runs, seed=seed, workers=workers)
            rows.append([experiment, value, key, result.mean["macro_f1"], result.std["macro_f1"],
                         result.mean["micro_f1"], result.std["micro_f1"], runs])
            logger.info("experiment {} = {}: {} macro_f1 = {:.4f} ± {:.4f}", experiment, value, key,
                        result.mean["macro_f1"], result.std["macro_f1"])
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)
