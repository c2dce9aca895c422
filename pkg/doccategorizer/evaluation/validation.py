import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel

from doccategorizer.errors import EmptyDatasetError
from doccategorizer.evaluation.metrics import MULTI_CLASS, MetricsReport, score_predictions

DEFAULT_FRACTION = 0.1
DEFAULT_CAP_FACTOR = 100

# (x_train, y_train, x_validate, y_validate, seed) -> probability matrix over x_validate
TrainerFn = Callable[[list, np.ndarray, list, np.ndarray, int], np.ndarray]
Seed = Union[int, np.random.Generator, np.random.SeedSequence, None]


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def strata(y) -> np.ndarray:
    """Stratum of every item: its first label, or -1 for an unlabeled row."""
    y = np.asarray(y)
    if y.ndim == 1:
        return y.astype(np.int64)
    first = np.argmax(y != 0, axis=1)
    return np.where((y != 0).any(axis=1), first, -1)


def validation_size(n: int, k: int, fraction: float = DEFAULT_FRACTION, cap_factor: int = DEFAULT_CAP_FACTOR) -> int:
    """Up to fraction·N validation items, capped at cap_factor·K, at least one."""
    if n < 2:
        raise EmptyDatasetError(f"need at least 2 items to split, got {n}")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"validation fraction must be in (0, 1), got {fraction}")
    return min(max(1, min(math.floor(fraction * n), cap_factor * k)), n - 1)


def _allocate(group_sizes: Sequence[int], total: int, n: int) -> List[int]:
    # largest remainder, exact integer arithmetic; earlier groups win ties
    base = [total * size // n for size in group_sizes]
    remainders = [total * size % n for size in group_sizes]
    missing = total - sum(base)
    for g in sorted(range(len(group_sizes)), key=lambda g: -remainders[g])[:missing]:
        base[g] += 1
    return base


def split_validation(y, fraction: float = DEFAULT_FRACTION, cap_factor: int = DEFAULT_CAP_FACTOR,
                     seed: Seed = 0, k: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Stratified random (train, validation) index split.

    ``y`` is an N×K indicator matrix or a vector of class indices. Class
    proportions are preserved in the validation part up to rounding.
    """
    labels = strata(y)
    n = labels.shape[0]
    if k is None:
        k = np.asarray(y).shape[1] if np.asarray(y).ndim == 2 else int(labels.max()) + 1
    n_val = validation_size(n, k, fraction, cap_factor)
    rng = _rng(seed)
    groups = [np.flatnonzero(labels == g) for g in np.unique(labels)]
    quotas = _allocate([len(g) for g in groups], n_val, n)
    validation = []
    for members, quota in zip(groups, quotas):
        validation.append(rng.permutation(members)[:quota])
    val_idx = np.sort(np.concatenate(validation)) if validation else np.zeros(0, dtype=np.int64)
    mask = np.ones(n, dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


def stratified_folds(y, n_folds: int, seed: Seed = 0) -> List[np.ndarray]:
    """Partition items into n_folds folds whose sizes differ by at most one."""
    labels = strata(y)
    n = labels.shape[0]
    if n_folds < 2:
        raise ValueError(f"n-fold cross-validation needs n >= 2, got {n_folds}")
    if n < n_folds:
        raise EmptyDatasetError(f"cannot build {n_folds} folds from {n} items")
    rng = _rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == g)) for g in np.unique(labels)])
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[order] = np.arange(n) % n_folds
    return [np.flatnonzero(fold_of == f) for f in range(n_folds)]


class CrossValidationResult(BaseModel):
    runs: List[MetricsReport]
    mean: Dict[str, float]
    std: Dict[str, float]


def aggregate(reports: Sequence[MetricsReport]) -> CrossValidationResult:
    """Mean and sample standard deviation of every aggregate metric.

    Sums use math.fsum, so the result does not depend on run order.
    """
    if not reports:
        raise EmptyDatasetError("no runs to aggregate")
    keys = list(reports[0].aggregates())
    mean, std = {}, {}
    for key in keys:
        values = [r.aggregates()[key] for r in reports]
        m = math.fsum(values) / len(values)
        mean[key] = m
        std[key] = math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1)) if len(values) > 1 else 0.0
    return CrossValidationResult(runs=list(reports), mean=mean, std=std)


def _subset(x, indices):
    return [x[i] for i in indices]


def _evaluate(trainer_fn: TrainerFn, x, y, train_idx, val_idx, seed: int, mode: str) -> MetricsReport:
    y = np.asarray(y)
    probs = trainer_fn(_subset(x, train_idx), y[train_idx], _subset(x, val_idx), y[val_idx], seed)
    return score_predictions(y[val_idx], probs, mode)


def _run_all(jobs: List[Callable[[], MetricsReport]], workers: int) -> List[MetricsReport]:
    if workers <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(job) for job in jobs]
        return [f.result() for f in futures]


def monte_carlo_cv(trainer_fn: TrainerFn, x, y, runs: int = 5, fraction: float = DEFAULT_FRACTION,
                   seed: int = 0, mode: str = MULTI_CLASS, cap_factor: int = DEFAULT_CAP_FACTOR,
                   workers: int = 1) -> CrossValidationResult:
    """Repeat an independent stratified random split ``runs`` times."""
    if runs < 1:
        raise ValueError(f"runs must be at least 1, got {runs}")
    if len(x) != np.asarray(y).shape[0]:
        raise ValueError(f"{len(x)} documents but {np.asarray(y).shape[0]} label rows")
    children = np.random.SeedSequence(seed).spawn(runs)

    def job(child: np.random.SeedSequence):
        def run() -> MetricsReport:
            train_idx, val_idx = split_validation(y, fraction, cap_factor, seed=np.random.default_rng(child))
            run_seed = int(child.generate_state(1)[0])
            report = _evaluate(trainer_fn, x, y, train_idx, val_idx, run_seed, mode)
            logger.info("monte carlo run: seed = {}, macro_f1 = {:.4f}", run_seed, report.macro_f1)
            return report
        return run

    return aggregate(_run_all([job(c) for c in children], workers))


def n_fold_cv(trainer_fn: TrainerFn, x, y, n: int = 5, seed: int = 0, mode: str = MULTI_CLASS,
              workers: int = 1) -> CrossValidationResult:
    """Train n times, each time validating on one stratified fold."""
    folds = stratified_folds(y, n, seed)
    all_idx = np.arange(len(x))
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]

    def job(fold: int):
        def run() -> MetricsReport:
            val_idx = folds[fold]
            train_idx = np.setdiff1d(all_idx, val_idx)
            report = _evaluate(trainer_fn, x, y, train_idx, val_idx, seeds[fold], mode)
            logger.info("fold {}/{}: macro_f1 = {:.4f}", fold + 1, n, report.macro_f1)
            return report
        return run

    return aggregate(_run_all([job(f) for f in range(n)], workers))
