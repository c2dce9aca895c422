import json
from typing import Iterable, Optional, Union

import pandas as pd
from loguru import logger
from matplotlib.figure import Figure

from doccategorizer.errors import FormatVersionError
from doccategorizer.evaluation.metrics import MetricsReport
from doccategorizer.evaluation.validation import CrossValidationResult

FORMAT_NAME = "doccategorizer.metrics"
FORMAT_VERSION = 1
CLASS_COLUMNS = ["class", "tp", "tn", "fp", "fn", "precision", "recall", "f1", "accuracy"]
SUMMARY_COLUMNS = ["metric", "mean", "std"]


def write_json(result: Union[MetricsReport, CrossValidationResult], path: str) -> None:
    kind = "cross_validation" if isinstance(result, CrossValidationResult) else "metrics"
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"format": FORMAT_NAME, "version": FORMAT_VERSION, "kind": kind,
                   "result": result.model_dump()}, f, indent=2)


def read_json(path: str) -> Union[MetricsReport, CrossValidationResult]:
    with open(path, "r", encoding="utf-8") as f:
        stored = json.load(f)
    if stored.get("format") != FORMAT_NAME or stored.get("version") != FORMAT_VERSION:
        raise FormatVersionError(f"{path}: unsupported metrics file {stored.get('format')!r} v{stored.get('version')}")
    model = CrossValidationResult if stored["kind"] == "cross_validation" else MetricsReport
    return model.model_validate(stored["result"])


def write_csv(result: Union[MetricsReport, CrossValidationResult], path: str) -> None:
    if isinstance(result, CrossValidationResult):
        frame = pd.DataFrame([[k, result.mean[k], result.std[k]] for k in result.mean], columns=SUMMARY_COLUMNS)
    else:
        frame = pd.DataFrame([[i, *c.model_dump().values()] for i, c in enumerate(result.classes)],
                             columns=CLASS_COLUMNS)
    frame.to_csv(path, index=False)


def _frame(statistics) -> pd.DataFrame:
    if isinstance(statistics, pd.DataFrame):
        return statistics
    if isinstance(statistics, str):
        return pd.read_csv(statistics)
    return pd.DataFrame(list(statistics))


def detect_overfitting(statistics: Union[pd.DataFrame, str, Iterable[dict]], patience: int = 3) -> Optional[int]:
    """First epoch after which val_loss rose for ``patience`` epochs in a row while loss fell.

    Diagnostic only; training is never stopped because of it.
    """
    frame = _frame(statistics)
    loss, val_loss = frame["loss"].tolist(), frame["val_loss"].tolist()
    epochs = frame["epoch"].tolist() if "epoch" in frame else list(range(len(loss)))
    for start in range(len(loss) - patience):
        window = range(start + 1, start + patience + 1)
        if all(val_loss[i] > val_loss[i - 1] and loss[i] < loss[i - 1] for i in window):
            logger.warning("overfitting: validation loss rising since epoch {} while training loss falls",
                           epochs[start])
            return int(epochs[start])
    return None


def plot_statistics(csv_path: str, out_path: str, title: Optional[str] = None) -> str:
    """Render loss and F1 curves of a per-epoch statistics CSV to an image file."""
    frame = pd.read_csv(csv_path)
    # a bare Figure renders through Agg without touching pyplot state
    fig = Figure(figsize=(11, 4))
    ax_loss, ax_f1 = fig.subplots(1, 2)
    ax_loss.plot(frame["epoch"], frame["loss"], label="loss")
    ax_loss.plot(frame["epoch"], frame["val_loss"], label="val_loss")
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("loss")
    ax_loss.legend()
    ax_f1.plot(frame["epoch"], frame["f1_macro"], label="f1_macro")
    ax_f1.plot(frame["epoch"], frame["f1_micro"], label="f1_micro", linestyle="--")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("F1")
    ax_f1.set_ylim(0.0, 1.0)
    ax_f1.legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path)
    logger.info("statistics plotted: csv = {}, image = {}", csv_path, out_path)
    return out_path
