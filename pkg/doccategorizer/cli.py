import argparse
import json
import os
import sys
from typing import Dict, Optional, Sequence

import numpy as np
from loguru import logger

from doccategorizer.classifiers import TrainingSettings, get_trainer
from doccategorizer.config import load_config
from doccategorizer.errors import CategorizerError, SettingsError, describe
from doccategorizer.evaluation import (
    Corpus,
    load_text_corpus,
    monte_carlo_cv,
    n_fold_cv,
    plot_statistics,
    score_predictions,
    split_validation,
    synthetic_corpus,
    write_csv,
    write_json,
)
from doccategorizer.log import configure_logging
from doccategorizer.preprocessing.embeddings import FORMATS, EmbeddingModel, load_embeddings


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _settings(args) -> Dict:
    values: Dict = {}
    if args.settings:
        with open(args.settings, "r", encoding="utf-8") as f:
            values.update(json.load(f))
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise SettingsError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = _parse_value(value.strip())
    if args.seed is not None:
        values["seed"] = args.seed
    return values


def _corpus(args) -> Corpus:
    if args.corpus:
        return load_text_corpus(args.corpus)
    return synthetic_corpus(k=args.classes, n_per_class=args.per_class, overlap=args.overlap, doc_len=args.doc_len,
                            seed=args.seed or 0)


def _embeddings(args, corpus: Corpus) -> Optional[EmbeddingModel]:
    if args.embeddings:
        return load_embeddings(args.embeddings, args.embeddings_format)
    return corpus.embeddings


def cmd_serve(args) -> int:
    from doccategorizer.service import serve

    overrides = {}
    if args.host:
        overrides["HOST"] = args.host
    if args.port:
        overrides["PORT"] = args.port
    config = load_config(args.config, **overrides)
    config.ensure_data_root()
    configure_logging(config.LOG_LEVEL, config.log_file)
    serve(config)
    return 0


def cmd_train(args) -> int:
    corpus = _corpus(args)
    settings = TrainingSettings.from_dict(_settings(args))
    y = corpus.y
    train_idx, val_idx = split_validation(y, seed=settings.seed)
    os.makedirs(args.out, exist_ok=True)
    trainer = get_trainer(args.trainer, embedding_model=_embeddings(args, corpus),
                          statistics_path=os.path.join(args.out, "statistics.csv"))
    documents = corpus.documents
    checkpoints = trainer.train([documents[i] for i in train_idx], y[train_idx],
                                [documents[i] for i in val_idx], y[val_idx], settings=settings)
    reports = [score_predictions(y[val_idx], c.y_actual, settings.mode) for c in checkpoints]
    best = int(np.argmax([r.macro_f1 for r in reports]))
    trainer.create_classifier(checkpoints[best]).save(os.path.join(args.out, "classifier"))
    write_json(reports[best], os.path.join(args.out, "metrics.json"))
    with open(os.path.join(args.out, "classes.json"), "w", encoding="utf-8") as f:
        json.dump(corpus.class_names, f)
    logger.info("best epoch {}: macro_f1 = {:.4f}, micro_f1 = {:.4f}", checkpoints[best].epoch,
                reports[best].macro_f1, reports[best].micro_f1)
    return 0


def cmd_evaluate(args) -> int:
    if args.experiment:
        from doccategorizer.evaluation.experiments import run_experiment

        values = [int(v) for v in args.values.split(",")]
        frame = run_experiment(args.experiment, values, trainers=args.trainers.split(","), runs=args.runs,
                               seed=args.seed or 0, settings=_settings(args), workers=args.workers)
        if args.out:
            frame.to_csv(args.out, index=False)
        print(frame.to_string(index=False))
        return 0

    from doccategorizer.evaluation.experiments import trainer_fn

    corpus = _corpus(args)
    settings = TrainingSettings.from_dict(_settings(args))
    run = trainer_fn(args.trainer, settings, _embeddings(args, corpus))
    if args.folds:
        result = n_fold_cv(run, corpus.documents, corpus.y, n=args.folds, seed=settings.seed, mode=settings.mode,
                           workers=args.workers)
    else:
        result = monte_carlo_cv(run, corpus.documents, corpus.y, runs=args.runs, seed=settings.seed,
                                mode=settings.mode, workers=args.workers)
    if args.out:
        write_json(result, args.out)
        write_csv(result, os.path.splitext(args.out)[0] + ".csv")
    for metric in ("macro_f1", "micro_f1", "accuracy"):
        print(f"{metric}: {result.mean[metric]:.4f} ± {result.std[metric]:.4f}")
    return 0


def cmd_plot(args) -> int:
    plot_statistics(args.stats, args.out, title=args.title)
    return 0


def cmd_synth(args) -> int:
    """Write a synthetic corpus as a category-per-folder text tree plus its embedding file."""
    corpus = synthetic_corpus(k=args.classes, n_per_class=args.per_class, overlap=args.overlap,
                              doc_len=args.doc_len, seed=args.seed or 0)
    counters = [0] * len(corpus.class_names)
    for text, label in zip(corpus.documents, corpus.labels):
        folder = os.path.join(args.out, corpus.class_names[label])
        os.makedirs(folder, exist_ok=True)
        with open(os.path.join(folder, f"{counters[label]:05d}.txt"), "w", encoding="utf-8") as f:
            f.write(text)
        counters[label] += 1
    corpus.embeddings.save(os.path.join(args.out, "embeddings.txt"), format="glove_text")
    logger.info("synthetic corpus written: path = {}, documents = {}", args.out, len(corpus.documents))
    return 0


def _add_corpus_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", help="directory with one sub-directory of .txt files per category")
    parser.add_argument("--classes", type=int, default=5, help="synthetic corpus: number of categories")
    parser.add_argument("--per-class", type=int, default=200, help="synthetic corpus: documents per category")
    parser.add_argument("--overlap", type=float, default=0.2, help="synthetic corpus: share of shared words")
    parser.add_argument("--doc-len", type=int, default=120, help="synthetic corpus: words per document")
    parser.add_argument("--embeddings", help="word embedding file")
    parser.add_argument("--embeddings-format", choices=FORMATS, default="glove_text")


def _add_settings_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--settings", help="JSON file of training settings")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one training setting")
    parser.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="doccategorizer", description="Document categorization service and tools")
    parser.add_argument("--log-level", default="INFO")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the REST service")
    serve.add_argument("--config", help="service config file")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.set_defaults(func=cmd_serve)

    train = sub.add_parser("train", help="train a classifier offline and keep its best epoch")
    _add_corpus_arguments(train)
    _add_settings_arguments(train)
    train.add_argument("--trainer", choices=("cnn", "svm"), default="cnn")
    train.add_argument("--out", required=True, help="output directory")
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("evaluate", help="cross-validate a trainer or run an experiment sweep")
    _add_corpus_arguments(evaluate)
    _add_settings_arguments(evaluate)
    evaluate.add_argument("--trainer", choices=("cnn", "svm"), default="cnn")
    evaluate.add_argument("--runs", type=int, default=5, help="Monte Carlo runs")
    evaluate.add_argument("--folds", type=int, help="use n-fold cross-validation instead")
    evaluate.add_argument("--workers", type=int, default=1)
    evaluate.add_argument("--experiment", choices=("categories", "documents", "timesteps"))
    evaluate.add_argument("--values", default="2,5,10", help="comma separated sweep values")
    evaluate.add_argument("--trainers", default="cnn,svm", help="comma separated trainers for a sweep")
    evaluate.add_argument("--out", help="result file (.json for cross-validation, .csv for experiments)")
    evaluate.set_defaults(func=cmd_evaluate)

    plot = sub.add_parser("plot", help="plot a training statistics CSV")
    plot.add_argument("--stats", required=True)
    plot.add_argument("--out", required=True)
    plot.add_argument("--title")
    plot.set_defaults(func=cmd_plot)

    synth = sub.add_parser("synth", help="write a synthetic text corpus and embeddings")
    synth.add_argument("--out", required=True)
    synth.add_argument("--classes", type=int, default=5)
    synth.add_argument("--per-class", type=int, default=200)
    synth.add_argument("--overlap", type=float, default=0.2)
    synth.add_argument("--doc-len", type=int, default=120)
    synth.add_argument("--seed", type=int)
    synth.set_defaults(func=cmd_synth)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command != "serve":
        configure_logging(args.log_level)
    try:
        return args.func(args)
    except CategorizerError as e:
        logger.error("{}", describe(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
