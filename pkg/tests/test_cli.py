import json
import os

import pandas as pd
import pytest

from doccategorizer.cli import build_parser, main
from doccategorizer.evaluation import read_json

SMALL = ["--classes", "3", "--per-class", "12", "--doc-len", "20", "--seed", "1"]


def test_synth_writes_a_loadable_corpus(tmp_path):
    out = str(tmp_path / "corpus")
    assert main(["synth", "--out", out] + SMALL) == 0
    assert sorted(d for d in os.listdir(out) if os.path.isdir(os.path.join(out, d))) == ["class0", "class1", "class2"]
    assert len(os.listdir(os.path.join(out, "class0"))) == 12
    assert os.path.isfile(os.path.join(out, "embeddings.txt"))


def test_train_svm_from_a_folder_corpus(tmp_path):
    corpus = str(tmp_path / "corpus")
    main(["synth", "--out", corpus] + SMALL)
    out = str(tmp_path / "model")
    assert main(["train", "--trainer", "svm", "--corpus", corpus, "--out", out, "--set", "svm_epochs=3"]) == 0
    with open(os.path.join(out, "classes.json"), encoding="utf-8") as f:
        assert json.load(f) == ["class0", "class1", "class2"]
    assert read_json(os.path.join(out, "metrics.json")).n > 0
    assert os.path.isfile(os.path.join(out, "classifier", "classifier.json"))
    assert pd.read_csv(os.path.join(out, "statistics.csv"))["epoch"].tolist() == [2]


def test_train_cnn_and_plot(tmp_path):
    out = str(tmp_path / "model")
    settings = tmp_path / "settings.json"
    settings.write_text(json.dumps({"max_timesteps": 20, "batch_size": 8, "filter_count": 3, "filter_lens": [1, 2],
                                    "dense_size": 6, "prefetch": False}))
    code = main(["train", "--trainer", "cnn", "--out", out, "--settings", str(settings), "--set", "epochs=2"]
                + SMALL)
    assert code == 0
    statistics = os.path.join(out, "statistics.csv")
    assert pd.read_csv(statistics)["epoch"].tolist() == [0, 1]
    image = str(tmp_path / "curves.png")
    assert main(["plot", "--stats", statistics, "--out", image]) == 0
    assert os.path.getsize(image) > 0


def test_evaluate_n_fold(tmp_path, capsys):
    out = str(tmp_path / "cv.json")
    code = main(["evaluate", "--trainer", "svm", "--folds", "3", "--out", out, "--set", "svm_epochs=2"] + SMALL)
    assert code == 0
    assert len(read_json(out).runs) == 3
    assert os.path.isfile(str(tmp_path / "cv.csv"))
    assert "macro_f1" in capsys.readouterr().out


def test_categorizer_errors_exit_with_2(tmp_path):
    assert main(["train", "--out", str(tmp_path), "--set", "epochs=0"] + SMALL) == 2
    assert main(["train", "--out", str(tmp_path), "--set", "no_equals_sign"] + SMALL) == 2


def test_subcommand_is_required():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
