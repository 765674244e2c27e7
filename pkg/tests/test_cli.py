"""End-to-end command-line pipeline tests."""

import os
import subprocess
import sys

import numpy as np
import pytest

from groupdistill import load_corpus, load_groups, load_scores, save_corpus, save_pairs
from groupdistill.cli import main
from groupdistill.data import Corpus
from groupdistill.io import load_ground_truth
from groupdistill.scoring import score_corpus

SYNTH_FLAGS = ["--k-classes", "4", "--elements-per-class", "30",
               "--groups-per-class", "6", "--d-emb", "8", "--seed", "7"]
FAST_DISTILL = ["--hidden", "8", "--epochs", "5", "--batch-size", "16"]


def run(*argv):
    code = main(list(argv))
    assert code == 0, f"command failed: {argv}"


def make_pairs_file(corpus_path, pairs_path):
    labels = load_corpus(corpus_path).group_labels()
    gids = sorted(labels)
    pairs = [(a, b, labels[a] == labels[b])
             for i, a in enumerate(gids) for b in gids[i + 1:]]
    save_pairs(pairs, pairs_path)


def test_synth_writes_corpus_and_truth(tmp_path, capsys):
    corpus_path = tmp_path / "corpus.csv"
    truth_path = tmp_path / "truth.csv"
    run("synth", "--output", str(corpus_path),
        "--ground-truth", str(truth_path), *SYNTH_FLAGS)
    out = capsys.readouterr().out
    assert out.startswith("synth: 120 elements, 4 classes, 24 groups")
    corpus = load_corpus(corpus_path)
    assert corpus.size == 120 and corpus.d_emb == 8
    truth = load_ground_truth(truth_path)
    assert set(truth) == set(corpus.element_ids)


def test_synth_binary_format(tmp_path):
    path = tmp_path / "corpus.bin"
    run("synth", "--output", str(path), *SYNTH_FLAGS)
    assert path.read_bytes()[:4] == b"DDL1"
    assert load_corpus(path).size == 120


def test_score_matches_library(tmp_path):
    corpus_path = tmp_path / "corpus.csv"
    scores_path = tmp_path / "scores.csv"
    run("synth", "--output", str(corpus_path), *SYNTH_FLAGS)
    run("score", "--input", str(corpus_path), "--output", str(scores_path))
    loaded = load_scores(scores_path)
    expected = score_corpus(load_corpus(corpus_path))
    assert [r.element_id for r in loaded] == [r.element_id for r in expected]
    assert all(a.d_score == b.d_score for a, b in zip(loaded, expected))
    assert all(r.d_hat is None for r in loaded)


def test_full_pipeline(tmp_path, capsys):
    corpus = tmp_path / "corpus.csv"
    scores = tmp_path / "scores.csv"
    model = tmp_path / "model.bin"
    groups = tmp_path / "groups.csv"
    pairs = tmp_path / "pairs.csv"
    report = tmp_path / "report.csv"
    bench_out = tmp_path / "bench.csv"

    run("synth", "--output", str(corpus), *SYNTH_FLAGS)
    run("score", "--input", str(corpus), "--output", str(scores))
    run("distill", "--input", str(corpus), "--scores", str(scores),
        "--model", str(model), "--report", str(tmp_path / "loss.csv"),
        *FAST_DISTILL)
    run("aggregate", "--input", str(corpus), "--model", str(model),
        "--output", str(groups))
    make_pairs_file(corpus, pairs)
    run("eval", "--input", str(groups), "--pairs", str(pairs),
        "--output", str(report))
    run("bench", "--input", str(corpus), "--model", str(model),
        "--output", str(bench_out))

    out = capsys.readouterr().out
    assert "distill: 120 train elements" in out
    assert "aggregate: 24 groups" in out
    assert "accuracy" in out

    rows = load_groups(groups)
    assert len(rows) == 24
    assert all(r.feature.shape == (8,) for r in rows)

    loss_lines = (tmp_path / "loss.csv").read_text().splitlines()
    assert loss_lines[0] == "epoch,mean_loss" and len(loss_lines) == 6

    report_lines = report.read_text().splitlines()
    assert report_lines[0].startswith("genuine,impostor,accuracy,threshold")

    bench_lines = bench_out.read_text().splitlines()
    assert bench_lines[0].startswith("strategy,")
    assert [line.split(",")[0] for line in bench_lines[1:]] == [
        "average", "top1", "ddl_no_rescale", "ddl"]


def test_average_strategy_needs_no_model(tmp_path):
    corpus = tmp_path / "corpus.csv"
    groups = tmp_path / "groups.csv"
    run("synth", "--output", str(corpus), *SYNTH_FLAGS)
    run("aggregate", "--input", str(corpus), "--output", str(groups),
        "--strategy", "average")
    assert len(load_groups(groups)) == 24


def test_ddl_without_model_fails(tmp_path, capsys):
    corpus = tmp_path / "corpus.csv"
    run("synth", "--output", str(corpus), *SYNTH_FLAGS)
    code = main(["aggregate", "--input", str(corpus),
                 "--output", str(tmp_path / "groups.csv")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("aggregate:") and "--model" in err


def test_distill_holdout_reports_loss(tmp_path, capsys):
    corpus = tmp_path / "corpus.csv"
    scores = tmp_path / "scores.csv"
    run("synth", "--output", str(corpus), *SYNTH_FLAGS)
    run("score", "--input", str(corpus), "--output", str(scores))
    run("distill", "--input", str(corpus), "--scores", str(scores),
        "--model", str(tmp_path / "model.bin"), "--holdout", "0.2",
        *FAST_DISTILL)
    out = capsys.readouterr().out
    assert "96 train elements" in out
    assert "holdout loss" in out and "(24 elements)" in out


def test_rerun_is_byte_identical(tmp_path):
    outputs = {}
    for name in ("first", "second"):
        d = tmp_path / name
        d.mkdir()
        run("synth", "--output", str(d / "corpus.csv"), *SYNTH_FLAGS)
        run("score", "--input", str(d / "corpus.csv"),
            "--output", str(d / "scores.csv"))
        run("distill", "--input", str(d / "corpus.csv"),
            "--scores", str(d / "scores.csv"),
            "--model", str(d / "model.bin"), *FAST_DISTILL)
        run("aggregate", "--input", str(d / "corpus.csv"),
            "--model", str(d / "model.bin"),
            "--output", str(d / "groups.csv"))
        outputs[name] = {
            f: (d / f).read_bytes()
            for f in ("corpus.csv", "scores.csv", "model.bin", "groups.csv")
        }
    assert outputs["first"] == outputs["second"]


def test_config_file_defaults_with_flag_override(tmp_path):
    config = tmp_path / "synth.cfg"
    config.write_text(
        "# synth defaults\n"
        "\n"
        "k_classes = 4\n"
        "elements_per_class = 30\n"
        "groups_per_class = 6\n"
        "d_emb = 8\n"
        "seed = 7\n"
    )
    from_config = tmp_path / "a.csv"
    overridden = tmp_path / "b.csv"
    run("synth", "--config", str(config), "--output", str(from_config))
    run("synth", "--config", str(config), "--output", str(overridden),
        "--elements-per-class", "20")
    assert load_corpus(from_config).size == 120
    corpus = load_corpus(overridden)  # explicit flag beats config value
    assert corpus.size == 80 and corpus.d_emb == 8


def test_config_unknown_key_fails(tmp_path, capsys):
    config = tmp_path / "synth.cfg"
    config.write_text("k_classes = 4\nbogus = 1\n")
    code = main(["synth", "--config", str(config),
                 "--output", str(tmp_path / "c.csv")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("synth:") and "bogus" in err


def test_config_without_equals_fails(tmp_path, capsys):
    config = tmp_path / "synth.cfg"
    config.write_text("k_classes\n")
    assert main(["synth", "--config", str(config),
                 "--output", str(tmp_path / "c.csv")]) == 1
    assert "line 1" in capsys.readouterr().err


def test_score_rejects_unlabeled_corpus(tmp_path, capsys):
    corpus = Corpus(
        element_ids=("a", "b"),
        group_ids=("g", "g"),
        labels=np.array([-1, -1]),
        raw_inputs=np.eye(2),
        embeddings=np.eye(2),
    )
    path = tmp_path / "unlabeled.csv"
    save_corpus(corpus, path)
    code = main(["score", "--input", str(path),
                 "--output", str(tmp_path / "scores.csv")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("score:") and "labeled" in err


def test_missing_input_file(tmp_path, capsys):
    code = main(["score", "--input", str(tmp_path / "nope.csv"),
                 "--output", str(tmp_path / "scores.csv")])
    assert code == 1
    assert capsys.readouterr().err.startswith("score:")


def test_argparse_errors_exit_2(tmp_path, capsys):
    assert main(["synth"]) == 2  # missing required --output
    assert main(["frobnicate"]) == 2  # unknown command
    assert main(["synth", "--output", str(tmp_path / "c.csv"),
                 "--noise-levels", "0.1,abc"]) == 2
    capsys.readouterr()  # swallow argparse usage text


def test_env_logging_goes_to_stderr(tmp_path):
    result = subprocess.run(
        [sys.executable, "-m", "groupdistill", "synth",
         "--output", str(tmp_path / "corpus.csv"), *SYNTH_FLAGS],
        capture_output=True, text=True,
        env={**os.environ, "DDL_LOG": "INFO"},
    )
    assert result.returncode == 0
    assert result.stdout.startswith("synth:")
    assert "INFO groupdistill" in result.stderr
    assert "wrote corpus" in result.stderr
