import json

import numpy as np
import pytest

from emotensity.bws import Judgment, aggregate_scores, load_tuples_jsonl, save_judgments_jsonl
from emotensity.cli import main
from emotensity.crosslingual import AlignmentMap
from emotensity.data_model import load_embeddings

from test_harness import bow_workspace, embedding_workspace, lexicon_signal_workspace


def test_exit_codes(tmp_path):
    assert main(["no-such-command"]) == 1
    assert main([]) == 1
    assert main(["--help"]) == 0
    assert main(["score"]) == 1  # missing required options
    assert main(["score", "--tuples", str(tmp_path / "absent.jsonl"), "--judgments", "x"]) == 2
    bad_config = tmp_path / "broken.json"
    bad_config.write_text("{not json", encoding="utf-8")
    assert main(["score", "--config", str(bad_config)]) == 1


def test_tuples_score_reliability_pipeline(tmp_path, capsys):
    items = tmp_path / "items.tsv"
    ids = [f"i{k:02d}" for k in range(16)]
    items.write_text("".join(f"{i}\ttext {i}\tfear\n" for i in ids), encoding="utf-8")
    tuples_path = tmp_path / "tuples.jsonl"
    assert (
        main(
            [
                "tuples", "--items", str(items), "--emotion", "fear",
                "--appearances", "2", "--seed", "5", "--output", str(tuples_path),
            ]
        )
        == 0
    )
    tuples = load_tuples_jsonl(tuples_path)
    assert len(tuples) == 8

    judgments = []
    for t in tuples:
        ranked = sorted(t.item_ids)
        for annotator in ("u1", "u2"):
            judgments.append(
                Judgment(tuple_id=t.tuple_id, annotator_id=annotator, best=ranked[-1], worst=ranked[0])
            )
    judgments_path = tmp_path / "judgments.jsonl"
    save_judgments_jsonl(judgments, judgments_path)

    capsys.readouterr()
    assert (
        main(["score", "--tuples", str(tuples_path), "--judgments", str(judgments_path)]) == 0
    )
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0] == "item_id\tscore\traw\tappearances"
    table = aggregate_scores(tuples, judgments)
    assert len(lines) == 1 + len(table.scores)
    first_id, first_score = lines[1].split("\t")[:2]
    assert float(first_score) == table.scores[first_id]

    assert (
        main(
            [
                "reliability", "--tuples", str(tuples_path), "--judgments", str(judgments_path),
                "--iterations", "10", "--seed", "3",
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    assert "pearson_mean\t1" in out


def test_featurize_train_predict_eval_flow(tmp_path, capsys):
    train, test = bow_workspace(tmp_path, n=60)
    vec_path = tmp_path / "vec.json"
    model_path = tmp_path / "model.json"
    preds_path = tmp_path / "preds.tsv"

    assert main(["featurize", "--train", str(train), "--bow", "--output", str(vec_path)]) == 0
    assert (
        main(["train", "--train", str(train), "--vectorizer", str(vec_path), "--output", str(model_path)])
        == 0
    )
    assert (
        main(
            [
                "predict", "--input", str(test), "--vectorizer", str(vec_path),
                "--model", str(model_path), "--clip", "--output", str(preds_path),
            ]
        )
        == 0
    )
    lines = preds_path.read_text(encoding="utf-8").strip().split("\n")
    assert lines[0] == "id\tprediction"
    assert len(lines) == 61
    for line in lines[1:]:
        value = float(line.split("\t")[1])
        assert 0.0 <= value <= 1.0

    capsys.readouterr()
    report = tmp_path / "eval.json"
    assert (
        main(
            [
                "eval", "--test", str(test), "--vectorizer", str(vec_path),
                "--model", str(model_path), "--output", str(report),
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    assert out.startswith("pearson\t")
    doc = json.loads(report.read_text(encoding="utf-8"))
    assert doc["pearson"] >= 0.9


def test_featurize_requires_embeddings_at_reload(tmp_path):
    train, test = bow_workspace(tmp_path, n=20)
    emb_path = tmp_path / "emb.txt"
    emb_path.write_text("2 2\nword0 1 0\nword1 0 1\n", encoding="utf-8")
    vec_path = tmp_path / "vec_emb.json"
    assert (
        main(["featurize", "--train", str(train), "--embeddings", str(emb_path), "--output", str(vec_path)])
        == 0
    )
    model_path = tmp_path / "m.json"
    # vectorizer uses embeddings, so reloading without the table must fail validation
    assert (
        main(["train", "--train", str(train), "--vectorizer", str(vec_path), "--output", str(model_path)])
        == 1
    )
    assert (
        main(
            [
                "train", "--train", str(train), "--vectorizer", str(vec_path),
                "--embeddings", str(emb_path), "--output", str(model_path),
            ]
        )
        == 0
    )


def test_align_writes_map_and_mapped_table(tmp_path, capsys):
    _, _, emb, dictionary, table = embedding_workspace(tmp_path)
    map_path = tmp_path / "alignment.json"
    mapped_path = tmp_path / "mapped.txt"
    assert (
        main(
            [
                "align", "--source", str(emb), "--target", str(emb),
                "--dictionary", str(dictionary), "--output", str(map_path),
                "--mapped-output", str(mapped_path),
            ]
        )
        == 0
    )
    out = capsys.readouterr().out
    assert "aligned d=6 with 30 pairs (0 dropped)" in out
    alignment = AlignmentMap.load(map_path)
    assert np.linalg.norm(alignment.W - np.eye(6)) < 1e-6
    mapped = load_embeddings(mapped_path)
    assert len(mapped) == len(table)


def test_blse_subcommand(tmp_path, capsys):
    train, test, emb, dictionary, _ = embedding_workspace(tmp_path, n_items=30)
    dev = tmp_path / "dev.tsv"
    dev.write_bytes(train.read_bytes())
    out_path = tmp_path / "blse.json"
    assert (
        main(
            [
                "blse", "--train", str(train), "--dev", str(dev),
                "--source-embeddings", str(emb), "--target-embeddings", str(emb),
                "--dictionary", str(dictionary), "--epochs", "10", "--output", str(out_path),
            ]
        )
        == 0
    )
    assert "best epoch" in capsys.readouterr().out
    assert out_path.exists()


def test_run_subcommand_with_config_and_seed_override(tmp_path, capsys):
    train, test = bow_workspace(tmp_path, n=40)
    config_path = tmp_path / "experiment.json"
    config_path.write_text(
        json.dumps(
            {
                "method": "mt_bow",
                "emotion": "anger",
                "train": "train.tsv",
                "test": "test.tsv",
                "seed": 1,
            }
        ),
        encoding="utf-8",
    )
    assert main(["run", "--config", str(config_path)]) == 0
    first = capsys.readouterr().out
    assert first.startswith("mt_bow\tanger\tpearson=")
    assert main(["run", "--config", str(config_path), "--seed", "2"]) == 0
    second = capsys.readouterr().out
    assert second.startswith("mt_bow\tanger\tpearson=")
    assert main(["run"]) == 1  # config is mandatory here


def test_ablate_subcommand(tmp_path, capsys):
    config = lexicon_signal_workspace(tmp_path)
    doc = config.to_json_dict()
    config_path = tmp_path / "ablation.json"
    config_path.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["ablate", "--config", str(config_path), "--groups", "embs,ngrams"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("ALL\t")
    assert lines[1].startswith("-embs\t")
    assert lines[2].startswith("-ngrams\t")


def test_error_tally_subcommand(tmp_path, capsys):
    records_path = tmp_path / "records.jsonl"
    records_path.write_text(
        json.dumps({"tweet_id": "t1", "system": "mt", "language": "ca", "flags": ["hashtags", "slang"]})
        + "\n"
        + json.dumps({"tweet_id": "t2", "system": "mt", "language": "ca", "flags": ["hashtags"]})
        + "\n",
        encoding="utf-8",
    )
    assert main(["error-tally", "--records", str(records_path)]) == 0
    out = capsys.readouterr().out
    lines = out.strip().split("\n")
    assert lines[0].startswith("language\tsystem\thashtags")
    ca_mt = lines[1].split("\t")
    assert ca_mt[:3] == ["ca", "mt", "2"]
    assert ca_mt[-1] == "3"


def test_config_file_supplies_defaults_and_flags_win(tmp_path, capsys):
    items = tmp_path / "items.tsv"
    ids = [f"i{k:02d}" for k in range(8)]
    items.write_text("".join(f"{i}\ttext {i}\tjoy\n" for i in ids), encoding="utf-8")
    out_a = tmp_path / "a.jsonl"
    out_b = tmp_path / "b.jsonl"
    config_path = tmp_path / "defaults.json"
    config_path.write_text(
        json.dumps(
            {"items": str(items), "emotion": "joy", "appearances": 1, "output": str(out_a)}
        ),
        encoding="utf-8",
    )
    assert main(["tuples", "--config", str(config_path)]) == 0
    assert out_a.exists()
    assert main(["tuples", "--config", str(config_path), "--output", str(out_b)]) == 0
    assert out_b.exists()
    assert load_tuples_jsonl(out_a) == load_tuples_jsonl(out_b)
