import dataclasses
import json
import string

import numpy as np
import pytest

from emotensity.crosslingual import preprocess_embeddings
from emotensity.data_model import EmbeddingTable, Emotion, Split, save_embeddings, save_wassa_tsv
from emotensity.errors import ConfigError, ValidationError
from emotensity.harness import (
    ABLATION_GROUPS,
    ERROR_CATEGORIES,
    AblationSpec,
    ErrorRecord,
    ExperimentConfig,
    load_error_records_jsonl,
    run_ablation,
    run_experiment,
    save_error_records_jsonl,
    tally_errors,
)

from synthdata import make_corpus


def write_corpus(path, texts, golds, emotion=Emotion.ANGER, split=Split.TRAIN, language="en"):
    save_wassa_tsv(make_corpus(texts, golds=golds, emotion=emotion, split=split, language=language), path)
    return path


def bow_workspace(tmp_path, n=100, seed=17):
    """Unigram-predictable corpus: labels are a linear read-out of shared
    vocabulary counts, so a bag-of-words model can recover them."""
    rng = np.random.Generator(np.random.PCG64(seed))
    vocab = [f"word{k}" for k in range(30)]
    weight = {w: float(rng.uniform(0, 1)) for w in vocab}
    texts, golds = [], []
    for _ in range(n):
        chosen = [vocab[int(j)] for j in rng.choice(len(vocab), size=4, replace=False)]
        texts.append(" ".join(chosen))
        golds.append(float(np.mean([weight[w] for w in chosen])))
    train = write_corpus(tmp_path / "train.tsv", texts, golds)
    test = write_corpus(tmp_path / "test.tsv", texts, golds, split=Split.TEST)
    return train, test


def random_word(rng, k=6):
    return "".join(str(c) for c in rng.choice(list(string.ascii_lowercase), size=k))


def lexicon_signal_workspace(tmp_path, seed=13):
    """Labels depend only on the emotion lexicon: every word occurs in exactly
    one item and train/test vocabularies are disjoint, so n-gram features
    cannot generalize while the lexicon covers both sides."""
    rng = np.random.Generator(np.random.PCG64(seed))
    words = []
    seen = set()
    while len(words) < 480:
        w = random_word(rng)
        if w not in seen:
            seen.add(w)
            words.append(w)
    value = {w: float(rng.uniform(0, 1)) for w in words}
    noise = {w: float(rng.uniform(-1, 1)) for w in words}

    def build(chunk):
        texts, golds = [], []
        for i in range(0, len(chunk), 3):
            trio = chunk[i : i + 3]
            texts.append(" ".join(trio))
            golds.append(float(np.mean([value[w] for w in trio])))
        return texts, golds

    train_texts, train_golds = build(words[:240])
    test_texts, test_golds = build(words[240:])
    train = write_corpus(tmp_path / "train.tsv", train_texts, train_golds)
    test = write_corpus(tmp_path / "test.tsv", test_texts, test_golds, split=Split.TEST)

    emo = tmp_path / "emotion.tsv"
    emo.write_text("".join(f"{w}\tjoy\t{value[w]}\n" for w in words), encoding="utf-8")
    hashtag = tmp_path / "hashtag.tsv"
    hashtag.write_text("".join(f"{w}\tassoc\t{noise[w]}\n" for w in words), encoding="utf-8")
    sentiment = tmp_path / "sentiment.tsv"
    sentiment.write_text("".join(f"{w}\tvalence\t0.0\n" for w in words), encoding="utf-8")

    emb = tmp_path / "emb.txt"
    save_embeddings(EmbeddingTable(3, {f"qq{k}": np.array([1.0, 0.0, float(k)]) for k in range(4)}), emb)

    return dataclasses.replace(
        ExperimentConfig(
            method="mono",
            emotion=Emotion.ANGER,
            train_path=train,
            test_path=test,
            source_embeddings_path=emb,
            lexicon_paths=(("hashtag", hashtag), ("emotion", emo), ("sentiment", sentiment)),
            seed=seed,
        )
    )


def embedding_workspace(tmp_path, seed=29, n_items=60):
    """Corpus whose labels are linear in averaged word vectors."""
    rng = np.random.Generator(np.random.PCG64(seed))
    dim, vocab_n = 6, 30
    vectors = rng.normal(0, 1, (vocab_n, dim))
    vocab = [f"v{k}" for k in range(vocab_n)]
    table = EmbeddingTable(dim, {w: vectors[i] for i, w in enumerate(vocab)})
    c = rng.normal(0, 1, dim) * 0.1
    texts, golds = [], []
    for _ in range(n_items):
        idx = rng.choice(vocab_n, size=3, replace=False)
        texts.append(" ".join(vocab[int(j)] for j in idx))
        golds.append(float(np.clip(0.5 + vectors[idx].mean(axis=0) @ c, 0.02, 0.98)))
    train = write_corpus(tmp_path / "train.tsv", texts, golds)
    test = write_corpus(tmp_path / "test.tsv", texts, golds, split=Split.TEST)
    emb = tmp_path / "emb.txt"
    save_embeddings(table, emb)
    dictionary = tmp_path / "dict.tsv"
    dictionary.write_text("".join(f"{w}\t{w}\n" for w in vocab), encoding="utf-8")
    return train, test, emb, dictionary, table


def test_config_invariants():
    kwargs = dict(emotion=Emotion.ANGER, train_path="t.tsv", test_path="e.tsv")
    with pytest.raises(ConfigError):
        ExperimentConfig(method="mystery", **kwargs)
    with pytest.raises(ConfigError):
        ExperimentConfig(method="mt_bow", source_embeddings_path="emb.txt", **kwargs)
    with pytest.raises(ConfigError):
        ExperimentConfig(method="unsup_bow", lexicon_paths=(("emotion", "l.tsv"),), **kwargs)
    with pytest.raises(ConfigError, match="dictionary"):
        ExperimentConfig(method="cwe", source_embeddings_path="a", target_embeddings_path="b", **kwargs)
    with pytest.raises(ConfigError, match="dev"):
        ExperimentConfig(
            method="blse", source_embeddings_path="a", target_embeddings_path="b",
            dictionary_path="d", **kwargs,
        )
    with pytest.raises(ConfigError):
        ExperimentConfig(method="mono", disabled_groups=frozenset({"nope"}), **kwargs)


def test_config_json_round_trip(tmp_path):
    config = lexicon_signal_workspace(tmp_path)
    doc = config.to_json_dict()
    back = ExperimentConfig.from_json_dict(doc)
    assert back == config


def test_config_relative_paths_and_list_lexicons(tmp_path):
    doc = {
        "method": "mono",
        "emotion": "joy",
        "train": "train.tsv",
        "test": "sub/test.tsv",
        "lexicons": ["lex/emotion.tsv"],
        "disabled_groups": ["char"],
    }
    config = ExperimentConfig.from_json_dict(doc, base_dir=tmp_path)
    assert config.train_path == tmp_path / "train.tsv"
    assert config.test_path == tmp_path / "sub" / "test.tsv"
    assert config.lexicon_paths == (("emotion", tmp_path / "lex" / "emotion.tsv"),)
    assert config.disabled_groups == frozenset({"char"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json_dict({"method": "mono", "emotion": "joy"})


def test_bow_self_evaluation(tmp_path):
    train, test = bow_workspace(tmp_path)
    config = ExperimentConfig(
        method="mt_bow", emotion=Emotion.ANGER, train_path=train, test_path=test, seed=1
    )
    result = run_experiment(config)
    assert result.row.pearson >= 0.9
    assert result.row.n_train == 100 and result.row.n_test == 100
    assert len(result.predictions) == 100


def test_emotion_mismatch_rejected(tmp_path):
    train, test = bow_workspace(tmp_path, n=10)
    config = ExperimentConfig(
        method="mt_bow", emotion=Emotion.JOY, train_path=train, test_path=test
    )
    with pytest.raises(ConfigError, match="train"):
        run_experiment(config)


def test_run_artifacts_reproducible(tmp_path):
    train, test = bow_workspace(tmp_path, n=40)
    rows = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        config = ExperimentConfig(
            method="mono", emotion=Emotion.ANGER, train_path=train, test_path=test,
            seed=9, output_dir=out,
        )
        rows.append(run_experiment(config).row)
        assert (out / "report.tsv").exists()
        assert (out / "predictions.tsv").exists()
        assert json.loads((out / "config.json").read_text())["seed"] == 9
    assert rows[0] == rows[1]
    for name in ("report.tsv", "predictions.tsv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_translated_test_methods_share_code_path(tmp_path):
    train, test = bow_workspace(tmp_path, n=60)
    other = tmp_path / "test_unsup.tsv"
    other.write_bytes(test.read_bytes())
    results = []
    for method, path in (("mt_full", test), ("unsup_full", other)):
        config = ExperimentConfig(
            method=method, emotion=Emotion.ANGER, train_path=train, test_path=path, seed=2
        )
        results.append(run_experiment(config))
    assert results[0].row.pearson == results[1].row.pearson
    assert results[0].row.spearman == results[1].row.spearman
    assert results[0].predictions == results[1].predictions


def test_cwe_degenerate_equals_mono_on_preprocessed_table(tmp_path):
    train, test, emb, dictionary, table = embedding_workspace(tmp_path)
    cwe = ExperimentConfig(
        method="cwe", emotion=Emotion.ANGER, train_path=train, test_path=test,
        source_embeddings_path=emb, target_embeddings_path=emb, dictionary_path=dictionary,
        seed=3,
    )
    cwe_result = run_experiment(cwe)

    pre_path = tmp_path / "emb_pre.txt"
    save_embeddings(preprocess_embeddings(table), pre_path)
    mono = ExperimentConfig(
        method="mono", emotion=Emotion.ANGER, train_path=train, test_path=test,
        source_embeddings_path=pre_path, disabled_groups=frozenset({"ngrams", "char"}),
        seed=3,
    )
    mono_result = run_experiment(mono)
    assert cwe_result.row.pearson == pytest.approx(mono_result.row.pearson, abs=1e-10)
    assert cwe_result.row.spearman == pytest.approx(mono_result.row.spearman, abs=1e-10)
    for (ida, golda, pa), (idb, goldb, pb) in zip(cwe_result.predictions, mono_result.predictions):
        assert ida == idb and golda == goldb
        assert pa == pytest.approx(pb, abs=1e-10)


def test_blse_runs_end_to_end(tmp_path):
    train, test, emb, dictionary, table = embedding_workspace(tmp_path, n_items=40)
    dev = tmp_path / "dev.tsv"
    dev.write_bytes((tmp_path / "train.tsv").read_bytes())
    config = ExperimentConfig(
        method="blse", emotion=Emotion.ANGER, train_path=train, test_path=test,
        dev_path=dev, source_embeddings_path=emb, target_embeddings_path=emb,
        dictionary_path=dictionary, seed=4, epochs=30,
    )
    result = run_experiment(config)
    assert result.row.method == "blse"
    assert -1.0 <= result.row.pearson <= 1.0
    assert len(result.predictions) == 40


def test_ablation_baseline_matches_run_experiment(tmp_path):
    config = lexicon_signal_workspace(tmp_path)
    spec = AblationSpec(groups=("ngrams", "emo-lex"))
    result = run_ablation(config, spec)
    direct = run_experiment(config)
    assert result.baseline == direct.row
    assert [row.group for row in result.rows] == ["ngrams", "emo-lex"]
    for row in result.rows:
        assert row.delta == pytest.approx(row.pearson - result.baseline.pearson, abs=1e-15)


def test_ablation_lexicon_collapse(tmp_path):
    config = lexicon_signal_workspace(tmp_path)
    result = run_ablation(config)
    assert result.baseline.pearson > 0.8
    by_group = {row.group: row for row in result.rows}
    assert set(by_group) == set(ABLATION_GROUPS)
    assert by_group["emo-lex"].pearson < 0.2
    assert by_group["all-lex"].pearson < 0.2
    for group in ("ngrams", "char", "embs", "hashtag-lex", "sent-lex"):
        assert by_group[group].pearson > 0.8, group
    # embeddings cover no corpus token, so ablating them changes nothing
    assert abs(by_group["embs"].delta) < 1e-12


def test_ablation_writes_table(tmp_path):
    config = dataclasses.replace(lexicon_signal_workspace(tmp_path), output_dir=tmp_path / "out")
    result = run_ablation(config, AblationSpec(groups=("embs",)))
    text = (tmp_path / "out" / "ablation.tsv").read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "group\tpearson\tdelta"
    assert lines[1].startswith("ALL\t")
    assert lines[2].startswith("-embs\t")
    assert len(lines) == 3
    assert result.rows[0].group == "embs"


def test_ablation_rejects_bad_bases(tmp_path):
    train, test = bow_workspace(tmp_path, n=12)
    bow = ExperimentConfig(method="mt_bow", emotion=Emotion.ANGER, train_path=train, test_path=test)
    with pytest.raises(ConfigError):
        run_ablation(bow)
    config = lexicon_signal_workspace(tmp_path)
    pre_disabled = dataclasses.replace(config, disabled_groups=frozenset({"char"}))
    with pytest.raises(ConfigError):
        run_ablation(pre_disabled)
    no_hashtag = dataclasses.replace(
        config, lexicon_paths=tuple(p for p in config.lexicon_paths if p[0] != "hashtag")
    )
    with pytest.raises(ConfigError, match="hashtag"):
        run_ablation(no_hashtag, AblationSpec(groups=("hashtag-lex",)))
    no_embs = dataclasses.replace(config, source_embeddings_path=None)
    with pytest.raises(ConfigError, match="embed"):
        run_ablation(no_embs, AblationSpec(groups=("embs",)))


def test_ablation_spec_requires_known_groups():
    with pytest.raises(ValidationError):
        AblationSpec(groups=("ngrams", "mystery"))


def test_error_record_validation():
    with pytest.raises(ValidationError):
        ErrorRecord(tweet_id="", system="mt", language="ca", flags=frozenset({"slang"}))
    with pytest.raises(ValidationError):
        ErrorRecord(tweet_id="t", system="google", language="ca", flags=frozenset({"slang"}))
    with pytest.raises(ValidationError):
        ErrorRecord(tweet_id="t", system="mt", language="fr", flags=frozenset({"slang"}))
    with pytest.raises(ValidationError):
        ErrorRecord(tweet_id="t", system="mt", language="ca", flags=frozenset())
    with pytest.raises(ValidationError):
        ErrorRecord(tweet_id="t", system="mt", language="ca", flags=frozenset({"typo"}))


def test_tally_empty_is_all_zero():
    tally = tally_errors([])
    for language in ("ca", "es"):
        for system in ("mt", "unsup"):
            assert tally.total(language, system) == 0
            for category in ERROR_CATEGORIES:
                assert tally.count(language, system, category) == 0


def test_tally_three_records_two_flags_each():
    records = [
        ErrorRecord("t1", "mt", "ca", frozenset({"hashtags", "slang"})),
        ErrorRecord("t2", "mt", "ca", frozenset({"hashtags", "deletions"})),
        ErrorRecord("t3", "mt", "ca", frozenset({"lexical", "names"})),
    ]
    tally = tally_errors(records)
    assert tally.count("ca", "mt", "hashtags") == 2
    assert tally.count("ca", "mt", "slang") == 1
    assert tally.count("ca", "mt", "deletions") == 1
    assert tally.count("ca", "mt", "lexical") == 1
    assert tally.count("ca", "mt", "names") == 1
    assert tally.total("ca", "mt") == 6
    assert tally.total("es", "mt") == 0


def test_tally_counts_distinct_tweets_per_category():
    records = [
        ErrorRecord("t1", "unsup", "es", frozenset({"untranslated"})),
        ErrorRecord("t1", "unsup", "es", frozenset({"untranslated", "numbers"})),
    ]
    tally = tally_errors(records)
    assert tally.count("es", "unsup", "untranslated") == 1
    assert tally.count("es", "unsup", "numbers") == 1
    assert tally.total("es", "unsup") == 2


def test_tally_tsv_layout():
    text = tally_errors([ErrorRecord("t", "mt", "ca", frozenset({"hashtags"}))]).to_tsv()
    lines = text.strip().split("\n")
    assert len(lines) == 5
    assert lines[0].split("\t") == ["language", "system", *ERROR_CATEGORIES, "total"]
    assert lines[1].split("\t")[:2] == ["ca", "mt"]
    assert lines[1].split("\t")[2] == "1"


def test_error_records_jsonl_round_trip(tmp_path):
    records = (
        ErrorRecord("t1", "mt", "ca", frozenset({"hashtags", "slang"})),
        ErrorRecord("t2", "unsup", "es", frozenset({"numbers"})),
    )
    path = tmp_path / "records.jsonl"
    save_error_records_jsonl(records, path)
    assert load_error_records_jsonl(path) == records
