"""Command-line front end.

Subcommands: tuples, score, reliability, featurize, train, predict, eval,
align, blse, run, ablate, error-tally, serve. Every subcommand accepts
--seed and --config <json>; flags given on the command line win over config
values. Exit codes: 0 success, 1 validation/format error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from emotensity import bws, crosslingual, harness, svr
from emotensity.data_model import (
    Emotion,
    Split,
    format_float,
    load_annotation_items,
    load_bilingual_dictionary,
    load_embeddings,
    load_lexicon,
    load_wassa_tsv,
    save_embeddings,
)
from emotensity.errors import EmotensityError, ValidationError
from emotensity.features import FeatureConfig, FittedVectorizer, fit, transform, transform_corpus

__all__ = ["main", "build_parser"]


class _Options:
    """Merged view of CLI flags over config-file values."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict = {}
        if getattr(args, "config", None):
            with open(args.config, encoding="utf-8") as handle:
                loaded = json.load(handle)
            if not isinstance(loaded, dict):
                raise ValidationError("config file must hold a JSON object")
            self.config = loaded

    def get(self, name: str, default=None, required: bool = False):
        value = getattr(self.args, name.replace("-", "_"), None)
        if value is None:
            value = self.config.get(name, default)
        if required and value is None:
            raise ValidationError(f"missing required option --{name}")
        return value

    def seed(self) -> int:
        return int(self.get("seed", 0))


def _parse_lexicon_args(specs: Optional[Sequence[str]], options: _Options) -> list[tuple[str, Path]]:
    pairs: list[tuple[str, Path]] = []
    for spec in specs or []:
        name, sep, path = spec.partition("=")
        if sep:
            pairs.append((name, Path(path)))
        else:
            pairs.append((Path(spec).stem, Path(spec)))
    if not pairs:
        for name, path in (options.config.get("lexicons") or {}).items():
            pairs.append((name, Path(path)))
    return pairs


def _parse_range(raw, default: tuple[int, int]) -> tuple[int, int]:
    if raw is None:
        return default
    if isinstance(raw, (list, tuple)):
        low, high = raw
        return int(low), int(high)
    parts = str(raw).split(",")
    if len(parts) != 2:
        raise ValidationError(f"expected LOW,HIGH range, got {raw!r}")
    return int(parts[0]), int(parts[1])


def _load_vectorizer(options: _Options, vectorizer_path: str) -> FittedVectorizer:
    doc = json.loads(Path(vectorizer_path).read_text(encoding="utf-8"))
    embeddings = None
    if doc.get("config", {}).get("use_embeddings"):
        embeddings = load_embeddings(options.get("embeddings", required=True))
    lexicons = [load_lexicon(path, name=name) for name, path in _parse_lexicon_args(options.get("lexicon"), options)]
    return FittedVectorizer.from_json_dict(doc, embeddings=embeddings, lexicons=lexicons)


def _filter_tuples(tuples, emotion_raw: Optional[str]):
    if emotion_raw is None:
        return tuples
    emotion = Emotion.parse(emotion_raw)
    return [t for t in tuples if t.emotion == emotion]


# --- handlers --------------------------------------------------------------------


def _cmd_tuples(options: _Options) -> int:
    items = load_annotation_items(options.get("items", required=True), language=options.get("language", "en"))
    emotion = Emotion.parse(options.get("emotion", required=True))
    selected = [item.id for item in items if item.emotion == emotion]
    tuples = bws.generate_tuples(
        selected,
        appearances_per_item=int(options.get("appearances", 2)),
        seed=options.seed(),
        emotion=emotion,
        tuple_id_prefix=options.get("prefix"),
    )
    output = options.get("output", required=True)
    bws.save_tuples_jsonl(tuples, output)
    print(f"wrote {len(tuples)} tuples over {len(selected)} items to {output}")
    return 0


def _cmd_score(options: _Options) -> int:
    tuples = _filter_tuples(bws.load_tuples_jsonl(options.get("tuples", required=True)), options.get("emotion"))
    tuple_ids = {t.tuple_id for t in tuples}
    judgments = [
        j for j in bws.load_judgments_jsonl(options.get("judgments", required=True)) if j.tuple_id in tuple_ids
    ]
    table = bws.aggregate_scores(tuples, judgments)
    lines = ["item_id\tscore\traw\tappearances"]
    lines.extend(
        f"{item_id}\t{format_float(table.scores[item_id])}\t{format_float(table.raw[item_id])}"
        f"\t{table.appearances[item_id]}"
        for item_id in sorted(table.scores)
    )
    output = options.get("output")
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
        print(f"scored {len(table.scores)} items from {len(judgments)} judgments -> {output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_reliability(options: _Options) -> int:
    tuples = _filter_tuples(bws.load_tuples_jsonl(options.get("tuples", required=True)), options.get("emotion"))
    tuple_ids = {t.tuple_id for t in tuples}
    judgments = [
        j for j in bws.load_judgments_jsonl(options.get("judgments", required=True)) if j.tuple_id in tuple_ids
    ]
    summary = bws.split_half_reliability(
        tuples, judgments, iterations=int(options.get("iterations", 100)), seed=options.seed()
    )
    doc = {
        "pearson_mean": summary.pearson_mean,
        "pearson_std": summary.pearson_std,
        "spearman_mean": summary.spearman_mean,
        "spearman_std": summary.spearman_std,
        "iterations": summary.iterations,
    }
    output = options.get("output")
    if output:
        Path(output).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    for key, value in doc.items():
        print(f"{key}\t{format_float(value) if isinstance(value, float) else value}")
    return 0


def _feature_config_from_options(options: _Options, lexicon_names: Sequence[str]) -> FeatureConfig:
    if options.get("bow", False):
        return FeatureConfig(word_ngram_range=(1, 1), use_char_ngrams=False)
    return FeatureConfig(
        word_ngram_range=_parse_range(options.get("word-ngrams"), (1, 4)),
        char_ngram_range=_parse_range(options.get("char-ngrams"), (3, 5)),
        use_word_ngrams=not options.get("no-word-ngrams", False),
        use_char_ngrams=not options.get("no-char-ngrams", False),
        use_embeddings=options.get("embeddings") is not None,
        use_lexicons=tuple(lexicon_names),
        min_document_frequency=int(options.get("min-df", 1)),
    )


def _cmd_featurize(options: _Options) -> int:
    corpus = load_wassa_tsv(
        options.get("train", required=True), Split.TRAIN, language=options.get("language", "en")
    )
    lexicon_pairs = _parse_lexicon_args(options.get("lexicon"), options)
    lexicons = [load_lexicon(path, name=name) for name, path in lexicon_pairs]
    config = _feature_config_from_options(options, [name for name, _ in lexicon_pairs])
    embeddings = load_embeddings(options.get("embeddings")) if config.use_embeddings else None
    vectorizer = fit(corpus, config, embeddings=embeddings, lexicons=lexicons)
    output = options.get("output", required=True)
    vectorizer.save(output)
    blocks = ", ".join(f"{b.name}[{b.width}]" for b in vectorizer.block_layout)
    print(f"fitted vectorizer: {vectorizer.total_dim} dims ({blocks}) -> {output}")
    return 0


def _cmd_train(options: _Options) -> int:
    corpus = load_wassa_tsv(
        options.get("train", required=True), Split.TRAIN, language=options.get("language", "en")
    )
    vectorizer = _load_vectorizer(options, options.get("vectorizer", required=True))
    config = svr.SvrConfig(
        C=float(options.get("c", 100.0)),
        epsilon=float(options.get("epsilon", 0.1)),
        tolerance=float(options.get("tolerance", 1e-4)),
        max_iterations=int(options.get("max-iterations", 10_000)),
        seed=options.seed(),
    )
    model = svr.train(transform_corpus(vectorizer, corpus), corpus.gold_vector(), config)
    output = options.get("output", required=True)
    model.save(output)
    d = model.diagnostics
    print(
        f"trained on {len(corpus)} items: {d.passes} passes, "
        f"{'converged' if d.converged else 'iteration limit'}, "
        f"{model.weight_indices.size} nonzero weights -> {output}"
    )
    return 0


def _load_prediction_items(options: _Options):
    path = options.get("input", required=True)
    language = options.get("language", "en")
    if options.get("format", "wassa") == "items":
        return load_annotation_items(path, language=language)
    return load_wassa_tsv(path, Split.TEST, language=language).items


def _cmd_predict(options: _Options) -> int:
    items = _load_prediction_items(options)
    vectorizer = _load_vectorizer(options, options.get("vectorizer", required=True))
    model = svr.SvrModel.load(options.get("model", required=True))
    lines = ["id\tprediction"]
    for item in items:
        pred = svr.predict(model, transform(vectorizer, item))
        if options.get("clip", False):
            pred = min(1.0, max(0.0, pred))
        lines.append(f"{item.id}\t{format_float(pred)}")
    output = options.get("output")
    text = "\n".join(lines) + "\n"
    if output:
        Path(output).write_text(text, encoding="utf-8")
        print(f"predicted {len(items)} items -> {output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_eval(options: _Options) -> int:
    corpus = load_wassa_tsv(
        options.get("test", required=True), Split.TEST, language=options.get("language", "en")
    )
    vectorizer = _load_vectorizer(options, options.get("vectorizer", required=True))
    model = svr.SvrModel.load(options.get("model", required=True))
    p, s = svr.evaluate(model, corpus, vectorizer)
    print(f"pearson\t{format_float(p)}")
    print(f"spearman\t{format_float(s)}")
    output = options.get("output")
    if output:
        Path(output).write_text(json.dumps({"pearson": p, "spearman": s}) + "\n", encoding="utf-8")
    return 0


def _cmd_align(options: _Options) -> int:
    src = load_embeddings(options.get("source", required=True))
    tgt = load_embeddings(options.get("target", required=True))
    dictionary = load_bilingual_dictionary(options.get("dictionary", required=True))
    alignment = crosslingual.procrustes_align(src, tgt, dictionary)
    output = options.get("output", required=True)
    alignment.save(output)
    mapped_output = options.get("mapped-output")
    if mapped_output:
        save_embeddings(crosslingual.map_embeddings(alignment, src), mapped_output)
    print(
        f"aligned d={alignment.dim} with {alignment.used_pairs} pairs "
        f"({alignment.dropped_pairs} dropped) -> {output}"
    )
    return 0


def _cmd_blse(options: _Options) -> int:
    language = options.get("language", "en")
    train_corpus = load_wassa_tsv(options.get("train", required=True), Split.TRAIN, language=language)
    dev_corpus = load_wassa_tsv(options.get("dev", required=True), Split.DEV, language=language)
    model = crosslingual.train_blse(
        train_corpus,
        load_embeddings(options.get("source-embeddings", required=True)),
        load_embeddings(options.get("target-embeddings", required=True)),
        load_bilingual_dictionary(options.get("dictionary", required=True)),
        dev_corpus,
        epochs=int(options.get("epochs", 100)),
        learning_rate=float(options.get("learning-rate", 0.001)),
        alpha=float(options.get("alpha", 1.0)),
        seed=options.seed(),
    )
    output = options.get("output", required=True)
    model.save(output)
    best = model.history[model.best_epoch - 1]
    print(f"best epoch {model.best_epoch}/{len(model.history)}: dev pearson {format_float(best.dev_pearson)} -> {output}")
    return 0


def _experiment_config(options: _Options) -> harness.ExperimentConfig:
    config_path = getattr(options.args, "config", None)
    if not config_path:
        raise ValidationError("this subcommand requires --config with an experiment description")
    base_dir = Path(config_path).resolve().parent
    config = harness.ExperimentConfig.from_json_dict(options.config, base_dir=base_dir)
    if getattr(options.args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=int(options.args.seed))
    return config


def _cmd_run(options: _Options) -> int:
    result = harness.run_experiment(_experiment_config(options))
    row = result.row
    print(
        f"{row.method}\t{row.emotion.value}\tpearson={format_float(row.pearson)}"
        f"\tspearman={format_float(row.spearman)}\tn_train={row.n_train}\tn_test={row.n_test}"
    )
    return 0


def _cmd_ablate(options: _Options) -> int:
    groups_raw = options.get("groups")
    spec = (
        harness.AblationSpec(tuple(str(groups_raw).split(","))) if groups_raw else harness.AblationSpec()
    )
    result = harness.run_ablation(_experiment_config(options), spec)
    print(f"ALL\t{format_float(result.baseline.pearson)}\t{format_float(0.0)}")
    for row in result.rows:
        print(f"-{row.group}\t{format_float(row.pearson)}\t{format_float(row.delta)}")
    return 0


def _cmd_error_tally(options: _Options) -> int:
    records = harness.load_error_records_jsonl(options.get("records", required=True))
    tally = harness.tally_errors(records)
    text = tally.to_tsv()
    output = options.get("output")
    if output:
        Path(output).write_text(text, encoding="utf-8")
        print(f"tallied {len(records)} records -> {output}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_serve(options: _Options) -> int:
    import uvicorn

    from emotensity.service import create_app

    app = create_app(options.get("campaigns", required=True))
    uvicorn.run(app, host=options.get("host", "127.0.0.1"), port=int(options.get("port", 8000)))
    return 0


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="deterministic seed (default 0)")
    common.add_argument("--config", default=None, help="JSON file supplying option defaults")

    parser = argparse.ArgumentParser(prog="emotensity", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tuples", parents=[common], help="generate best/worst 4-tuples")
    p.add_argument("--items")
    p.add_argument("--emotion")
    p.add_argument("--appearances", type=int)
    p.add_argument("--prefix")
    p.add_argument("--language")
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_tuples)

    p = sub.add_parser("score", parents=[common], help="aggregate judgments into intensity scores")
    p.add_argument("--tuples")
    p.add_argument("--judgments")
    p.add_argument("--emotion")
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("reliability", parents=[common], help="split-half annotation reliability")
    p.add_argument("--tuples")
    p.add_argument("--judgments")
    p.add_argument("--emotion")
    p.add_argument("--iterations", type=int)
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_reliability)

    p = sub.add_parser("featurize", parents=[common], help="fit and save a feature vectorizer")
    p.add_argument("--train")
    p.add_argument("--language")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH")
    p.add_argument("--bow", action="store_true", default=None)
    p.add_argument("--no-word-ngrams", action="store_true", default=None)
    p.add_argument("--no-char-ngrams", action="store_true", default=None)
    p.add_argument("--word-ngrams", metavar="LOW,HIGH")
    p.add_argument("--char-ngrams", metavar="LOW,HIGH")
    p.add_argument("--min-df", type=int)
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_featurize)

    p = sub.add_parser("train", parents=[common], help="train the intensity regressor")
    p.add_argument("--train")
    p.add_argument("--language")
    p.add_argument("--vectorizer")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH")
    p.add_argument("--c", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("predict", parents=[common], help="score items with a trained model")
    p.add_argument("--input")
    p.add_argument("--format", choices=("wassa", "items"))
    p.add_argument("--language")
    p.add_argument("--vectorizer")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH")
    p.add_argument("--model")
    p.add_argument("--clip", action="store_true", default=None)
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="correlate model predictions with gold")
    p.add_argument("--test")
    p.add_argument("--language")
    p.add_argument("--vectorizer")
    p.add_argument("--embeddings")
    p.add_argument("--lexicon", action="append", metavar="NAME=PATH")
    p.add_argument("--model")
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("align", parents=[common], help="orthogonal embedding alignment")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--dictionary")
    p.add_argument("--output")
    p.add_argument("--mapped-output")
    p.set_defaults(handler=_cmd_align)

    p = sub.add_parser("blse", parents=[common], help="train the joint bilingual regressor")
    p.add_argument("--train")
    p.add_argument("--dev")
    p.add_argument("--language")
    p.add_argument("--source-embeddings")
    p.add_argument("--target-embeddings")
    p.add_argument("--dictionary")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_blse)

    p = sub.add_parser("run", parents=[common], help="run one experiment row from a config")
    p.set_defaults(handler=_cmd_run)

    p = sub.add_parser("ablate", parents=[common], help="single-feature ablation from a config")
    p.add_argument("--groups", metavar="G1,G2,...")
    p.set_defaults(handler=_cmd_ablate)

    p = sub.add_parser("error-tally", parents=[common], help="tally translation-error annotations")
    p.add_argument("--records")
    p.add_argument("--output")
    p.set_defaults(handler=_cmd_error_tally)

    p = sub.add_parser("serve", parents=[common], help="start the annotation HTTP service")
    p.add_argument("--campaigns")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        options = _Options(args)
        return args.handler(options)
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return 1
    except EmotensityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
