"""Experiment orchestration.

Runs the seven transfer configurations (mono, mt_bow, mt_full, unsup_bow,
unsup_full, cwe, blse) for one emotion at a time, writes machine-readable
report rows with per-item predictions and the fully resolved configuration,
drives the single-feature ablation, and tallies translation-error
annotations into the per-language/per-system counts table.

Translated test corpora are first-class TSV inputs; this module never
invokes a translation system. The mt_* and unsup_* methods share one code
path and differ only in which test file the configuration points at.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from emotensity import crosslingual, svr
from emotensity.data_model import (
    Corpus,
    Emotion,
    EmbeddingTable,
    Lexicon,
    Split,
    format_float,
    load_bilingual_dictionary,
    load_embeddings,
    load_lexicon,
    load_wassa_tsv,
)
from emotensity.errors import ConfigError, DataFormatError, ValidationError
from emotensity.features import FeatureConfig, fit, transform, transform_corpus
from emotensity.metrics import pearson, spearman

__all__ = [
    "METHODS",
    "BOW_METHODS",
    "SVR_METHODS",
    "ERROR_CATEGORIES",
    "ABLATION_GROUPS",
    "LEXICON_GROUPS",
    "ExperimentConfig",
    "ReportRow",
    "RunResult",
    "run_experiment",
    "AblationSpec",
    "AblationRow",
    "AblationResult",
    "run_ablation",
    "ErrorRecord",
    "ErrorTally",
    "tally_errors",
    "save_error_records_jsonl",
    "load_error_records_jsonl",
]

METHODS = ("mono", "mt_bow", "mt_full", "unsup_bow", "unsup_full", "cwe", "blse")
BOW_METHODS = frozenset({"mt_bow", "unsup_bow"})
FULL_METHODS = frozenset({"mono", "mt_full", "unsup_full"})
SVR_METHODS = BOW_METHODS | FULL_METHODS
TRANSLATED_TEST_METHODS = frozenset({"mt_bow", "mt_full", "unsup_bow", "unsup_full"})

ERROR_CATEGORIES = (
    "hashtags",
    "lexical",
    "insertions",
    "deletions",
    "untranslated",
    "slang",
    "names",
    "numbers",
)
ERROR_SYSTEMS = ("mt", "unsup")
ERROR_LANGUAGES = ("ca", "es")

# single-feature ablation groups; the lexicon groups key on lexicon names
ABLATION_GROUPS = ("ngrams", "char", "embs", "hashtag-lex", "emo-lex", "sent-lex", "all-lex")
LEXICON_GROUPS = {"hashtag-lex": "hashtag", "emo-lex": "emotion", "sent-lex": "sentiment"}


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment row: a method, an emotion, and its resolved inputs.

    Lexicons are (name, path) pairs; the ablation's lexicon groups resolve
    against the names "hashtag", "emotion", and "sentiment".
    """

    method: str
    emotion: Emotion
    train_path: Path
    test_path: Path
    dev_path: Optional[Path] = None
    source_embeddings_path: Optional[Path] = None
    target_embeddings_path: Optional[Path] = None
    lexicon_paths: tuple[tuple[str, Path], ...] = ()
    dictionary_path: Optional[Path] = None
    seed: int = 0
    output_dir: Optional[Path] = None
    source_language: str = "en"
    test_language: str = "en"
    svr_c: float = 100.0
    svr_epsilon: float = 0.1
    svr_tolerance: float = 1e-4
    svr_max_iterations: int = 10_000
    alpha: float = 1.0
    epochs: int = 100
    learning_rate: float = 0.001
    disabled_groups: frozenset = frozenset()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.method in BOW_METHODS and (
            self.source_embeddings_path or self.target_embeddings_path or self.lexicon_paths
        ):
            raise ConfigError(f"{self.method} forbids embedding and lexicon blocks")
        if self.method in ("cwe", "blse"):
            missing = [
                name
                for name, value in (
                    ("dictionary", self.dictionary_path),
                    ("source embeddings", self.source_embeddings_path),
                    ("target embeddings", self.target_embeddings_path),
                )
                if value is None
            ]
            if missing:
                raise ConfigError(f"{self.method} requires {', '.join(missing)}")
        if self.method == "blse" and self.dev_path is None:
            raise ConfigError("blse requires a dev corpus for snapshot selection")
        names = [name for name, _ in self.lexicon_paths]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate lexicon names in configuration")
        unknown = self.disabled_groups - set(ABLATION_GROUPS)
        if unknown:
            raise ConfigError(f"unknown ablation groups {sorted(unknown)}")

    def svr_config(self) -> svr.SvrConfig:
        return svr.SvrConfig(
            C=self.svr_c,
            epsilon=self.svr_epsilon,
            tolerance=self.svr_tolerance,
            max_iterations=self.svr_max_iterations,
            seed=self.seed,
        )

    def to_json_dict(self) -> dict:
        def _path(p: Optional[Path]) -> Optional[str]:
            return None if p is None else str(Path(p).resolve())

        return {
            "method": self.method,
            "emotion": self.emotion.value,
            "train": _path(self.train_path),
            "test": _path(self.test_path),
            "dev": _path(self.dev_path),
            "source_embeddings": _path(self.source_embeddings_path),
            "target_embeddings": _path(self.target_embeddings_path),
            "lexicons": {name: _path(path) for name, path in self.lexicon_paths},
            "dictionary": _path(self.dictionary_path),
            "seed": self.seed,
            "output": _path(self.output_dir),
            "source_language": self.source_language,
            "test_language": self.test_language,
            "svr": {
                "C": self.svr_c,
                "epsilon": self.svr_epsilon,
                "tolerance": self.svr_tolerance,
                "max_iterations": self.svr_max_iterations,
            },
            "alpha": self.alpha,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "disabled_groups": sorted(self.disabled_groups),
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping, base_dir: Optional[Path] = None) -> "ExperimentConfig":
        def _path(value) -> Optional[Path]:
            if value is None:
                return None
            p = Path(value)
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            return p

        if "method" not in doc or "emotion" not in doc:
            raise ConfigError("config requires 'method' and 'emotion'")
        if "train" not in doc or "test" not in doc:
            raise ConfigError("config requires 'train' and 'test' corpus paths")
        lexicons_raw = doc.get("lexicons") or {}
        if isinstance(lexicons_raw, Mapping):
            lexicon_paths = tuple((name, _path(p)) for name, p in lexicons_raw.items())
        else:
            lexicon_paths = tuple((Path(p).stem, _path(p)) for p in lexicons_raw)
        svr_doc = doc.get("svr") or {}
        return cls(
            method=doc["method"],
            emotion=Emotion.parse(doc["emotion"]),
            train_path=_path(doc["train"]),
            test_path=_path(doc["test"]),
            dev_path=_path(doc.get("dev")),
            source_embeddings_path=_path(doc.get("source_embeddings")),
            target_embeddings_path=_path(doc.get("target_embeddings")),
            lexicon_paths=lexicon_paths,
            dictionary_path=_path(doc.get("dictionary")),
            seed=int(doc.get("seed", 0)),
            output_dir=_path(doc.get("output")),
            source_language=doc.get("source_language", "en"),
            test_language=doc.get("test_language", "en"),
            svr_c=float(svr_doc.get("C", 100.0)),
            svr_epsilon=float(svr_doc.get("epsilon", 0.1)),
            svr_tolerance=float(svr_doc.get("tolerance", 1e-4)),
            svr_max_iterations=int(svr_doc.get("max_iterations", 10_000)),
            alpha=float(doc.get("alpha", 1.0)),
            epochs=int(doc.get("epochs", 100)),
            learning_rate=float(doc.get("learning_rate", 0.001)),
            disabled_groups=frozenset(doc.get("disabled_groups", ())),
        )


@dataclass(frozen=True)
class ReportRow:
    method: str
    emotion: Emotion
    pearson: float
    spearman: float
    n_train: int
    n_test: int
    seed: int


@dataclass(frozen=True)
class RunResult:
    row: ReportRow
    predictions: tuple[tuple[str, float, float], ...]  # (item_id, gold, prediction)


def _check_emotion(corpus: Corpus, expected: Emotion, role: str) -> None:
    for item in corpus:
        if item.emotion != expected:
            raise ConfigError(
                f"{role} corpus tagged {expected.value} contains item {item.id!r} "
                f"with emotion {item.emotion.value}"
            )


def _removed_lexicon_names(disabled: frozenset) -> set[str]:
    removed: set[str] = set()
    for group, name in LEXICON_GROUPS.items():
        if group in disabled or "all-lex" in disabled:
            removed.add(name)
    return removed


def _feature_config(config: ExperimentConfig) -> FeatureConfig:
    if config.method in BOW_METHODS:
        # bag of words: word unigram counts only
        return FeatureConfig(
            word_ngram_range=(1, 1),
            use_char_ngrams=False,
            use_embeddings=False,
            use_lexicons=(),
        )
    if config.method == "cwe":
        return FeatureConfig(use_word_ngrams=False, use_char_ngrams=False, use_embeddings=True)
    disabled = config.disabled_groups
    removed_lex = _removed_lexicon_names(disabled)
    return FeatureConfig(
        use_word_ngrams="ngrams" not in disabled,
        use_char_ngrams="char" not in disabled,
        use_embeddings=config.source_embeddings_path is not None and "embs" not in disabled,
        use_lexicons=tuple(name for name, _ in config.lexicon_paths if name not in removed_lex),
    )


def _svr_result(
    config: ExperimentConfig,
    train_corpus: Corpus,
    test_corpus: Corpus,
    feature_config: FeatureConfig,
    embeddings: Optional[EmbeddingTable],
    test_embeddings: Optional[EmbeddingTable],
    lexicons: Sequence[Lexicon],
) -> RunResult:
    vectorizer = fit(train_corpus, feature_config, embeddings=embeddings, lexicons=lexicons)
    model = svr.train(
        transform_corpus(vectorizer, train_corpus), train_corpus.gold_vector(), config.svr_config()
    )
    test_vectorizer = vectorizer if test_embeddings is None else vectorizer.with_embeddings(test_embeddings)
    preds = np.array([svr.predict(model, transform(test_vectorizer, item)) for item in test_corpus])
    gold = test_corpus.gold_vector()
    row = ReportRow(
        method=config.method,
        emotion=config.emotion,
        pearson=pearson(preds, gold),
        spearman=spearman(preds, gold),
        n_train=len(train_corpus),
        n_test=len(test_corpus),
        seed=config.seed,
    )
    predictions = tuple(
        (item.id, float(g), float(p)) for item, g, p in zip(test_corpus, gold, preds)
    )
    return RunResult(row=row, predictions=predictions)


def run_experiment(config: ExperimentConfig) -> RunResult:
    """Execute one report row and, when an output directory is configured,
    write report.tsv, predictions.tsv, and config.json into it."""
    train_corpus = load_wassa_tsv(config.train_path, Split.TRAIN, config.source_language)
    test_corpus = load_wassa_tsv(config.test_path, Split.TEST, config.test_language)
    _check_emotion(train_corpus, config.emotion, "train")
    _check_emotion(test_corpus, config.emotion, "test")

    if config.method in SVR_METHODS:
        feature_config = _feature_config(config)
        embeddings = (
            load_embeddings(config.source_embeddings_path) if feature_config.use_embeddings else None
        )
        lexicons = [
            load_lexicon(path, name=name)
            for name, path in config.lexicon_paths
            if name in feature_config.use_lexicons
        ]
        result = _svr_result(config, train_corpus, test_corpus, feature_config, embeddings, None, lexicons)
    elif config.method == "cwe":
        src_table = load_embeddings(config.source_embeddings_path)
        tgt_table = load_embeddings(config.target_embeddings_path)
        dictionary = load_bilingual_dictionary(config.dictionary_path)
        alignment = crosslingual.procrustes_align(src_table, tgt_table, dictionary)
        mapped_src = crosslingual.map_embeddings(alignment, src_table)
        tgt_shared = crosslingual.preprocess_embeddings(tgt_table)
        result = _svr_result(
            config, train_corpus, test_corpus, _feature_config(config), mapped_src, tgt_shared, ()
        )
    else:  # blse
        src_table = load_embeddings(config.source_embeddings_path)
        tgt_table = load_embeddings(config.target_embeddings_path)
        dictionary = load_bilingual_dictionary(config.dictionary_path)
        dev_corpus = load_wassa_tsv(config.dev_path, Split.DEV, config.source_language)
        _check_emotion(dev_corpus, config.emotion, "dev")
        model = crosslingual.train_blse(
            train_corpus,
            src_table,
            tgt_table,
            dictionary,
            dev_corpus,
            epochs=config.epochs,
            learning_rate=config.learning_rate,
            alpha=config.alpha,
            seed=config.seed,
        )
        preds = np.array(
            [crosslingual.predict_blse(model, item, tgt_table, "target") for item in test_corpus]
        )
        gold = test_corpus.gold_vector()
        row = ReportRow(
            method=config.method,
            emotion=config.emotion,
            pearson=pearson(preds, gold),
            spearman=spearman(preds, gold),
            n_train=len(train_corpus),
            n_test=len(test_corpus),
            seed=config.seed,
        )
        result = RunResult(
            row=row,
            predictions=tuple((item.id, float(g), float(p)) for item, g, p in zip(test_corpus, gold, preds)),
        )

    if config.output_dir is not None:
        _write_run_artifacts(config, result)
    return result


def _write_run_artifacts(config: ExperimentConfig, result: RunResult) -> None:
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    row = result.row
    report_lines = [
        "method\temotion\tpearson\tspearman\tn_train\tn_test\tseed",
        "\t".join(
            [
                row.method,
                row.emotion.value,
                format_float(row.pearson),
                format_float(row.spearman),
                str(row.n_train),
                str(row.n_test),
                str(row.seed),
            ]
        ),
    ]
    (outdir / "report.tsv").write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    pred_lines = ["id\tgold\tprediction"]
    pred_lines.extend(
        f"{item_id}\t{format_float(gold)}\t{format_float(pred)}"
        for item_id, gold, pred in result.predictions
    )
    (outdir / "predictions.tsv").write_text("\n".join(pred_lines) + "\n", encoding="utf-8")
    (outdir / "config.json").write_text(
        json.dumps(config.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


# --- ablation ------------------------------------------------------------------


@dataclass(frozen=True)
class AblationSpec:
    groups: tuple[str, ...] = ABLATION_GROUPS

    def __post_init__(self) -> None:
        unknown = [g for g in self.groups if g not in ABLATION_GROUPS]
        if unknown:
            raise ConfigError(f"unknown ablation groups {unknown}")
        if len(set(self.groups)) != len(self.groups):
            raise ConfigError("duplicate ablation groups")


@dataclass(frozen=True)
class AblationRow:
    group: str
    pearson: float
    delta: float


@dataclass(frozen=True)
class AblationResult:
    baseline: ReportRow
    rows: tuple[AblationRow, ...]


def _check_group_available(config: ExperimentConfig, group: str) -> None:
    names = {name for name, _ in config.lexicon_paths}
    if group == "embs" and config.source_embeddings_path is None:
        raise ConfigError("cannot ablate embeddings: base config has no embedding table")
    if group in LEXICON_GROUPS and LEXICON_GROUPS[group] not in names:
        raise ConfigError(f"cannot ablate {group}: no lexicon named {LEXICON_GROUPS[group]!r} configured")
    if group == "all-lex" and not (names & set(LEXICON_GROUPS.values())):
        raise ConfigError("cannot ablate all-lex: no lexicon groups configured")


def run_ablation(config: ExperimentConfig, spec: AblationSpec = AblationSpec()) -> AblationResult:
    """One run per removed group plus the unablated baseline; deltas are
    ablated minus baseline Pearson."""
    if config.method not in FULL_METHODS:
        raise ConfigError(f"ablation requires a full-feature method, got {config.method!r}")
    if config.disabled_groups:
        raise ConfigError("ablation base config must not itself disable groups")
    for group in spec.groups:
        _check_group_available(config, group)
    baseline = run_experiment(config)
    rows: list[AblationRow] = []
    for group in spec.groups:
        ablated_config = dataclasses.replace(
            config, disabled_groups=frozenset({group}), output_dir=None
        )
        ablated = run_experiment(ablated_config)
        rows.append(
            AblationRow(
                group=group,
                pearson=ablated.row.pearson,
                delta=ablated.row.pearson - baseline.row.pearson,
            )
        )
    result = AblationResult(baseline=baseline.row, rows=tuple(rows))
    if config.output_dir is not None:
        _write_ablation_table(Path(config.output_dir) / "ablation.tsv", result)
    return result


def _write_ablation_table(path: Path, result: AblationResult) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["group\tpearson\tdelta", f"ALL\t{format_float(result.baseline.pearson)}\t{format_float(0.0)}"]
    lines.extend(
        f"-{row.group}\t{format_float(row.pearson)}\t{format_float(row.delta)}" for row in result.rows
    )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- translation-error tally ----------------------------------------------------


@dataclass(frozen=True)
class ErrorRecord:
    """Manual error annotation for one translated tweet."""

    tweet_id: str
    system: str
    language: str
    flags: frozenset

    def __post_init__(self) -> None:
        if not self.tweet_id:
            raise ValidationError("tweet_id must be non-empty")
        if self.system not in ERROR_SYSTEMS:
            raise ValidationError(f"system must be one of {ERROR_SYSTEMS}, got {self.system!r}")
        if self.language not in ERROR_LANGUAGES:
            raise ValidationError(f"language must be one of {ERROR_LANGUAGES}, got {self.language!r}")
        if not self.flags:
            raise ValidationError(f"record for tweet {self.tweet_id!r} has no flags")
        unknown = set(self.flags) - set(ERROR_CATEGORIES)
        if unknown:
            raise ValidationError(f"unknown error categories {sorted(unknown)}")


@dataclass(frozen=True)
class ErrorTally:
    """Counts per (language, system): distinct tweets per category, plus a
    Total that sums flag instances (a tweet with two flags adds two)."""

    counts: Mapping[tuple[str, str], Mapping[str, int]]

    def count(self, language: str, system: str, category: str) -> int:
        return self.counts[(language, system)][category]

    def total(self, language: str, system: str) -> int:
        return sum(self.counts[(language, system)].values())

    def to_tsv(self) -> str:
        lines = ["language\tsystem\t" + "\t".join(ERROR_CATEGORIES) + "\ttotal"]
        for language in ERROR_LANGUAGES:
            for system in ERROR_SYSTEMS:
                per = self.counts[(language, system)]
                cells = [language, system]
                cells.extend(str(per[cat]) for cat in ERROR_CATEGORIES)
                cells.append(str(self.total(language, system)))
                lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


def tally_errors(records: Sequence[ErrorRecord]) -> ErrorTally:
    tweets: dict[tuple[str, str], dict[str, set]] = {
        (language, system): {cat: set() for cat in ERROR_CATEGORIES}
        for language in ERROR_LANGUAGES
        for system in ERROR_SYSTEMS
    }
    for record in records:
        per = tweets[(record.language, record.system)]
        for flag in record.flags:
            per[flag].add(record.tweet_id)
    counts = {
        key: {cat: len(ids) for cat, ids in per.items()} for key, per in tweets.items()
    }
    return ErrorTally(counts=counts)


def save_error_records_jsonl(records: Sequence[ErrorRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "tweet_id": record.tweet_id,
                        "system": record.system,
                        "language": record.language,
                        "flags": sorted(record.flags),
                    }
                )
                + "\n"
            )


def load_error_records_jsonl(path: str | Path) -> tuple[ErrorRecord, ...]:
    path = Path(path)
    records: list[ErrorRecord] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path.name} line {line_no}: invalid JSON ({exc})") from None
        try:
            records.append(
                ErrorRecord(
                    tweet_id=doc["tweet_id"],
                    system=doc["system"],
                    language=doc["language"],
                    flags=frozenset(doc["flags"]),
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"{path.name} line {line_no}: missing field ({exc})") from None
    return tuple(records)
