"""Tweet feature stack: word n-grams, character n-grams, averaged word
embeddings, and per-lexicon association features.

A vectorizer is fitted once on training data and then applied consistently:
n-gram vocabularies are frozen at fit time (unseen keys are silently ignored),
blocks are laid out contiguously as word_ngrams | char_ngrams | embeddings |
one block per lexicon. Word/char blocks hold raw counts; the embedding block
holds the mean vector of tokens covered by the table; each lexicon block holds
per-dimension score sums plus a trailing matched-token count.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from emotensity.data_model import Corpus, EmbeddingTable, Item, Lexicon
from emotensity.errors import DataFormatError, ValidationError

__all__ = [
    "Block",
    "FeatureConfig",
    "FeatureVector",
    "FittedVectorizer",
    "tokenize",
    "fit",
    "transform",
    "transform_corpus",
]

VECTORIZER_FORMAT_VERSION = 1

_TOKEN_RE = re.compile(
    r"(?P<url>https?://\S+|www\.\S+)"
    r"|(?P<mention>@\w+)"
    r"|(?P<hashtag>#\w+)"
    r"|(?P<word>\w+)"
    r"|(?P<other>[^\w\s]+)",
    re.UNICODE,
)

URL_TOKEN = "<url>"
MENTION_TOKEN = "@user"


def tokenize(text: str) -> list[str]:
    """Lowercase tweet tokenizer: hashtags stay whole, mentions collapse to
    '@user', URLs to '<url>', and punctuation/emoji runs stand alone."""
    tokens: list[str] = []
    for match in _TOKEN_RE.finditer(text.lower()):
        if match.lastgroup == "url":
            tokens.append(URL_TOKEN)
        elif match.lastgroup == "mention":
            tokens.append(MENTION_TOKEN)
        else:
            tokens.append(match.group())
    return tokens


@dataclass(frozen=True)
class FeatureConfig:
    word_ngram_range: tuple[int, int] = (1, 4)
    char_ngram_range: tuple[int, int] = (3, 5)
    use_word_ngrams: bool = True
    use_char_ngrams: bool = True
    use_embeddings: bool = False
    use_lexicons: tuple[str, ...] = ()
    min_document_frequency: int = 1

    def __post_init__(self) -> None:
        for label, (low, high) in (("word", self.word_ngram_range), ("char", self.char_ngram_range)):
            if not (1 <= low <= high):
                raise ValidationError(f"{label}_ngram_range must satisfy 1 <= low <= high, got ({low}, {high})")
        if self.min_document_frequency < 1:
            raise ValidationError("min_document_frequency must be >= 1")
        if len(set(self.use_lexicons)) != len(self.use_lexicons):
            raise ValidationError("use_lexicons contains duplicate names")


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector as parallel (strictly increasing index, value) arrays."""

    indices: np.ndarray
    values: np.ndarray
    total_dim: int

    def __post_init__(self) -> None:
        if self.indices.shape != self.values.shape:
            raise ValidationError("indices and values must have matching shapes")
        if self.indices.size:
            if int(self.indices[-1]) >= self.total_dim or int(self.indices[0]) < 0:
                raise ValidationError("feature index out of range")
            if np.any(np.diff(self.indices) <= 0):
                raise ValidationError("feature indices must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("feature values must be finite")

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, float], total_dim: int) -> "FeatureVector":
        pairs = sorted((i, v) for i, v in mapping.items() if v != 0.0)
        indices = np.array([i for i, _ in pairs], dtype=np.int64)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return cls(indices=indices, values=values, total_dim=total_dim)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.total_dim, dtype=np.float64)
        dense[self.indices] = self.values
        return dense


def _word_ngrams(tokens: Sequence[str], low: int, high: int) -> Iterable[str]:
    for n in range(low, high + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


def _char_ngrams(text: str, low: int, high: int) -> Iterable[str]:
    for n in range(low, high + 1):
        for i in range(len(text) - n + 1):
            yield text[i : i + n]


@dataclass(frozen=True)
class Block:
    name: str
    offset: int
    width: int


class FittedVectorizer:
    """Immutable mapping from items to block-structured sparse vectors."""

    def __init__(
        self,
        config: FeatureConfig,
        word_vocabulary: Mapping[str, int],
        char_vocabulary: Mapping[str, int],
        embeddings: Optional[EmbeddingTable],
        lexicons: Sequence[Lexicon],
    ):
        self.config = config
        self.word_vocabulary = dict(word_vocabulary)
        self.char_vocabulary = dict(char_vocabulary)
        self.embeddings = embeddings
        self.lexicons = list(lexicons)
        self.embedding_dim = embeddings.dim if (config.use_embeddings and embeddings is not None) else 0

        layout: list[Block] = []
        offset = 0
        if config.use_word_ngrams:
            layout.append(Block("word_ngrams", offset, len(self.word_vocabulary)))
            offset += len(self.word_vocabulary)
        if config.use_char_ngrams:
            layout.append(Block("char_ngrams", offset, len(self.char_vocabulary)))
            offset += len(self.char_vocabulary)
        if config.use_embeddings:
            layout.append(Block("embeddings", offset, self.embedding_dim))
            offset += self.embedding_dim
        for lex in self.lexicons:
            width = len(lex.dimensions) + 1  # per-dimension sums plus match count
            layout.append(Block(f"lexicon:{lex.name}", offset, width))
            offset += width
        self.block_layout: tuple[Block, ...] = tuple(layout)
        self.total_dim = offset

    def block(self, name: str) -> Block:
        for b in self.block_layout:
            if b.name == name:
                return b
        raise ValidationError(f"no block named {name!r}")

    def with_embeddings(self, table: EmbeddingTable) -> "FittedVectorizer":
        """Copy of this vectorizer bound to another table of the same dim
        (used to score target-language items in a shared space)."""
        if not self.config.use_embeddings:
            raise ValidationError("vectorizer was fitted without an embedding block")
        if table.dim != self.embedding_dim:
            raise ValidationError(f"embedding dim {table.dim} != fitted dim {self.embedding_dim}")
        return FittedVectorizer(self.config, self.word_vocabulary, self.char_vocabulary, table, self.lexicons)

    # --- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "format_version": VECTORIZER_FORMAT_VERSION,
            "config": {
                "word_ngram_range": list(self.config.word_ngram_range),
                "char_ngram_range": list(self.config.char_ngram_range),
                "use_word_ngrams": self.config.use_word_ngrams,
                "use_char_ngrams": self.config.use_char_ngrams,
                "use_embeddings": self.config.use_embeddings,
                "use_lexicons": list(self.config.use_lexicons),
                "min_document_frequency": self.config.min_document_frequency,
            },
            "embedding_dim": self.embedding_dim,
            "block_layout": [[b.name, b.offset, b.width] for b in self.block_layout],
            "word_vocabulary": sorted(self.word_vocabulary, key=self.word_vocabulary.get),
            "char_vocabulary": sorted(self.char_vocabulary, key=self.char_vocabulary.get),
            "lexicons": [{"name": lex.name, "dimensions": list(lex.dimensions)} for lex in self.lexicons],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), ensure_ascii=False), encoding="utf-8")

    @classmethod
    def from_json_dict(
        cls,
        doc: dict,
        embeddings: Optional[EmbeddingTable] = None,
        lexicons: Sequence[Lexicon] = (),
    ) -> "FittedVectorizer":
        if doc.get("format_version") != VECTORIZER_FORMAT_VERSION:
            raise DataFormatError(f"unsupported vectorizer format version {doc.get('format_version')!r}")
        cfg = doc["config"]
        config = FeatureConfig(
            word_ngram_range=tuple(cfg["word_ngram_range"]),
            char_ngram_range=tuple(cfg["char_ngram_range"]),
            use_word_ngrams=cfg["use_word_ngrams"],
            use_char_ngrams=cfg["use_char_ngrams"],
            use_embeddings=cfg["use_embeddings"],
            use_lexicons=tuple(cfg["use_lexicons"]),
            min_document_frequency=cfg["min_document_frequency"],
        )
        resolved = _resolve_lexicons(config.use_lexicons, lexicons)
        for lex, spec in zip(resolved, doc["lexicons"]):
            if lex.name != spec["name"] or list(lex.dimensions) != spec["dimensions"]:
                raise ValidationError(
                    f"supplied lexicon {lex.name!r} does not match the fitted layout ({spec['name']!r})"
                )
        if config.use_embeddings:
            if embeddings is None:
                raise ValidationError("vectorizer uses embeddings; supply the embedding table on load")
            if embeddings.dim != doc["embedding_dim"]:
                raise ValidationError(
                    f"embedding dim {embeddings.dim} != fitted dim {doc['embedding_dim']}"
                )
        vec = cls(
            config=config,
            word_vocabulary={key: i for i, key in enumerate(doc["word_vocabulary"])},
            char_vocabulary={key: i for i, key in enumerate(doc["char_vocabulary"])},
            embeddings=embeddings if config.use_embeddings else None,
            lexicons=resolved,
        )
        stored = [[b.name, b.offset, b.width] for b in vec.block_layout]
        if stored != doc["block_layout"]:
            raise DataFormatError("stored block layout does not match the reconstructed vectorizer")
        return vec

    @classmethod
    def load(
        cls,
        path: str | Path,
        embeddings: Optional[EmbeddingTable] = None,
        lexicons: Sequence[Lexicon] = (),
    ) -> "FittedVectorizer":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")), embeddings, lexicons)


def _resolve_lexicons(names: Sequence[str], lexicons: Sequence[Lexicon]) -> list[Lexicon]:
    by_name = {lex.name: lex for lex in lexicons}
    missing = [name for name in names if name not in by_name]
    if missing:
        raise ValidationError(f"lexicons not supplied: {missing}")
    return [by_name[name] for name in names]


def fit(
    corpus: Corpus,
    config: FeatureConfig,
    embeddings: Optional[EmbeddingTable] = None,
    lexicons: Sequence[Lexicon] = (),
) -> FittedVectorizer:
    """Collect n-gram vocabularies from the corpus (document frequency >=
    min_document_frequency, keys sorted lexicographically) and freeze the
    block layout."""
    if len(corpus) == 0:
        raise ValidationError("cannot fit a vectorizer on an empty corpus")
    if config.use_embeddings and embeddings is None:
        raise ValidationError("config requests embeddings but no table was supplied")
    resolved = _resolve_lexicons(config.use_lexicons, lexicons)

    word_df: Counter = Counter()
    char_df: Counter = Counter()
    for item in corpus:
        if config.use_word_ngrams:
            tokens = tokenize(item.text)
            word_df.update(set(_word_ngrams(tokens, *config.word_ngram_range)))
        if config.use_char_ngrams:
            char_df.update(set(_char_ngrams(item.text.lower(), *config.char_ngram_range)))

    min_df = config.min_document_frequency
    word_vocab = {key: i for i, key in enumerate(sorted(k for k, n in word_df.items() if n >= min_df))}
    char_vocab = {key: i for i, key in enumerate(sorted(k for k, n in char_df.items() if n >= min_df))}
    return FittedVectorizer(
        config=config,
        word_vocabulary=word_vocab,
        char_vocabulary=char_vocab,
        embeddings=embeddings if config.use_embeddings else None,
        lexicons=resolved,
    )


def transform(vectorizer: FittedVectorizer, item: Item) -> FeatureVector:
    """Map one item to its sparse feature vector under a fitted vectorizer."""
    config = vectorizer.config
    out: dict[int, float] = {}
    tokens = tokenize(item.text)

    if config.use_word_ngrams:
        block = vectorizer.block("word_ngrams")
        vocab = vectorizer.word_vocabulary
        for key, count in Counter(_word_ngrams(tokens, *config.word_ngram_range)).items():
            col = vocab.get(key)
            if col is not None:
                out[block.offset + col] = float(count)

    if config.use_char_ngrams:
        block = vectorizer.block("char_ngrams")
        vocab = vectorizer.char_vocabulary
        for key, count in Counter(_char_ngrams(item.text.lower(), *config.char_ngram_range)).items():
            col = vocab.get(key)
            if col is not None:
                out[block.offset + col] = float(count)

    if config.use_embeddings:
        block = vectorizer.block("embeddings")
        table = vectorizer.embeddings
        assert table is not None
        vecs = [table[tok] for tok in tokens if tok in table]
        if vecs:
            mean = np.mean(np.stack(vecs), axis=0)
            for j, value in enumerate(mean):
                if value != 0.0:
                    out[block.offset + j] = float(value)

    for lex in vectorizer.lexicons:
        block = vectorizer.block(f"lexicon:{lex.name}")
        dim_index = {dim: j for j, dim in enumerate(lex.dimensions)}
        matches = 0
        sums = np.zeros(len(lex.dimensions), dtype=np.float64)
        for tok in tokens:
            entry = lex.entries.get(tok)
            if entry is None:
                continue
            matches += 1
            for dim, score in entry.items():
                sums[dim_index[dim]] += score
        for j, value in enumerate(sums):
            if value != 0.0:
                out[block.offset + j] = float(value)
        if matches:
            out[block.offset + len(lex.dimensions)] = float(matches)

    return FeatureVector.from_mapping(out, vectorizer.total_dim)


def transform_corpus(vectorizer: FittedVectorizer, corpus: Corpus) -> list[FeatureVector]:
    return [transform(vectorizer, item) for item in corpus]
