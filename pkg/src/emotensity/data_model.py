"""Core domain types and bit-exact readers/writers for the toolkit's file formats.

Formats (UTF-8, LF line endings, no quoting, fields never contain tabs):
  corpus TSV        id<TAB>text<TAB>emotion<TAB>score
  annotation TSV    id<TAB>text<TAB>emotion          (unlabeled campaign items)
  embeddings        word2vec text: "V D" header then "word v1 .. vD"
  lexicon TSV       term<TAB>dimension<TAB>score
  dictionary TSV    source_word<TAB>target_word

All loaders are pure functions over immutable result types and are safe to
call concurrently on distinct files.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from emotensity.errors import DataFormatError, ValidationError

__all__ = [
    "Emotion",
    "Split",
    "REGRESSION_EMOTIONS",
    "Item",
    "Corpus",
    "EmbeddingTable",
    "Lexicon",
    "BilingualDictionary",
    "load_wassa_tsv",
    "save_wassa_tsv",
    "load_annotation_items",
    "load_embeddings",
    "save_embeddings",
    "load_lexicon",
    "load_bilingual_dictionary",
    "format_float",
]


class Emotion(enum.Enum):
    ANGER = "anger"
    FEAR = "fear"
    JOY = "joy"
    SADNESS = "sadness"
    DISGUST = "disgust"
    SURPRISE = "surprise"

    @classmethod
    def parse(cls, value: str) -> "Emotion":
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown emotion {value!r}") from None


#: Emotions carrying gold intensities in the regression corpora.
REGRESSION_EMOTIONS = frozenset({Emotion.ANGER, Emotion.FEAR, Emotion.JOY, Emotion.SADNESS})


class Split(enum.Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


_SCORE_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")


def _parse_score(raw: str, line_no: int) -> float:
    # plain decimal notation only; scientific notation marks corruption
    if not _SCORE_RE.match(raw):
        raise DataFormatError(f"line {line_no}: unparseable score {raw!r}")
    value = float(raw)
    if not 0.0 <= value <= 1.0:
        raise DataFormatError(f"line {line_no}: score {value} outside [0,1]")
    return value


def format_float(value: float) -> str:
    """Shortest positional decimal that reloads to the identical float."""
    return np.format_float_positional(float(value), unique=True, trim="-")


@dataclass(frozen=True)
class Item:
    """One text unit (tweet) with language, target emotion, optional gold intensity."""

    id: str
    text: str
    language: str
    emotion: Emotion
    gold_score: Optional[float] = None

    def __post_init__(self) -> None:
        if "\t" in self.text or "\n" in self.text:
            raise ValidationError(f"item {self.id!r}: text contains a tab or newline")
        if "\t" in self.id or "\n" in self.id or not self.id:
            raise ValidationError(f"invalid item id {self.id!r}")
        if self.gold_score is not None and not 0.0 <= self.gold_score <= 1.0:
            raise ValidationError(f"item {self.id!r}: gold_score {self.gold_score} outside [0,1]")


@dataclass(frozen=True)
class Corpus:
    """An ordered, single-language collection of items for one split."""

    items: tuple[Item, ...]
    split: Split
    language: str

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for item in self.items:
            if item.id in seen:
                raise ValidationError(f"duplicate item id {item.id!r} in corpus")
            seen.add(item.id)
            if item.language != self.language:
                raise ValidationError(
                    f"item {item.id!r} has language {item.language!r}, corpus is {self.language!r}"
                )

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def gold_vector(self) -> np.ndarray:
        scores = []
        for item in self.items:
            if item.gold_score is None:
                raise ValidationError(f"item {item.id!r} has no gold score")
            scores.append(item.gold_score)
        return np.asarray(scores, dtype=np.float64)


class EmbeddingTable:
    """Dense word vectors of a fixed dimensionality; lookup is total over vocab."""

    def __init__(self, dim: int, entries: Mapping[str, np.ndarray], duplicate_count: int = 0):
        if dim <= 0:
            raise ValidationError(f"embedding dim must be positive, got {dim}")
        self.dim = int(dim)
        self.duplicate_count = int(duplicate_count)
        self._entries: dict[str, np.ndarray] = {}
        for word, vec in entries.items():
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise ValidationError(f"vector for {word!r} has shape {arr.shape}, expected ({self.dim},)")
            arr.setflags(write=False)
            self._entries[word] = arr

    def __contains__(self, word: str) -> bool:
        return word in self._entries

    def __getitem__(self, word: str) -> np.ndarray:
        return self._entries[word]

    def __len__(self) -> int:
        return len(self._entries)

    def words(self) -> Iterable[str]:
        return self._entries.keys()

    def get(self, word: str) -> Optional[np.ndarray]:
        return self._entries.get(word)


@dataclass(frozen=True)
class Lexicon:
    """Per-term association scores over an ordered set of dimensions."""

    name: str
    dimensions: tuple[str, ...]
    entries: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        declared = set(self.dimensions)
        for term, dims in self.entries.items():
            extra = set(dims) - declared
            if extra:
                raise ValidationError(f"lexicon {self.name!r}: term {term!r} uses undeclared dimensions {sorted(extra)}")


@dataclass(frozen=True)
class BilingualDictionary:
    """Deduplicated (source_word, target_word) translation pairs."""

    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.pairs:
            raise ValidationError("bilingual dictionary is empty")
        if len(set(self.pairs)) != len(self.pairs):
            raise ValidationError("bilingual dictionary contains duplicate pairs")

    def __len__(self) -> int:
        return len(self.pairs)


def _read_lines(path: Path) -> list[str]:
    raw = path.read_bytes().decode("utf-8")
    if raw == "":
        return []
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_wassa_tsv(path: str | Path, split: Split, language: str = "en") -> Corpus:
    """Load a 4-field corpus TSV (id, text, emotion, score), one item per line."""
    path = Path(path)
    items: list[Item] = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataFormatError(f"{path.name} line {line_no}: expected 4 tab-separated fields, got {len(fields)}")
        item_id, text, emotion_raw, score_raw = fields
        try:
            emotion = Emotion.parse(emotion_raw)
        except ValidationError:
            raise DataFormatError(f"{path.name} line {line_no}: unknown emotion {emotion_raw!r}") from None
        if emotion not in REGRESSION_EMOTIONS:
            # disgust/surprise exist only in annotation corpora, never with scores
            raise DataFormatError(
                f"{path.name} line {line_no}: emotion {emotion.value!r} is not a modeled regression emotion"
            )
        try:
            score = _parse_score(score_raw, line_no)
        except DataFormatError as exc:
            raise DataFormatError(f"{path.name} {exc}") from None
        items.append(Item(id=item_id, text=text, language=language, emotion=emotion, gold_score=score))
    return Corpus(items=tuple(items), split=split, language=language)


def save_wassa_tsv(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back to the 4-field TSV; scores round-trip bit-exactly."""
    path = Path(path)
    lines = []
    for item in corpus.items:
        if item.gold_score is None:
            raise ValidationError(f"item {item.id!r} has no gold score; corpus TSV requires one")
        lines.append(f"{item.id}\t{item.text}\t{item.emotion.value}\t{format_float(item.gold_score)}\n")
    path.write_bytes("".join(lines).encode("utf-8"))


def load_annotation_items(path: str | Path, language: str) -> tuple[Item, ...]:
    """Load unlabeled campaign items from a 3-field TSV (id, text, emotion)."""
    path = Path(path)
    items: list[Item] = []
    seen: set[str] = set()
    for line_no, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataFormatError(f"{path.name} line {line_no}: expected 3 tab-separated fields, got {len(fields)}")
        item_id, text, emotion_raw = fields
        try:
            emotion = Emotion.parse(emotion_raw)
        except ValidationError:
            raise DataFormatError(f"{path.name} line {line_no}: unknown emotion {emotion_raw!r}") from None
        if item_id in seen:
            raise DataFormatError(f"{path.name} line {line_no}: duplicate item id {item_id!r}")
        seen.add(item_id)
        items.append(Item(id=item_id, text=text, language=language, emotion=emotion))
    return tuple(items)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Load word2vec text format. First occurrence of a word wins; later
    duplicates are skipped and counted on the returned table."""
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise DataFormatError(f"{path.name}: empty embedding file")
    header = lines[0].split()
    if len(header) != 2:
        raise DataFormatError(f"{path.name} line 1: expected header 'V D', got {lines[0]!r}")
    try:
        vocab_size, dim = int(header[0]), int(header[1])
    except ValueError:
        raise DataFormatError(f"{path.name} line 1: non-integer header {lines[0]!r}") from None
    if vocab_size < 0 or dim <= 0:
        raise DataFormatError(f"{path.name} line 1: invalid header values {lines[0]!r}")

    entries: dict[str, np.ndarray] = {}
    duplicates = 0
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(" ")
        word = parts[0]
        if len(parts) - 1 != dim:
            raise DataFormatError(
                f"{path.name} line {line_no}: word {word!r} has {len(parts) - 1} values, expected {dim}"
            )
        if word in entries:
            duplicates += 1
            continue
        if len(entries) >= vocab_size:
            # header vocab count caps the table
            continue
        try:
            vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
        except ValueError:
            raise DataFormatError(f"{path.name} line {line_no}: non-numeric value for word {word!r}") from None
        entries[word] = vec
    return EmbeddingTable(dim=dim, entries=entries, duplicate_count=duplicates)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write word2vec text format; values round-trip bit-exactly."""
    path = Path(path)
    out = [f"{len(table)} {table.dim}\n"]
    for word in table.words():
        vec = table[word]
        out.append(word + " " + " ".join(format_float(v) for v in vec) + "\n")
    path.write_bytes("".join(out).encode("utf-8"))


def load_lexicon(path: str | Path, name: Optional[str] = None) -> Lexicon:
    """Load a lexicon TSV (term, dimension, score). Dimension order is
    first appearance in the file."""
    path = Path(path)
    dimensions: list[str] = []
    entries: dict[str, dict[str, float]] = {}
    for line_no, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataFormatError(f"{path.name} line {line_no}: expected 3 tab-separated fields, got {len(fields)}")
        term, dimension, score_raw = fields
        try:
            score = float(score_raw)
        except ValueError:
            raise DataFormatError(f"{path.name} line {line_no}: unparseable score {score_raw!r}") from None
        if not np.isfinite(score):
            raise DataFormatError(f"{path.name} line {line_no}: non-finite score {score_raw!r}")
        if dimension not in dimensions:
            dimensions.append(dimension)
        entries.setdefault(term, {})[dimension] = score
    return Lexicon(name=name if name is not None else path.stem, dimensions=tuple(dimensions), entries=entries)


def load_bilingual_dictionary(path: str | Path) -> BilingualDictionary:
    """Load translation pairs (source_word, target_word), deduplicated in order."""
    path = Path(path)
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for line_no, line in enumerate(_read_lines(path), start=1):
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataFormatError(f"{path.name} line {line_no}: expected 2 tab-separated fields, got {len(fields)}")
        pair = (fields[0], fields[1])
        if pair in seen:
            continue
        seen.add(pair)
        pairs.append(pair)
    if not pairs:
        raise DataFormatError(f"{path.name}: no translation pairs found")
    return BilingualDictionary(pairs=tuple(pairs))
