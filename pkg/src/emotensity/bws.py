"""Best-worst-scaling engine: 4-tuple generation, judgment validation,
counting-based score aggregation, and split-half reliability.

Scores come out on two scales: ``raw`` is best-minus-worst over judgment
exposure in [-1, 1], ``scores`` is the affine rescale (raw+1)/2 in [0, 1].
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from emotensity.data_model import Emotion
from emotensity.errors import DataFormatError, MetricError, ValidationError
from emotensity.metrics import pearson, spearman

__all__ = [
    "Tuple4",
    "Judgment",
    "ScoreTable",
    "ReliabilitySummary",
    "generate_tuples",
    "aggregate_scores",
    "split_half_reliability",
    "load_tuples_jsonl",
    "save_tuples_jsonl",
    "load_judgments_jsonl",
    "save_judgments_jsonl",
]

#: shuffle attempts allowed per tuple before restarting the whole design
RETRY_BUDGET = 10_000
#: full-design restarts before giving up
RESTART_BUDGET = 25


@dataclass(frozen=True)
class Tuple4:
    """Four distinct items presented together for one best/worst judgment."""

    tuple_id: str
    emotion: Emotion
    item_ids: tuple[str, str, str, str]

    def __post_init__(self) -> None:
        if len(self.item_ids) != 4:
            raise ValidationError(f"tuple {self.tuple_id!r} must hold exactly 4 items")
        if len(set(self.item_ids)) != 4:
            raise ValidationError(f"tuple {self.tuple_id!r} contains duplicate items")


@dataclass(frozen=True)
class Judgment:
    """One annotator's best/worst choice over a 4-tuple."""

    tuple_id: str
    annotator_id: str
    best: str
    worst: str
    timestamp: int = 0

    def __post_init__(self) -> None:
        if self.best == self.worst:
            raise ValidationError(
                f"judgment on {self.tuple_id!r} by {self.annotator_id!r}: best == worst ({self.best!r})"
            )


@dataclass(frozen=True)
class ScoreTable:
    """Aggregated per-item intensities for one emotion."""

    emotion: Optional[Emotion]
    scores: Mapping[str, float]
    raw: Mapping[str, float]
    appearances: Mapping[str, int]


@dataclass(frozen=True)
class ReliabilitySummary:
    pearson_mean: float
    pearson_std: float
    spearman_mean: float
    spearman_std: float
    iterations: int


def generate_tuples(
    items: Sequence[str],
    appearances_per_item: int,
    seed: int,
    emotion: Emotion,
    tuple_id_prefix: Optional[str] = None,
) -> list[Tuple4]:
    """Build a deterministic 4-tuple design where every item appears
    ``appearances_per_item`` times (+1 for the fill-in items of a final
    partial tuple when 4 does not divide the total), no tuple repeats an
    item, and no two tuples share the same item set.
    """
    items = list(items)
    if len(set(items)) != len(items):
        raise ValidationError("item ids for tuple generation must be unique")
    if len(items) < 4:
        raise ValidationError(f"need at least 4 items to build tuples, got {len(items)}")
    if appearances_per_item < 1:
        raise ValidationError("appearances_per_item must be >= 1")

    prefix = tuple_id_prefix if tuple_id_prefix is not None else emotion.value
    total = len(items) * appearances_per_item
    n_tuples = total // 4 + (1 if total % 4 else 0)
    rng = random.Random(seed)

    last_failure = "tuple constraints"
    for _restart in range(RESTART_BUDGET):
        remaining = Counter({item: appearances_per_item for item in items})
        seen_sets: set[frozenset[str]] = set()
        chosen: list[tuple[str, ...]] = []
        ok = True
        for t in range(n_tuples):
            # overage (+1 appearances) is only legal on a final partial tuple
            allow_fill = t == n_tuples - 1 and total % 4 != 0
            members = _draw_tuple(items, remaining, seen_sets, rng, allow_fill)
            if members is None:
                ok = False
                last_failure = (
                    "could not assemble a 4-tuple of distinct items with a "
                    "previously unused item set within the retry budget"
                )
                break
            for m in members:
                if remaining[m] > 0:
                    remaining[m] -= 1
            seen_sets.add(frozenset(members))
            chosen.append(members)
        if ok:
            width = max(4, len(str(n_tuples)))
            return [
                Tuple4(tuple_id=f"{prefix}-{i:0{width}d}", emotion=emotion, item_ids=members)
                for i, members in enumerate(chosen)
            ]
    raise ValidationError(f"tuple generation infeasible: {last_failure}")


def _draw_tuple(
    items: Sequence[str],
    remaining: Counter,
    seen_sets: set[frozenset[str]],
    rng: random.Random,
    allow_fill: bool,
) -> Optional[tuple[str, str, str, str]]:
    pool = [item for item, count in remaining.items() if count > 0 for _ in range(count)]
    distinct = len(set(pool))
    if distinct < 4 and not allow_fill:
        return None
    for _attempt in range(RETRY_BUDGET):
        rng.shuffle(pool)
        members: list[str] = []
        for item in pool:
            if item not in members:
                members.append(item)
                if len(members) == 4:
                    break
        if len(members) < 4:
            fillers = [item for item in items if item not in members]
            rng.shuffle(fillers)
            members.extend(fillers[: 4 - len(members)])
        key = frozenset(members)
        if len(members) == 4 and key not in seen_sets:
            return tuple(members)  # type: ignore[return-value]
    return None


def _index_tuples(tuples: Iterable[Tuple4]) -> dict[str, Tuple4]:
    index: dict[str, Tuple4] = {}
    for t in tuples:
        if t.tuple_id in index:
            raise ValidationError(f"duplicate tuple id {t.tuple_id!r}")
        index[t.tuple_id] = t
    return index


def _check_judgment(judgment: Judgment, index: Mapping[str, Tuple4]) -> Tuple4:
    t = index.get(judgment.tuple_id)
    if t is None:
        raise ValidationError(f"judgment references unknown tuple {judgment.tuple_id!r}")
    if judgment.best not in t.item_ids:
        raise ValidationError(f"judgment best {judgment.best!r} is not in tuple {judgment.tuple_id!r}")
    if judgment.worst not in t.item_ids:
        raise ValidationError(f"judgment worst {judgment.worst!r} is not in tuple {judgment.tuple_id!r}")
    return t


def aggregate_scores(tuples: Sequence[Tuple4], judgments: Sequence[Judgment]) -> ScoreTable:
    """Counting aggregation: for each item, raw = (#best - #worst) / #judgments
    on tuples containing it; score = (raw+1)/2. Items with no judgment
    exposure are absent from the table.
    """
    index = _index_tuples(tuples)
    emotions = {t.emotion for t in tuples}
    if len(emotions) > 1:
        raise ValidationError(f"tuples mix emotions: {sorted(e.value for e in emotions)}")
    emotion = next(iter(emotions)) if emotions else None

    best_counts: Counter = Counter()
    worst_counts: Counter = Counter()
    exposure: Counter = Counter()
    for judgment in judgments:
        t = _check_judgment(judgment, index)
        best_counts[judgment.best] += 1
        worst_counts[judgment.worst] += 1
        for item in t.item_ids:
            exposure[item] += 1

    raw = {item: (best_counts[item] - worst_counts[item]) / n for item, n in exposure.items()}
    scores = {item: (value + 1.0) / 2.0 for item, value in raw.items()}
    return ScoreTable(emotion=emotion, scores=scores, raw=raw, appearances=dict(exposure))


def split_half_reliability(
    tuples: Sequence[Tuple4],
    judgments: Sequence[Judgment],
    iterations: int = 100,
    seed: int = 0,
) -> ReliabilitySummary:
    """Split-half agreement: each iteration randomly halves every tuple's
    judgments, scores both halves, and correlates them over items present in
    both. Returns mean and population stddev over iterations per metric.
    """
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    index = _index_tuples(tuples)
    by_tuple: dict[str, list[Judgment]] = {tid: [] for tid in index}
    for judgment in judgments:
        _check_judgment(judgment, index)
        by_tuple[judgment.tuple_id].append(judgment)
    for tid, group in by_tuple.items():
        if len(group) < 2:
            raise ValidationError(f"tuple {tid!r} has {len(group)} judgment(s); split-half needs >= 2")

    pearsons: list[float] = []
    spearmans: list[float] = []
    for iteration in range(iterations):
        # independent deterministic sub-seed per iteration
        rng = random.Random(seed * 1_000_003 + iteration)
        half_a: list[Judgment] = []
        half_b: list[Judgment] = []
        for tid in sorted(by_tuple):
            group = list(by_tuple[tid])
            rng.shuffle(group)
            cut = (len(group) + 1) // 2
            half_a.extend(group[:cut])
            half_b.extend(group[cut:])
        table_a = aggregate_scores(tuples, half_a)
        table_b = aggregate_scores(tuples, half_b)
        common = sorted(set(table_a.scores) & set(table_b.scores))
        xs = [table_a.scores[item] for item in common]
        ys = [table_b.scores[item] for item in common]
        pearsons.append(pearson(xs, ys))
        spearmans.append(spearman(xs, ys))

    return ReliabilitySummary(
        pearson_mean=_mean(pearsons),
        pearson_std=_pop_std(pearsons),
        spearman_mean=_mean(spearmans),
        spearman_std=_pop_std(spearmans),
        iterations=iterations,
    )


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _pop_std(values: Sequence[float]) -> float:
    m = _mean(values)
    return (sum((v - m) ** 2 for v in values) / len(values)) ** 0.5


# --- JSONL interchange -------------------------------------------------------

def save_tuples_jsonl(tuples: Sequence[Tuple4], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tuples:
            fh.write(json.dumps({"tuple_id": t.tuple_id, "emotion": t.emotion.value, "item_ids": list(t.item_ids)}))
            fh.write("\n")


def load_tuples_jsonl(path: str | Path) -> list[Tuple4]:
    path = Path(path)
    tuples: list[Tuple4] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            tuples.append(
                Tuple4(
                    tuple_id=obj["tuple_id"],
                    emotion=Emotion.parse(obj["emotion"]),
                    item_ids=tuple(obj["item_ids"]),
                )
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
            raise DataFormatError(f"{path.name} line {line_no}: bad tuple record ({exc})") from None
    return tuples


def save_judgments_jsonl(judgments: Sequence[Judgment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for j in judgments:
            fh.write(judgment_to_json(j))
            fh.write("\n")


def judgment_to_json(judgment: Judgment) -> str:
    return json.dumps(
        {
            "tuple_id": judgment.tuple_id,
            "annotator_id": judgment.annotator_id,
            "best": judgment.best,
            "worst": judgment.worst,
            "timestamp": judgment.timestamp,
        }
    )


def judgment_from_json(line: str) -> Judgment:
    try:
        obj = json.loads(line)
        return Judgment(
            tuple_id=obj["tuple_id"],
            annotator_id=obj["annotator_id"],
            best=obj["best"],
            worst=obj["worst"],
            timestamp=int(obj.get("timestamp", 0)),
        )
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as exc:
        raise DataFormatError(f"bad judgment record ({exc})") from None


def load_judgments_jsonl(path: str | Path) -> list[Judgment]:
    path = Path(path)
    judgments: list[Judgment] = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            judgments.append(judgment_from_json(line))
        except (DataFormatError, ValidationError) as exc:
            raise DataFormatError(f"{path.name} line {line_no}: {exc}") from None
    return judgments
