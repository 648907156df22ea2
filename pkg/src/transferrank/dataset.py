"""Feature schema, ranking groups, and the TSV formats that carry them.

All tabular files are UTF-8 TSV with a header row and the literal string
`NA` for missing values:

* feature table:   task_lang, transfer_lang, <14 feature columns>
* gold-score table: task_lang, transfer_lang, score
* ranking dataset: task_lang, transfer_lang, gold_score, <14 feature columns>
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError, SchemaError
from .metrics import assign_relevance

NA = "NA"

FEATURE_NAMES: tuple[str, ...] = (
    "transfer_size",
    "task_size",
    "size_ratio",
    "transfer_ttr",
    "task_ttr",
    "ttr_distance",
    "word_overlap",
    "subword_overlap",
    "genetic_distance",
    "syntactic_distance",
    "featural_distance",
    "phonological_distance",
    "inventory_distance",
    "geographic_distance",
)

DATASET_FEATURE_NAMES = FEATURE_NAMES[:8]
TYPOLOGY_FEATURE_NAMES = FEATURE_NAMES[8:]


@dataclass(frozen=True)
class FeatureRow:
    """Feature values for one (task, transfer) pair, aligned to FEATURE_NAMES."""

    values: tuple[float | None, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(FEATURE_NAMES):
            raise SchemaError(
                f"feature row has {len(self.values)} values, schema has {len(FEATURE_NAMES)}"
            )
        for name, value in zip(FEATURE_NAMES, self.values):
            if value is not None and (math.isnan(value) or math.isinf(value)):
                raise SchemaError(f"feature {name} must be finite or missing, got {value}")

    @staticmethod
    def from_mapping(values: Mapping[str, float | None]) -> "FeatureRow":
        unknown = set(values) - set(FEATURE_NAMES)
        if unknown:
            raise SchemaError(f"unknown feature names: {sorted(unknown)}")
        return FeatureRow(tuple(values.get(name) for name in FEATURE_NAMES))

    def get(self, feature_name: str) -> float | None:
        try:
            idx = FEATURE_NAMES.index(feature_name)
        except ValueError:
            raise SchemaError(f"unknown feature {feature_name!r}") from None
        return self.values[idx]


@dataclass(frozen=True)
class Candidate:
    transfer_lang: str
    features: FeatureRow
    gold_score: float
    relevance: int


@dataclass(frozen=True)
class RankingGroup:
    """One task language with its scored transfer candidates."""

    task_lang: str
    candidates: tuple[Candidate, ...]

    def __post_init__(self) -> None:
        codes = [c.transfer_lang for c in self.candidates]
        if len(set(codes)) != len(codes):
            raise DataError(f"group {self.task_lang}: duplicate transfer languages")
        if self.task_lang in codes:
            raise DataError(f"group {self.task_lang}: task language listed as its own candidate")

    @property
    def transfer_langs(self) -> tuple[str, ...]:
        return tuple(c.transfer_lang for c in self.candidates)

    @property
    def gold_scores(self) -> tuple[float, ...]:
        return tuple(c.gold_score for c in self.candidates)

    @property
    def relevances(self) -> tuple[int, ...]:
        return tuple(c.relevance for c in self.candidates)


def make_group(
    task_lang: str,
    scored_rows: Iterable[tuple[str, FeatureRow, float]],
    gamma_max: int,
) -> RankingGroup:
    """Build a group with relevance labels derived from the gold scores.

    Candidates are kept in ascending transfer-code order so downstream row
    order never depends on input file order.
    """
    rows = sorted(scored_rows, key=lambda r: r[0])
    if not rows:
        raise DataError(f"group {task_lang}: no candidates")
    codes = [code for code, _, _ in rows]
    scores = [score for _, _, score in rows]
    labels = assign_relevance(scores, gamma_max, keys=codes)
    candidates = tuple(
        Candidate(code, features, score, label)
        for (code, features, score), label in zip(rows, labels)
    )
    return RankingGroup(task_lang, candidates)


@dataclass(frozen=True)
class RankingDataset:
    """Gold scores and features for every observed (task, transfer) pair."""

    feature_names: tuple[str, ...]
    pairs: dict[tuple[str, str], tuple[FeatureRow, float]]

    def __post_init__(self) -> None:
        if self.feature_names != FEATURE_NAMES:
            raise SchemaError(
                "dataset feature schema does not match the package schema: "
                f"{list(self.feature_names)}"
            )
        for task, transfer in self.pairs:
            if task == transfer:
                raise DataError(f"pair {task}/{transfer}: task equals transfer language")

    @property
    def task_languages(self) -> tuple[str, ...]:
        return tuple(sorted({task for task, _ in self.pairs}))

    @property
    def languages(self) -> tuple[str, ...]:
        seen = {code for pair in self.pairs for code in pair}
        return tuple(sorted(seen))

    def group(self, task_lang: str, gamma_max: int, exclude: frozenset[str] = frozenset()) -> RankingGroup:
        rows = [
            (transfer, features, gold)
            for (task, transfer), (features, gold) in self.pairs.items()
            if task == task_lang and transfer not in exclude
        ]
        return make_group(task_lang, rows, gamma_max)

    def groups(self, gamma_max: int) -> tuple[RankingGroup, ...]:
        return tuple(self.group(task, gamma_max) for task in self.task_languages)

    def without_language(self, language_code: str) -> "RankingDataset":
        """Drop a language from both the task and the transfer side."""
        kept = {
            pair: record
            for pair, record in self.pairs.items()
            if language_code not in pair
        }
        return RankingDataset(self.feature_names, kept)


def _parse_float(raw: str, path: Path, line_no: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataError(f"{path}:{line_no}: bad {column} value {raw!r}") from exc
    if math.isnan(value) or math.isinf(value):
        raise DataError(f"{path}:{line_no}: {column} must be finite, got {raw!r}")
    return value


def _parse_feature(raw: str, path: Path, line_no: int, column: str) -> float | None:
    if raw == NA:
        return None
    return _parse_float(raw, path, line_no, column)


def _format_value(value: float | None) -> str:
    return NA if value is None else repr(value)


def _read_tsv(path: Path) -> list[tuple[int, list[str]]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        rows.append((line_no, line.split("\t")))
    if not rows:
        raise DataError(f"{path}: empty table")
    return rows


def _check_header(path: Path, got: list[str], expected: Sequence[str]) -> None:
    if got != list(expected):
        raise SchemaError(
            f"{path}:1: header mismatch; expected {list(expected)}, got {got}"
        )


FEATURE_TABLE_HEADER = ("task_lang", "transfer_lang") + FEATURE_NAMES
GOLD_TABLE_HEADER = ("task_lang", "transfer_lang", "score")
DATASET_HEADER = ("task_lang", "transfer_lang", "gold_score") + FEATURE_NAMES


def load_feature_table(path: str | Path) -> dict[tuple[str, str], FeatureRow]:
    path = Path(path)
    rows = _read_tsv(path)
    _check_header(path, rows[0][1], FEATURE_TABLE_HEADER)
    table: dict[tuple[str, str], FeatureRow] = {}
    for line_no, fields in rows[1:]:
        if len(fields) != len(FEATURE_TABLE_HEADER):
            raise DataError(
                f"{path}:{line_no}: expected {len(FEATURE_TABLE_HEADER)} columns, got {len(fields)}"
            )
        pair = (fields[0], fields[1])
        if pair in table:
            raise DataError(f"{path}:{line_no}: duplicate pair {pair[0]}/{pair[1]}")
        values = tuple(
            _parse_feature(raw, path, line_no, name)
            for raw, name in zip(fields[2:], FEATURE_NAMES)
        )
        table[pair] = FeatureRow(values)
    return table


def save_feature_table(
    table: Mapping[tuple[str, str], FeatureRow], path: str | Path
) -> None:
    path = Path(path)
    lines = ["\t".join(FEATURE_TABLE_HEADER)]
    for (task, transfer) in sorted(table):
        row = table[(task, transfer)]
        lines.append(
            "\t".join([task, transfer] + [_format_value(v) for v in row.values])
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_gold_scores(path: str | Path) -> dict[tuple[str, str], float]:
    path = Path(path)
    rows = _read_tsv(path)
    _check_header(path, rows[0][1], GOLD_TABLE_HEADER)
    scores: dict[tuple[str, str], float] = {}
    for line_no, fields in rows[1:]:
        if len(fields) != 3:
            raise DataError(f"{path}:{line_no}: expected 3 columns, got {len(fields)}")
        pair = (fields[0], fields[1])
        if pair in scores:
            raise DataError(f"{path}:{line_no}: duplicate pair {pair[0]}/{pair[1]}")
        scores[pair] = _parse_float(fields[2], path, line_no, "score")
    return scores


def save_gold_scores(scores: Mapping[tuple[str, str], float], path: str | Path) -> None:
    path = Path(path)
    lines = ["\t".join(GOLD_TABLE_HEADER)]
    for (task, transfer) in sorted(scores):
        lines.append("\t".join([task, transfer, repr(scores[(task, transfer)])]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def join_features_and_scores(
    features: Mapping[tuple[str, str], FeatureRow],
    gold_scores: Mapping[tuple[str, str], float],
) -> RankingDataset:
    """Strict inner join: the two inputs must cover exactly the same pairs."""
    feature_pairs = set(features)
    score_pairs = set(gold_scores)
    only_features = sorted(feature_pairs - score_pairs)
    only_scores = sorted(score_pairs - feature_pairs)
    if only_features or only_scores:
        parts = []
        if only_features:
            listed = ", ".join(f"{t}/{a}" for t, a in only_features[:5])
            parts.append(f"pairs with features but no gold score: {listed}")
        if only_scores:
            listed = ", ".join(f"{t}/{a}" for t, a in only_scores[:5])
            parts.append(f"pairs with gold score but no features: {listed}")
        raise DataError("; ".join(parts))
    pairs = {pair: (features[pair], gold_scores[pair]) for pair in sorted(feature_pairs)}
    return RankingDataset(FEATURE_NAMES, pairs)


def load_ranking_dataset(path: str | Path) -> RankingDataset:
    path = Path(path)
    rows = _read_tsv(path)
    _check_header(path, rows[0][1], DATASET_HEADER)
    pairs: dict[tuple[str, str], tuple[FeatureRow, float]] = {}
    for line_no, fields in rows[1:]:
        if len(fields) != len(DATASET_HEADER):
            raise DataError(
                f"{path}:{line_no}: expected {len(DATASET_HEADER)} columns, got {len(fields)}"
            )
        pair = (fields[0], fields[1])
        if pair in pairs:
            raise DataError(f"{path}:{line_no}: duplicate pair {pair[0]}/{pair[1]}")
        gold = _parse_float(fields[2], path, line_no, "gold_score")
        values = tuple(
            _parse_feature(raw, path, line_no, name)
            for raw, name in zip(fields[3:], FEATURE_NAMES)
        )
        pairs[pair] = (FeatureRow(values), gold)
    return RankingDataset(FEATURE_NAMES, dict(sorted(pairs.items())))


def save_ranking_dataset(dataset: RankingDataset, path: str | Path) -> None:
    path = Path(path)
    lines = ["\t".join(DATASET_HEADER)]
    for (task, transfer) in sorted(dataset.pairs):
        row, gold = dataset.pairs[(task, transfer)]
        lines.append(
            "\t".join(
                [task, transfer, repr(gold)] + [_format_value(v) for v in row.values]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
