"""Typological language distances from URIEL-style data files.

Three kinds of distance feed the ranker:

* cosine distances computed here from binary feature vectors (syntactic,
  phonological, inventory), loaded from TSV vector files;
* a featural cosine distance over the concatenation of all loaded vector
  families (syntax, phonology, inventory, family, geography), unweighted;
* genetic and geographic distances ingested as precomputed pair tables,
  since tree and geodesic derivation is out of scope for this toolkit.

Vector entries are 0, 1 or missing (`--`). Dimensions missing in either
language are dropped before the cosine; if nothing usable remains the
distance is recorded as missing rather than raised as an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .errors import DataError

MISSING_MARKERS = frozenset({"--", "NA"})

# Canonical family order for the concatenated featural vector.
VECTOR_KINDS = ("syntax", "phonology", "inventory", "family", "geography")
TABLE_KINDS = ("genetic", "geographic")


@dataclass(frozen=True)
class TypologyVectorStore:
    """Binary-with-missing feature vectors for a set of languages."""

    kind: str
    feature_names: tuple[str, ...]
    vectors: dict[str, tuple[float | None, ...]]

    def __contains__(self, language_code: str) -> bool:
        return language_code in self.vectors

    @property
    def languages(self) -> tuple[str, ...]:
        return tuple(self.vectors)

    def vector(self, language_code: str) -> tuple[float | None, ...] | None:
        return self.vectors.get(language_code)


@dataclass(frozen=True)
class PrecomputedDistanceTable:
    """Symmetric language-pair distances in [0, 1], keyed by unordered pair."""

    distance_name: str
    entries: dict[tuple[str, str], float]

    def __contains__(self, language_code: str) -> bool:
        return any(language_code in pair for pair in self.entries)

    def lookup(self, lang_a: str, lang_b: str) -> float | None:
        return self.entries.get(_pair_key(lang_a, lang_b))

    @property
    def languages(self) -> tuple[str, ...]:
        seen = {code for pair in self.entries for code in pair}
        return tuple(sorted(seen))


@dataclass(frozen=True)
class LinguisticDistances:
    """The six pairwise distances; None marks data unavailable for the pair."""

    genetic: float | None
    syntactic: float | None
    featural: float | None
    phonological: float | None
    inventory: float | None
    geographic: float | None

    def as_feature_mapping(self) -> dict[str, float | None]:
        return {
            "genetic_distance": self.genetic,
            "syntactic_distance": self.syntactic,
            "featural_distance": self.featural,
            "phonological_distance": self.phonological,
            "inventory_distance": self.inventory,
            "geographic_distance": self.geographic,
        }


def _pair_key(lang_a: str, lang_b: str) -> tuple[str, str]:
    return (lang_a, lang_b) if lang_a <= lang_b else (lang_b, lang_a)


def _parse_entry(raw: str, path: Path, line_no: int) -> float | None:
    if raw in MISSING_MARKERS:
        return None
    if raw == "0":
        return 0.0
    if raw == "1":
        return 1.0
    raise DataError(
        f"{path}:{line_no}: vector entry must be 0, 1 or '--', got {raw!r}"
    )


def load_vectors(path: str | Path, vector_kind: str) -> TypologyVectorStore:
    """Load a TSV vector file: header `lang <feature names...>`, rows of
    language code followed by entries in {0, 1, --}."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read vector file {path}: {exc}") from exc
    if not lines:
        raise DataError(f"{path}: empty vector file")
    header = lines[0].split("\t")
    if len(header) < 2 or header[0] != "lang":
        raise DataError(f"{path}:1: header must be 'lang' followed by feature names")
    feature_names = tuple(header[1:])
    vectors: dict[str, tuple[float | None, ...]] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(feature_names) + 1:
            raise DataError(
                f"{path}:{line_no}: expected {len(feature_names) + 1} columns, got {len(fields)}"
            )
        code = fields[0]
        if code in vectors:
            raise DataError(f"{path}:{line_no}: duplicate language code {code!r}")
        values = tuple(_parse_entry(raw, path, line_no) for raw in fields[1:])
        if all(v is None for v in values):
            raise DataError(f"{path}:{line_no}: language {code!r} has no non-missing entries")
        vectors[code] = values
    return TypologyVectorStore(vector_kind, feature_names, vectors)


def save_vectors(store: TypologyVectorStore, path: str | Path) -> None:
    """Serialize a vector store back to the TSV format `load_vectors` reads."""
    path = Path(path)
    lines = ["\t".join(("lang",) + store.feature_names)]
    for code, values in store.vectors.items():
        entries = ["--" if v is None else str(int(v)) for v in values]
        lines.append("\t".join([code] + entries))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_distance_table(path: str | Path, distance_name: str) -> PrecomputedDistanceTable:
    """Load a precomputed distance table: TSV rows `lang_a lang_b distance`.

    Lines starting with `#` are provenance comments. Distances must lie in
    [0, 1]; conflicting duplicates for the same unordered pair are rejected.
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read distance table {path}: {exc}") from exc
    entries: dict[tuple[str, str], float] = {}
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise DataError(f"{path}:{line_no}: expected 3 columns, got {len(fields)}")
        lang_a, lang_b, raw = fields
        try:
            value = float(raw)
        except ValueError as exc:
            raise DataError(f"{path}:{line_no}: bad distance value {raw!r}") from exc
        if not (0.0 <= value <= 1.0) or math.isnan(value):
            raise DataError(f"{path}:{line_no}: distance {value} outside [0, 1]")
        key = _pair_key(lang_a, lang_b)
        if key in entries and entries[key] != value:
            raise DataError(
                f"{path}:{line_no}: conflicting duplicate for pair {key[0]}/{key[1]}"
            )
        entries[key] = value
    return PrecomputedDistanceTable(distance_name, entries)


def save_distance_table(table: PrecomputedDistanceTable, path: str | Path) -> None:
    path = Path(path)
    lines = [f"# {table.distance_name} distances"]
    for (lang_a, lang_b), value in sorted(table.entries.items()):
        lines.append(f"{lang_a}\t{lang_b}\t{value!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cosine_distance(
    a: Sequence[float | None], b: Sequence[float | None]
) -> float | None:
    """1 - cosine similarity over the dimensions present in both vectors.

    Returns None (a missing measurement, not an error) when the shared
    support is empty or either restricted vector has zero norm.
    """
    if len(a) != len(b):
        raise DataError(f"vector length mismatch: {len(a)} vs {len(b)}")
    dot = 0.0
    norm_a = 0.0
    norm_b = 0.0
    shared = 0
    for x, y in zip(a, b):
        if x is None or y is None:
            continue
        shared += 1
        dot += x * y
        norm_a += x * x
        norm_b += y * y
    if shared == 0 or norm_a == 0.0 or norm_b == 0.0:
        return None
    dist = 1.0 - dot / math.sqrt(norm_a * norm_b)
    # Guard against float drift just outside [0, 1].
    return min(1.0, max(0.0, dist))


def query_distances(
    task_lang: str,
    transfer_lang: str,
    stores: Mapping[str, TypologyVectorStore],
    tables: Mapping[str, PrecomputedDistanceTable],
) -> LinguisticDistances:
    """All six distances for a language pair; unavailable data yields None.

    The featural distance is the cosine over the unweighted concatenation of
    every loaded vector family, in the canonical `VECTOR_KINDS` order. A
    language known to no store and no table is an error.
    """
    for code in (task_lang, transfer_lang):
        known = any(code in store for store in stores.values()) or any(
            code in table for table in tables.values()
        )
        if not known:
            raise DataError(f"language {code!r} is unknown to every typology source")

    def store_distance(kind: str) -> float | None:
        store = stores.get(kind)
        if store is None:
            return None
        va = store.vector(task_lang)
        vb = store.vector(transfer_lang)
        if va is None or vb is None:
            return None
        return cosine_distance(va, vb)

    concat_a: list[float | None] = []
    concat_b: list[float | None] = []
    for kind in VECTOR_KINDS:
        store = stores.get(kind)
        if store is None:
            continue
        width = len(store.feature_names)
        va = store.vector(task_lang) or (None,) * width
        vb = store.vector(transfer_lang) or (None,) * width
        concat_a.extend(va)
        concat_b.extend(vb)
    featural = cosine_distance(concat_a, concat_b) if concat_a else None

    def table_distance(name: str) -> float | None:
        table = tables.get(name)
        if table is None:
            return None
        return table.lookup(task_lang, transfer_lang)

    return LinguisticDistances(
        genetic=table_distance("genetic"),
        syntactic=store_distance("syntax"),
        featural=featural,
        phonological=store_distance("phonology"),
        inventory=store_distance("inventory"),
        geographic=table_distance("geographic"),
    )


class TypologyIndex:
    """Bundle of vector stores and distance tables with a pairwise memo cache.

    Stores and tables are immutable after construction; cached values are
    keyed by unordered pair, so concurrent lookups may at worst recompute and
    insert the identical value.
    """

    def __init__(
        self,
        stores: Mapping[str, TypologyVectorStore] | None = None,
        tables: Mapping[str, PrecomputedDistanceTable] | None = None,
    ) -> None:
        self.stores = dict(stores or {})
        self.tables = dict(tables or {})
        self._cache: dict[tuple[str, str], LinguisticDistances] = {}

    def distances(self, task_lang: str, transfer_lang: str) -> LinguisticDistances:
        key = _pair_key(task_lang, transfer_lang)
        cached = self._cache.get(key)
        if cached is None:
            cached = query_distances(task_lang, transfer_lang, self.stores, self.tables)
            self._cache[key] = cached
        return cached
