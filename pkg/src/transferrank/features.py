"""Dataset-dependent features of a (task, transfer) corpus pair.

Task profiles control which features are computed: entity-linking data
consists of named entities, so type-token-ratio features are meaningless
there, and subword overlap is only extracted for machine-translation-style
corpora where enough text exists to learn a subword vocabulary. Disabled
features are recorded as missing, never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .bpe import SubwordVocabulary, learn_bpe
from .corpus import Corpus
from .dataset import FeatureRow
from .errors import DataError
from .typology import LinguisticDistances, TypologyIndex

DEFAULT_BPE_MERGES = 8000

SIZE_UNITS = ("sentences", "entities")


@dataclass(frozen=True)
class DatasetFeatures:
    """Corpus-statistics features for one pair; None marks a disabled or
    uncomputable feature."""

    transfer_size: float | None
    task_size: float | None
    size_ratio: float | None
    transfer_ttr: float | None
    task_ttr: float | None
    ttr_distance: float | None
    word_overlap: float | None
    subword_overlap: float | None

    def as_feature_mapping(self) -> dict[str, float | None]:
        return {
            "transfer_size": self.transfer_size,
            "task_size": self.task_size,
            "size_ratio": self.size_ratio,
            "transfer_ttr": self.transfer_ttr,
            "task_ttr": self.task_ttr,
            "ttr_distance": self.ttr_distance,
            "word_overlap": self.word_overlap,
            "subword_overlap": self.subword_overlap,
        }


@dataclass(frozen=True)
class TaskProfile:
    """Which features a downstream task admits, and how size is counted."""

    name: str
    size_unit: str = "sentences"
    include_ttr: bool = True
    include_subword: bool = True
    bpe_merges: int = DEFAULT_BPE_MERGES

    def __post_init__(self) -> None:
        if self.size_unit not in SIZE_UNITS:
            raise ValueError(f"size_unit must be one of {SIZE_UNITS}, got {self.size_unit!r}")


MT_PROFILE = TaskProfile("mt")
EL_PROFILE = TaskProfile("el", size_unit="entities", include_ttr=False, include_subword=False)
POS_PROFILE = TaskProfile("pos", include_subword=False)
DEP_PROFILE = TaskProfile("dep", include_subword=False)

PROFILES: dict[str, TaskProfile] = {
    p.name: p for p in (MT_PROFILE, EL_PROFILE, POS_PROFILE, DEP_PROFILE)
}


def get_profile(name: str, bpe_merges: int | None = None) -> TaskProfile:
    try:
        profile = PROFILES[name]
    except KeyError:
        raise DataError(f"unknown task profile {name!r}; expected one of {sorted(PROFILES)}") from None
    if bpe_merges is not None:
        profile = replace(profile, bpe_merges=bpe_merges)
    return profile


def type_token_ratio(corpus: Corpus) -> float:
    """Distinct tokens over total tokens, a lexical-diversity proxy in (0, 1]."""
    if corpus.token_count == 0:
        raise DataError(f"type-token ratio undefined for empty corpus {corpus.language_code!r}")
    return len(corpus.type_set) / corpus.token_count


def ttr_distance(transfer_ttr: float, task_ttr: float) -> float:
    """Squared relative difference (1 - transfer_ttr / task_ttr)^2.

    Deliberately asymmetric: the transfer ratio is measured against the task
    ratio, not the other way around.
    """
    for name, value in (("transfer", transfer_ttr), ("task", task_ttr)):
        if not (0.0 < value <= 1.0):
            raise DataError(f"{name} type-token ratio must lie in (0, 1], got {value}")
    return (1.0 - transfer_ttr / task_ttr) ** 2


def word_overlap(transfer: Corpus, task: Corpus) -> float:
    """|shared types| / (|transfer types| + |task types|), in [0, 0.5]."""
    if transfer.token_count == 0 or task.token_count == 0:
        raise DataError("word overlap undefined for an empty corpus")
    shared = len(transfer.type_set & task.type_set)
    return shared / (len(transfer.type_set) + len(task.type_set))


def subword_overlap(
    transfer: Corpus,
    task: Corpus,
    transfer_vocab: SubwordVocabulary,
    task_vocab: SubwordVocabulary,
) -> float:
    """|shared subword types| / (|transfer subwords| + |task subwords|)."""
    if not transfer_vocab.subword_types or not task_vocab.subword_types:
        raise DataError("subword overlap undefined for an empty subword vocabulary")
    for corp, vocab in ((transfer, transfer_vocab), (task, task_vocab)):
        chars = {ch for tok in corp.type_set for ch in tok}
        if not chars <= vocab.subword_types:
            raise DataError(
                f"subword vocabulary does not cover corpus {corp.language_code!r}; "
                "was it learned from a different corpus?"
            )
    shared = len(transfer_vocab.subword_types & task_vocab.subword_types)
    return shared / (len(transfer_vocab.subword_types) + len(task_vocab.subword_types))


def size_features(
    transfer: Corpus, task: Corpus, unit: str = "sentences"
) -> tuple[float, float, float]:
    """(transfer size, task size, transfer/task ratio) in training examples.

    `sentences` counts lines; `entities` counts tokens, which for gazetteer
    corpora (one entity per line, kept as one token) is the entry count.
    """
    if unit not in SIZE_UNITS:
        raise ValueError(f"unit must be one of {SIZE_UNITS}, got {unit!r}")
    if unit == "sentences":
        s_transfer, s_task = transfer.sentence_count, task.sentence_count
    else:
        s_transfer, s_task = transfer.token_count, task.token_count
    if s_task == 0:
        raise DataError(f"task corpus {task.language_code!r} is empty; size ratio undefined")
    return float(s_transfer), float(s_task), s_transfer / s_task


def extract_features(
    task: Corpus,
    transfer: Corpus,
    profile: TaskProfile,
    task_vocab: SubwordVocabulary | None = None,
    transfer_vocab: SubwordVocabulary | None = None,
) -> DatasetFeatures:
    """All dataset-dependent features the profile enables for one pair.

    Subword vocabularies are learned per corpus on demand when the profile
    includes subword overlap; pass precomputed ones to avoid relearning when
    iterating over many pairs.
    """
    s_transfer, s_task, ratio = size_features(transfer, task, profile.size_unit)
    overlap = word_overlap(transfer, task)

    t_transfer = t_task = d_ttr = None
    if profile.include_ttr:
        t_transfer = type_token_ratio(transfer)
        t_task = type_token_ratio(task)
        d_ttr = ttr_distance(t_transfer, t_task)

    o_subword = None
    if profile.include_subword:
        if transfer_vocab is None:
            transfer_vocab = learn_bpe([transfer], profile.bpe_merges)
        if task_vocab is None:
            task_vocab = learn_bpe([task], profile.bpe_merges)
        o_subword = subword_overlap(transfer, task, transfer_vocab, task_vocab)

    return DatasetFeatures(
        transfer_size=s_transfer,
        task_size=s_task,
        size_ratio=ratio,
        transfer_ttr=t_transfer,
        task_ttr=t_task,
        ttr_distance=d_ttr,
        word_overlap=overlap,
        subword_overlap=o_subword,
    )


def build_feature_row(
    dataset_features: DatasetFeatures | None,
    distances: LinguisticDistances | None,
) -> FeatureRow:
    """Assemble the full 14-feature row; absent components stay missing."""
    values: dict[str, float | None] = {}
    if dataset_features is not None:
        values.update(dataset_features.as_feature_mapping())
    if distances is not None:
        values.update(distances.as_feature_mapping())
    return FeatureRow.from_mapping(values)


def pairwise_feature_rows(
    corpora: Mapping[str, Corpus],
    profile: TaskProfile,
    typology: TypologyIndex | None = None,
    task_langs: Iterable[str] | None = None,
) -> dict[tuple[str, str], FeatureRow]:
    """Feature rows for every ordered (task, transfer) pair of the corpora.

    Subword vocabularies are learned once per language. Restricting
    `task_langs` limits the task side; every other corpus still serves as a
    transfer candidate. Pure function of its inputs, safe to parallelize
    over pairs externally.
    """
    langs = sorted(corpora)
    tasks = sorted(task_langs) if task_langs is not None else langs
    unknown = [code for code in tasks if code not in corpora]
    if unknown:
        raise DataError(f"task languages without a corpus: {unknown}")

    vocabs: dict[str, SubwordVocabulary] = {}
    if profile.include_subword:
        for code in langs:
            vocabs[code] = learn_bpe([corpora[code]], profile.bpe_merges)

    rows: dict[tuple[str, str], FeatureRow] = {}
    for task_code in tasks:
        for transfer_code in langs:
            if transfer_code == task_code:
                continue
            ds = extract_features(
                corpora[task_code],
                corpora[transfer_code],
                profile,
                task_vocab=vocabs.get(task_code),
                transfer_vocab=vocabs.get(transfer_code),
            )
            ling = typology.distances(task_code, transfer_code) if typology else None
            rows[(task_code, transfer_code)] = build_feature_row(ds, ling)
    return rows
