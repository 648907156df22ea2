"""Leave-one-out evaluation, single-feature baselines, and top-K curves.

The leave-one-out protocol holds one language out per fold: the ranker is
trained on the remaining languages (each serving as task language with the
others as candidates, the held-out language excluded from both roles and
relevance labels recomputed on the reduced groups), then ranks all remaining
languages as transfer candidates for the held-out one. Folds are independent
and could run in parallel; results are assembled in language order either
way, so reports never depend on input file order.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from .dataset import FEATURE_NAMES, RankingDataset, RankingGroup
from .errors import DataError, SchemaError
from .gbdt import GbdtModel, TrainConfig, train
from .metrics import ndcg_at_p, ranking_order


@dataclass(frozen=True)
class FoldResult:
    held_out_lang: str
    ndcg: float
    predicted_ranking: tuple[str, ...]
    gold_ranking: tuple[str, ...]


@dataclass(frozen=True)
class EvalReport:
    method_label: str
    truncation: int
    per_fold: tuple[FoldResult, ...]

    @property
    def mean_ndcg(self) -> float:
        if not self.per_fold:
            return 0.0
        return sum(f.ndcg for f in self.per_fold) / len(self.per_fold)


def _check_fold_integrity(held_out: str, training: RankingDataset) -> None:
    """Protocol invariant: the held-out language appears in no training group."""
    for task, transfer in training.pairs:
        if held_out in (task, transfer):
            raise RuntimeError(
                f"leave-one-out integrity violation: {held_out} leaked into "
                f"training pair {task}/{transfer}"
            )


def loo_folds(
    dataset: RankingDataset, gamma_max: int
) -> Iterator[tuple[str, RankingDataset, RankingGroup]]:
    """Yield (held_out_lang, training dataset, test group) per language.

    Training groups with fewer than two candidates after removing the
    held-out language are dropped: a single-candidate group carries no
    ranking signal. The test group always ranks every other language.
    """
    langs = dataset.languages
    if len(langs) < 3:
        raise DataError(f"leave-one-out needs >= 3 languages, got {len(langs)}")
    task_langs = set(dataset.task_languages)
    for code in langs:
        if code not in task_langs:
            raise DataError(
                f"language {code!r} never appears as a task language; "
                "it has no gold scores to evaluate against"
            )
    for held_out in langs:
        training = dataset.without_language(held_out)
        candidate_counts = Counter(task for task, _ in training.pairs)
        training = RankingDataset(
            training.feature_names,
            {
                pair: record
                for pair, record in training.pairs.items()
                if candidate_counts[pair[0]] >= 2
            },
        )
        _check_fold_integrity(held_out, training)
        test_group = dataset.group(held_out, gamma_max)
        yield held_out, training, test_group


def _rank_codes(group: RankingGroup, scores: Sequence[float]) -> tuple[str, ...]:
    codes = group.transfer_langs
    order = ranking_order(list(scores), keys=codes)
    return tuple(codes[i] for i in order)


def leave_one_out(
    dataset: RankingDataset,
    config: TrainConfig = TrainConfig(),
    p: int | None = None,
    method_label: str = "transferrank",
) -> EvalReport:
    """Train and score one model per held-out language; report NDCG@p."""
    truncation = config.ndcg_truncation if p is None else p
    folds = []
    for held_out, training, test_group in loo_folds(dataset, config.gamma_max):
        model = train(training, config)
        scores = model.predict([c.features for c in test_group.candidates])
        ndcg = ndcg_at_p(
            scores, list(test_group.relevances), truncation, keys=test_group.transfer_langs
        )
        folds.append(
            FoldResult(
                held_out_lang=held_out,
                ndcg=ndcg,
                predicted_ranking=_rank_codes(test_group, scores),
                gold_ranking=_rank_codes(test_group, list(test_group.gold_scores)),
            )
        )
    return EvalReport(method_label, truncation, tuple(folds))


# The ten single-feature baselines: overlap and size features favor large
# values, distance-like features favor small ones.
BASELINE_SPECS: tuple[tuple[str, str], ...] = (
    ("word_overlap", "desc"),
    ("subword_overlap", "desc"),
    ("size_ratio", "desc"),
    ("ttr_distance", "asc"),
    ("genetic_distance", "asc"),
    ("syntactic_distance", "asc"),
    ("featural_distance", "asc"),
    ("phonological_distance", "asc"),
    ("inventory_distance", "asc"),
    ("geographic_distance", "asc"),
)


def baseline_rank(
    dataset: RankingDataset,
    feature_name: str,
    order: str,
    p: int = 3,
    gamma_max: int = 10,
) -> EvalReport:
    """Rank every task group by one feature alone; no training involved.

    Missing feature values rank last regardless of sort direction: a missing
    measurement is never evidence of similarity.
    """
    if feature_name not in FEATURE_NAMES:
        raise SchemaError(f"unknown feature {feature_name!r}")
    if order not in ("asc", "desc"):
        raise ValueError(f"order must be 'asc' or 'desc', got {order!r}")
    folds = []
    for group in dataset.groups(gamma_max):
        values = [c.features.get(feature_name) for c in group.candidates]
        codes = group.transfer_langs
        ranking = ranking_order(values, keys=codes, descending=(order == "desc"))
        # Feed NDCG scores that reproduce exactly this ordering.
        scores = [0.0] * len(values)
        for position, idx in enumerate(ranking):
            scores[idx] = float(len(values) - position)
        ndcg = ndcg_at_p(scores, list(group.relevances), p, keys=codes)
        folds.append(
            FoldResult(
                held_out_lang=group.task_lang,
                ndcg=ndcg,
                predicted_ranking=tuple(codes[i] for i in ranking),
                gold_ranking=_rank_codes(group, list(group.gold_scores)),
            )
        )
    return EvalReport(f"baseline:{feature_name}:{order}", p, tuple(folds))


def run_all_baselines(
    dataset: RankingDataset, p: int = 3, gamma_max: int = 10
) -> list[EvalReport]:
    """Every registered single-feature baseline, in registry order."""
    return [
        baseline_rank(dataset, feature, order, p, gamma_max)
        for feature, order in BASELINE_SPECS
    ]


def topk_best_ratio(
    predicted_ranking: Sequence[str],
    gold_scores: Mapping[str, float],
    k: int,
) -> float:
    """Best gold score reachable with the top-k predictions, relative to the
    overall best. Gold scores must be positive; k is clamped to the
    candidate count."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not predicted_ranking:
        raise DataError("empty predicted ranking")
    if set(predicted_ranking) != set(gold_scores):
        raise SchemaError("predicted ranking and gold scores cover different candidates")
    if any(score <= 0 for score in gold_scores.values()):
        raise DataError("top-k best-score ratios require positive gold scores")
    k = min(k, len(predicted_ranking))
    best_in_k = max(gold_scores[code] for code in predicted_ranking[:k])
    return best_in_k / max(gold_scores.values())


def topk_curve(
    per_task: Mapping[str, tuple[Sequence[str], Mapping[str, float]]],
    max_k: int,
) -> list[tuple[int, float]]:
    """(k, mean ratio over task languages) points for k = 1..max_k."""
    if max_k < 1:
        raise ValueError(f"max_k must be >= 1, got {max_k}")
    if not per_task:
        raise DataError("no task languages supplied")
    points = []
    for k in range(1, max_k + 1):
        ratios = [
            topk_best_ratio(ranking, gold, k)
            for ranking, gold in (per_task[t] for t in sorted(per_task))
        ]
        points.append((k, sum(ratios) / len(ratios)))
    return points


REPORT_FORMAT = "transferrank.report"
REPORT_FORMAT_VERSION = 1


def report_to_tsv(report: EvalReport) -> str:
    """Machine-readable report: commented header, then one row per fold."""
    lines = [
        f"# format: {REPORT_FORMAT} v{REPORT_FORMAT_VERSION}",
        f"# method: {report.method_label}",
        f"# metric: NDCG@{report.truncation}",
        f"# folds: {len(report.per_fold)}",
        f"# mean_ndcg: {report.mean_ndcg!r}",
        "\t".join(("held_out_lang", f"ndcg_at_{report.truncation}", "predicted_ranking", "gold_ranking")),
    ]
    for fold in report.per_fold:
        lines.append(
            "\t".join(
                (
                    fold.held_out_lang,
                    repr(fold.ndcg),
                    ",".join(fold.predicted_ranking),
                    ",".join(fold.gold_ranking),
                )
            )
        )
    return "\n".join(lines) + "\n"


def report_to_text(report: EvalReport, top: int = 3) -> str:
    """Human-readable table with per-fold NDCG and top predictions."""
    header = f"{report.method_label}  (mean NDCG@{report.truncation} = {report.mean_ndcg:.4f})"
    rows = [header, "-" * len(header)]
    width = max((len(f.held_out_lang) for f in report.per_fold), default=4)
    for fold in report.per_fold:
        predicted = " ".join(fold.predicted_ranking[:top])
        gold = " ".join(fold.gold_ranking[:top])
        rows.append(
            f"{fold.held_out_lang:<{width}}  ndcg={fold.ndcg:.4f}  "
            f"top{top}={predicted}  gold={gold}"
        )
    return "\n".join(rows) + "\n"


def baseline_summary_tsv(reports: Sequence[EvalReport]) -> str:
    """Long-format summary of several reports: mean row then per-fold rows."""
    lines = [
        f"# format: {REPORT_FORMAT} v{REPORT_FORMAT_VERSION}",
        "\t".join(("method", "task_lang", "ndcg")),
    ]
    for report in reports:
        lines.append("\t".join((report.method_label, "(mean)", repr(report.mean_ndcg))))
        for fold in report.per_fold:
            lines.append(
                "\t".join((report.method_label, fold.held_out_lang, repr(fold.ndcg)))
            )
    return "\n".join(lines) + "\n"


def baseline_summary_text(reports: Sequence[EvalReport]) -> str:
    width = max(len(r.method_label) for r in reports)
    lines = ["single-feature baselines", "-" * 24]
    for report in sorted(reports, key=lambda r: (-r.mean_ndcg, r.method_label)):
        lines.append(
            f"{report.method_label:<{width}}  mean NDCG@{report.truncation} = {report.mean_ndcg:.4f}"
        )
    return "\n".join(lines) + "\n"
