"""Command line for the full workflow: extract features, assemble ranking
datasets, train, rank, and evaluate.

Exit codes: 0 success, 2 usage error, 3 data error (unreadable or malformed
input), 4 internal invariant violation. Errors are reported as a single
machine-parsable line on stderr: `transferrank: error: <category>: <message>`.

Every flag may also be supplied by a `--config` file of `key=value` lines
(keys are the long flag names); explicit command-line flags win.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .corpus import Corpus, load_corpus, load_gazetteer
from .dataset import (
    FeatureRow,
    join_features_and_scores,
    load_feature_table,
    load_gold_scores,
    load_ranking_dataset,
    save_feature_table,
    save_ranking_dataset,
)
from .errors import DataError
from .evaluation import (
    baseline_summary_text,
    baseline_summary_tsv,
    leave_one_out,
    loo_folds,
    report_to_text,
    report_to_tsv,
    run_all_baselines,
    topk_best_ratio,
)
from .features import PROFILES, get_profile, pairwise_feature_rows
from .gbdt import (
    IMPORTANCE_KINDS,
    TrainConfig,
    export_trees,
    feature_importance,
    load_model,
    save_model,
    train,
)
from .metrics import ranking_order
from .typology import TABLE_KINDS, TypologyIndex, load_distance_table, load_vectors

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


class UsageError(Exception):
    """Bad flags or config values; maps to exit code 2."""


@dataclass(frozen=True)
class Flag:
    name: str
    help: str
    type: Callable = str
    default: object = None
    required: bool = False
    choices: tuple | None = None
    multiple: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


HYPERPARAM_FLAGS = (
    Flag("num-trees", "number of boosting rounds", int, 100),
    Flag("max-leaves", "maximum leaves per tree", int, 16),
    Flag("learning-rate", "shrinkage applied to each tree's output", float, 0.1),
    Flag("min-leaf-count", "minimum rows in each leaf", int, 5),
    Flag("reg-lambda", "L2 regularizer added to leaf hessians", float, 1.0),
    Flag("sigma", "steepness of the pairwise logistic", float, 1.0),
    Flag("gamma-max", "relevance label assigned to the best candidate", int, 10),
    Flag("ndcg-truncation", "rank cutoff for reported NDCG", int, 3),
)

CONFIG_FLAG = Flag("config", "key=value file supplying defaults for any flag", str)

VECTOR_FLAGS = (
    Flag("syntax-vectors", "TSV of syntactic feature vectors", str),
    Flag("phonology-vectors", "TSV of phonological feature vectors", str),
    Flag("inventory-vectors", "TSV of phoneme-inventory feature vectors", str),
    Flag("family-vectors", "TSV of family-membership feature vectors", str),
    Flag("geography-vectors", "TSV of geographic-region feature vectors", str),
)
TABLE_FLAGS = (
    Flag("genetic-distances", "TSV of precomputed genetic distances", str),
    Flag("geographic-distances", "TSV of precomputed geographic distances", str),
)


@dataclass(frozen=True)
class Subcommand:
    name: str
    help: str
    flags: tuple[Flag, ...]
    run: Callable[[dict], int]


def _registry() -> dict[str, Subcommand]:
    subs = (
        Subcommand(
            "features",
            "extract per-pair features from corpora and typology data",
            (
                Flag("corpora", "manifest TSV of `lang<TAB>corpus path` rows", str, required=True),
                Flag("profile", "task profile controlling the active features", str, "mt",
                     choices=tuple(sorted(PROFILES))),
                Flag("task-lang", "restrict the task side to this language (repeatable)",
                     str, multiple=True),
                Flag("bpe-merges", "merge count for the subword learner", int, 8000),
                *VECTOR_FLAGS,
                *TABLE_FLAGS,
                Flag("output", "path of the feature TSV to write", str, required=True),
                CONFIG_FLAG,
            ),
            _cmd_features,
        ),
        Subcommand(
            "dataset",
            "join a feature table with gold scores into a ranking dataset",
            (
                Flag("features", "feature TSV from the `features` subcommand", str, required=True),
                Flag("gold-scores", "TSV of task_lang/transfer_lang/score rows", str, required=True),
                Flag("output", "path of the dataset TSV to write", str, required=True),
                CONFIG_FLAG,
            ),
            _cmd_dataset,
        ),
        Subcommand(
            "train",
            "train a ranking model on a dataset",
            (
                Flag("dataset", "ranking dataset TSV", str, required=True),
                Flag("output", "path of the model file to write", str, required=True),
                *HYPERPARAM_FLAGS,
                CONFIG_FLAG,
            ),
            _cmd_train,
        ),
        Subcommand(
            "rank",
            "rank transfer candidates for one task language",
            (
                Flag("model", "trained model file", str, required=True),
                Flag("features", "feature TSV with rows for the task language", str, required=True),
                Flag("task-lang", "the task language to rank candidates for", str, required=True),
                Flag("gold-scores", "optional gold scores; adds a true_rank column", str),
                Flag("output", "output path (stdout when omitted)", str),
                CONFIG_FLAG,
            ),
            _cmd_rank,
        ),
        Subcommand(
            "loo",
            "leave-one-out cross-validation of the trained ranker",
            (
                Flag("dataset", "ranking dataset TSV", str, required=True),
                Flag("output", "path of the report TSV to write", str, required=True),
                Flag("label", "method label recorded in the report", str, "transferrank"),
                *HYPERPARAM_FLAGS,
                CONFIG_FLAG,
            ),
            _cmd_loo,
        ),
        Subcommand(
            "baselines",
            "evaluate every single-feature baseline on a dataset",
            (
                Flag("dataset", "ranking dataset TSV", str, required=True),
                Flag("output", "path of the summary TSV to write", str, required=True),
                Flag("gamma-max", "relevance label assigned to the best candidate", int, 10),
                Flag("ndcg-truncation", "rank cutoff for reported NDCG", int, 3),
                CONFIG_FLAG,
            ),
            _cmd_baselines,
        ),
        Subcommand(
            "importance",
            "feature importance of a trained model",
            (
                Flag("model", "trained model file", str, required=True),
                Flag("kind", "importance flavor", str, "split_count", choices=IMPORTANCE_KINDS),
                Flag("output", "path of the importance TSV to write", str, required=True),
                CONFIG_FLAG,
            ),
            _cmd_importance,
        ),
        Subcommand(
            "export-trees",
            "render the trees of a trained model",
            (
                Flag("model", "trained model file", str, required=True),
                Flag("format", "rendering format", str, "text", choices=("text", "dot")),
                Flag("output", "path of the rendering to write", str, required=True),
                CONFIG_FLAG,
            ),
            _cmd_export_trees,
        ),
        Subcommand(
            "topk",
            "best attainable gold score within the top-K predictions",
            (
                Flag("dataset", "ranking dataset TSV", str, required=True),
                Flag("model", "trained model file (omit with --loo)", str),
                Flag("loo", "retrain per held-out language instead of using --model",
                     bool, False),
                Flag("max-k", "largest K to evaluate", int, 10),
                Flag("output", "path of the per-task ratio TSV to write", str, required=True),
                Flag("plot-data", "optional CSV of (K, average ratio) curve points", str),
                *HYPERPARAM_FLAGS,
                CONFIG_FLAG,
            ),
            _cmd_topk,
        ),
    )
    return {sub.name: sub for sub in subs}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="transferrank", allow_abbrev=False,
                     description="predict good transfer languages for low-resource NLP tasks")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for sub in _registry().values():
        sp = subparsers.add_parser(sub.name, help=sub.help, allow_abbrev=False)
        for flag in sub.flags:
            kwargs: dict = {"help": flag.help, "default": argparse.SUPPRESS}
            if flag.type is bool:
                kwargs["action"] = "store_true"
            else:
                kwargs["type"] = flag.type
                if flag.choices:
                    kwargs["choices"] = flag.choices
                if flag.multiple:
                    kwargs["action"] = "append"
            sp.add_argument(f"--{flag.name}", **kwargs)
    return parser


def _parse_config_file(path: str, flags: dict[str, Flag]) -> dict[str, object]:
    values: dict[str, object] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        flag = flags.get(key)
        if flag is None or key == "config":
            raise UsageError(f"{path}:{line_no}: unknown option {key!r}")
        if flag.type is bool:
            lowered = raw.lower()
            if lowered in ("1", "true", "yes"):
                values[flag.dest] = True
            elif lowered in ("0", "false", "no"):
                values[flag.dest] = False
            else:
                raise UsageError(f"{path}:{line_no}: bad boolean {raw!r} for {key}")
        elif flag.multiple:
            values[flag.dest] = [flag.type(part) for part in raw.split(",") if part]
        else:
            try:
                values[flag.dest] = flag.type(raw)
            except ValueError as exc:
                raise UsageError(f"{path}:{line_no}: bad value {raw!r} for {key}: {exc}") from exc
        if flag.choices and values.get(flag.dest) not in flag.choices:
            raise UsageError(
                f"{path}:{line_no}: {key} must be one of {list(flag.choices)}"
            )
    return values


def resolve_options(sub: Subcommand, namespace: argparse.Namespace) -> dict[str, object]:
    """Merge declared defaults, config-file values, and explicit flags."""
    flags = {flag.name: flag for flag in sub.flags}
    explicit = vars(namespace)
    merged: dict[str, object] = {
        flag.dest: ([] if flag.multiple else flag.default) for flag in sub.flags
    }
    config_path = explicit.get("config")
    if config_path is not None:
        merged.update(_parse_config_file(config_path, flags))
    merged.update((k, v) for k, v in explicit.items() if k != "subcommand")
    for flag in sub.flags:
        if flag.required and merged.get(flag.dest) in (None, "", []):
            raise UsageError(f"missing required flag --{flag.name}")
    return merged


def _train_config(opts: dict) -> TrainConfig:
    try:
        return TrainConfig(
            num_trees=opts["num_trees"],
            max_leaves=opts["max_leaves"],
            learning_rate=opts["learning_rate"],
            min_leaf_count=opts["min_leaf_count"],
            reg_lambda=opts["reg_lambda"],
            sigma=opts["sigma"],
            gamma_max=opts["gamma_max"],
            ndcg_truncation=opts["ndcg_truncation"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_corpus_manifest(path: str) -> list[tuple[str, Path]]:
    manifest = Path(path)
    try:
        lines = manifest.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read corpus manifest {path}: {exc}") from exc
    entries: list[tuple[str, Path]] = []
    seen: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise DataError(f"{path}:{line_no}: expected `lang<TAB>path`, got {line!r}")
        code, rel = fields
        if code in seen:
            raise DataError(f"{path}:{line_no}: duplicate language {code!r}")
        seen.add(code)
        corpus_path = Path(rel)
        if not corpus_path.is_absolute():
            corpus_path = manifest.parent / corpus_path
        entries.append((code, corpus_path))
    if not entries:
        raise DataError(f"{path}: empty corpus manifest")
    return entries


def _cmd_features(opts: dict) -> int:
    profile = get_profile(opts["profile"], bpe_merges=opts["bpe_merges"])
    loader = load_gazetteer if profile.size_unit == "entities" else load_corpus
    corpora: dict[str, Corpus] = {}
    for code, path in _read_corpus_manifest(opts["corpora"]):
        corpora[code] = loader(path, code)

    stores = {}
    for flag, kind in zip(VECTOR_FLAGS, ("syntax", "phonology", "inventory", "family", "geography")):
        path = opts[flag.dest]
        if path is not None:
            stores[kind] = load_vectors(path, kind)
    tables = {}
    for flag, kind in zip(TABLE_FLAGS, TABLE_KINDS):
        path = opts[flag.dest]
        if path is not None:
            tables[kind] = load_distance_table(path, kind)
    typology = TypologyIndex(stores, tables) if (stores or tables) else None

    task_langs = opts["task_lang"] or None
    rows = pairwise_feature_rows(corpora, profile, typology, task_langs)
    save_feature_table(rows, opts["output"])
    return EXIT_OK


def _cmd_dataset(opts: dict) -> int:
    features = load_feature_table(opts["features"])
    scores = load_gold_scores(opts["gold_scores"])
    dataset = join_features_and_scores(features, scores)
    save_ranking_dataset(dataset, opts["output"])
    return EXIT_OK


def _cmd_train(opts: dict) -> int:
    dataset = load_ranking_dataset(opts["dataset"])
    model = train(dataset, _train_config(opts))
    save_model(model, opts["output"])
    return EXIT_OK


def _cmd_rank(opts: dict) -> int:
    model = load_model(opts["model"])
    table = load_feature_table(opts["features"])
    task = opts["task_lang"]
    candidates: list[tuple[str, FeatureRow]] = sorted(
        (transfer, row) for (t, transfer), row in table.items() if t == task
    )
    if not candidates:
        raise DataError(f"no feature rows with task language {task!r}")
    codes = [code for code, _ in candidates]
    scores = model.predict([row for _, row in candidates])
    order = ranking_order(scores, keys=codes)

    true_ranks: dict[str, int] | None = None
    if opts["gold_scores"] is not None:
        gold = load_gold_scores(opts["gold_scores"])
        missing = [code for code in codes if (task, code) not in gold]
        if missing:
            raise DataError(f"gold scores missing for pairs: {task}/" + f", {task}/".join(missing))
        gold_values = [gold[(task, code)] for code in codes]
        gold_order = ranking_order(gold_values, keys=codes)
        true_ranks = {codes[idx]: pos + 1 for pos, idx in enumerate(gold_order)}

    header = ["rank", "transfer_lang", "score"] + (["true_rank"] if true_ranks else [])
    lines = ["\t".join(header)]
    for position, idx in enumerate(order, start=1):
        row = [str(position), codes[idx], repr(scores[idx])]
        if true_ranks:
            row.append(str(true_ranks[codes[idx]]))
        lines.append("\t".join(row))
    _write_output("\n".join(lines) + "\n", opts["output"])
    return EXIT_OK


def _cmd_loo(opts: dict) -> int:
    dataset = load_ranking_dataset(opts["dataset"])
    report = leave_one_out(dataset, _train_config(opts), method_label=opts["label"])
    _write_output(report_to_tsv(report), opts["output"])
    sys.stdout.write(report_to_text(report))
    return EXIT_OK


def _cmd_baselines(opts: dict) -> int:
    dataset = load_ranking_dataset(opts["dataset"])
    reports = run_all_baselines(
        dataset, p=opts["ndcg_truncation"], gamma_max=opts["gamma_max"]
    )
    _write_output(baseline_summary_tsv(reports), opts["output"])
    sys.stdout.write(baseline_summary_text(reports))
    return EXIT_OK


def _cmd_importance(opts: dict) -> int:
    model = load_model(opts["model"])
    weights = feature_importance(model, kind=opts["kind"])
    lines = ["\t".join(("feature", f"importance_{opts['kind']}"))]
    lines.extend(f"{name}\t{weight!r}" for name, weight in weights.items())
    _write_output("\n".join(lines) + "\n", opts["output"])
    return EXIT_OK


def _cmd_export_trees(opts: dict) -> int:
    model = load_model(opts["model"])
    _write_output(export_trees(model, fmt=opts["format"]), opts["output"])
    return EXIT_OK


def _cmd_topk(opts: dict) -> int:
    dataset = load_ranking_dataset(opts["dataset"])
    config = _train_config(opts)
    per_task: dict[str, tuple[list[str], dict[str, float]]] = {}
    if opts["loo"]:
        for held_out, training, test_group in loo_folds(dataset, config.gamma_max):
            model = train(training, config)
            scores = model.predict([c.features for c in test_group.candidates])
            order = ranking_order(scores, keys=test_group.transfer_langs)
            ranking = [test_group.transfer_langs[i] for i in order]
            gold = {c.transfer_lang: c.gold_score for c in test_group.candidates}
            per_task[held_out] = (ranking, gold)
    else:
        if opts["model"] is None:
            raise UsageError("topk needs either --model or --loo")
        model = load_model(opts["model"])
        for group in dataset.groups(config.gamma_max):
            scores = model.predict([c.features for c in group.candidates])
            order = ranking_order(scores, keys=group.transfer_langs)
            ranking = [group.transfer_langs[i] for i in order]
            gold = {c.transfer_lang: c.gold_score for c in group.candidates}
            per_task[group.task_lang] = (ranking, gold)

    max_k = opts["max_k"]
    if max_k < 1:
        raise UsageError(f"--max-k must be >= 1, got {max_k}")
    lines = ["\t".join(("k", "task_lang", "best_score_ratio"))]
    curve: list[tuple[int, float]] = []
    for k in range(1, max_k + 1):
        ratios = []
        for task in sorted(per_task):
            ranking, gold = per_task[task]
            ratio = topk_best_ratio(ranking, gold, k)
            ratios.append(ratio)
            lines.append("\t".join((str(k), task, repr(ratio))))
        mean = sum(ratios) / len(ratios)
        curve.append((k, mean))
        lines.append("\t".join((str(k), "(mean)", repr(mean))))
    _write_output("\n".join(lines) + "\n", opts["output"])

    if opts["plot_data"] is not None:
        csv_lines = ["k,average_best_ratio"]
        csv_lines.extend(f"{k},{mean!r}" for k, mean in curve)
        Path(opts["plot_data"]).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _fail(category: str, message: str) -> int:
    flat = " ".join(str(message).split())
    sys.stderr.write(f"transferrank: error: {category}: {flat}\n")
    return {"usage": EXIT_USAGE, "data": EXIT_DATA}.get(category, EXIT_INTERNAL)


def main(argv: Sequence[str] | None = None) -> int:
    registry = _registry()
    parser = build_parser()
    try:
        namespace = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc))
    sub_name = getattr(namespace, "subcommand", None)
    if sub_name is None:
        return _fail("usage", "a subcommand is required; see --help")
    sub = registry[sub_name]
    try:
        opts = resolve_options(sub, namespace)
        return sub.run(opts)
    except UsageError as exc:
        return _fail("usage", str(exc))
    except DataError as exc:
        return _fail("data", str(exc))
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports everything
        return _fail("internal", f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
