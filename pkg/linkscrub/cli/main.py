import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from linkscrub.cli.evasion import evade, registry
from linkscrub.cli.filter_list import emit_filter_list, export_adblock
from linkscrub.cli.robustness import robustness
from linkscrub.cli.settings import LOG_FORMAT, LOG_LEVELS, PipelineSettings
from linkscrub.cli.stats import DEFAULT_TOP_N, prevalence
from linkscrub.cli.synthetic import SyntheticConfig, generate_synthetic, write_corpus
from linkscrub.core.constants import FEATURE_VERSION
from linkscrub.core.exceptions import FeatureVersionError, InvariantViolation, LinkscrubError, ParsingError
from linkscrub.core.patterns import ErrorWrapper
from linkscrub.features.keywords import KeywordLists
from linkscrub.features.matrix import FeatureMatrix, build_feature_matrix, read_feature_matrix
from linkscrub.forest.config import ClassBalance, ForestConfig
from linkscrub.forest.dataset import Dataset
from linkscrub.forest.evaluation import cross_validate
from linkscrub.forest.forest import dumps_predictions, predict_matrix, read_predictions, train, write_predictions
from linkscrub.forest.importance import feature_importance
from linkscrub.forest.persistence import load_forest, save_forest
from linkscrub.graph.dump import dump_graph
from linkscrub.graph.pipeline import page_graphs
from linkscrub.labels.labeling import (
    dumps_labels,
    label_decorations,
    label_map,
    labeling_summary,
    labels_from_map,
    read_labels,
)
from linkscrub.labels.models import Label
from linkscrub.labels.rules import RequestFilter, read_request_rules
from linkscrub.labels.sources import CookiePurposeDb, CuratedList, read_cookie_purposes, read_curated_list
from linkscrub.traces.io import read_traces, write_traces
from linkscrub.urls.rules import FilterList, SanitizeMode, parse_filter_list
from linkscrub.urls.sanitizer import sanitize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT_ERROR = 1
EXIT_INVARIANT_VIOLATION = 2

cli_errors = ErrorWrapper(
    error_mappings={
        ValidationError: ParsingError,
        OSError: ParsingError,
        UnicodeDecodeError: ParsingError,
    },
)


def _emit(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
        return

    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="")
    logger.info("Wrote %s", path)


def _read_filter_list(path: str) -> FilterList:
    return parse_filter_list(Path(path).read_text(encoding="utf-8"))


def _check_format_version(settings: PipelineSettings, version: str = FEATURE_VERSION):
    if settings.format_version != version:
        raise FeatureVersionError(f"requested feature version {settings.format_version!r}, found {version!r}")


def _read_matrix(path: str, settings: PipelineSettings) -> FeatureMatrix:
    matrix = read_feature_matrix(path)
    _check_format_version(settings, matrix.version)
    return matrix


def _dataset(args: argparse.Namespace, settings: PipelineSettings) -> Dataset:
    matrix = _read_matrix(args.matrix, settings)
    return Dataset.from_matrix(matrix, label_map(read_labels(args.labels)))


def _forest_config(args: argparse.Namespace, settings: PipelineSettings) -> ForestConfig:
    features_per_split = getattr(args, "features_per_split", "sqrt")
    if isinstance(features_per_split, str) and features_per_split.isdigit():
        features_per_split = int(features_per_split)

    return ForestConfig(
        tree_count=settings.tree_count,
        max_depth=getattr(args, "max_depth", None),
        features_per_split=features_per_split,
        bootstrap=not getattr(args, "no_bootstrap", False),
        seed=settings.seed,
        class_balance=getattr(args, "class_balance", ClassBalance.DOWNSAMPLE),
        threshold=settings.threshold,
        n_jobs=settings.n_jobs,
    )


def _graphs(path: str, settings: PipelineSettings):
    return page_graphs(read_traces(path), min_len=settings.min_value_len, partial=settings.partial_matching)


def command_parse(args: argparse.Namespace, settings: PipelineSettings):
    traces = read_traces(args.path)
    if args.out is not None:
        write_traces(traces, args.out)

    for trace in traces:
        sys.stdout.write(f"{trace.trace_id}\t{trace.site}\t{len(trace.events)} events\n")


def command_graph(args: argparse.Namespace, settings: PipelineSettings):
    graphs = _graphs(args.path, settings)

    if args.out is None:
        sys.stdout.write("".join(dump_graph(graph) for graph in graphs))
        return

    for graph in graphs:
        _emit(dump_graph(graph), str(Path(args.out) / f"{graph.trace_id}.graph"))


def command_features(args: argparse.Namespace, settings: PipelineSettings):
    _check_format_version(settings)
    keywords = KeywordLists.load(args.keywords) if args.keywords else None
    matrix = build_feature_matrix(_graphs(args.path, settings), keywords)
    _emit(matrix.dumps(), args.out)


def command_label(args: argparse.Namespace, settings: PipelineSettings):
    labeled = label_decorations(
        _graphs(args.path, settings),
        read_request_rules(args.request_rules) if args.request_rules else RequestFilter(),
        read_cookie_purposes(args.cookie_purposes) if args.cookie_purposes else CookiePurposeDb(),
        read_curated_list(args.curated) if args.curated else CuratedList(),
    )
    _emit(dumps_labels(labeled), args.out)

    if args.out is not None:
        sys.stdout.write(labeling_summary(labeled).render())


def command_train(args: argparse.Namespace, settings: PipelineSettings):
    dataset = _dataset(args, settings)
    forest = train(dataset, _forest_config(args, settings))
    save_forest(forest, args.out)

    if args.importance:
        for item in feature_importance(forest, dataset, label=Label.ATS):
            sys.stdout.write(f"{item.feature}\t{item.percent:.2f}\n")


def command_cv(args: argparse.Namespace, settings: PipelineSettings):
    dataset = _dataset(args, settings)
    if args.shuffle_labels:
        dataset = dataset.shuffled_labels(settings.seed)

    report = cross_validate(dataset, k=args.folds or settings.folds, cfg=_forest_config(args, settings))
    sys.stdout.write(report.json(sort_keys=True) + "\n" if args.json else report.render())


def command_predict(args: argparse.Namespace, settings: PipelineSettings):
    forest = load_forest(args.forest)
    matrix = _read_matrix(args.matrix, settings)
    forest.check_version(matrix.version)

    forest = forest.copy(update={"config": forest.config.copy(update={"threshold": settings.threshold})})
    predictions = predict_matrix(forest, matrix)

    if args.out is None:
        sys.stdout.write(dumps_predictions(predictions))
    else:
        write_predictions(predictions, args.out)


def command_emit_list(args: argparse.Namespace, settings: PipelineSettings):
    filter_list = emit_filter_list(
        read_predictions(args.predictions),
        settings.threshold,
        action=args.action,
        model_version=args.model_version,
    )
    _emit(filter_list.dumps(), args.out)


def command_export_adblock(args: argparse.Namespace, settings: PipelineSettings):
    export = export_adblock(_read_filter_list(args.list))
    _emit(export.text, args.out)


def command_sanitize(args: argparse.Namespace, settings: PipelineSettings):
    """Sanitizes the URLs given as arguments, or one URL per stdin line"""
    rules = _read_filter_list(args.list)
    mode = SanitizeMode(args.mode) if args.mode else None
    urls = args.urls or [line.strip() for line in sys.stdin if line.strip()]

    for url in urls:
        sys.stdout.write(sanitize(url, args.site, rules, mode=mode, seed=settings.seed) + "\n")


def command_generate(args: argparse.Namespace, settings: PipelineSettings):
    overrides = {
        "sites": args.sites,
        "trackers_per_site": args.trackers_per_site,
        "identifier_length": args.identifier_length,
        "functional_noise": args.functional_noise,
    }
    cfg = SyntheticConfig(seed=settings.seed, **{key: value for key, value in overrides.items() if value is not None})
    corpus = generate_synthetic(cfg)
    traces_dir = write_corpus(corpus, args.out_dir)
    sys.stdout.write(
        f"{len(corpus.traces)} traces in {traces_dir}, {len(corpus.labels)} labels, {len(corpus.planted)} planted\n"
    )


def command_evade(args: argparse.Namespace, settings: PipelineSettings):
    corpus = evade(args.technique, read_traces(args.path), seed=settings.seed)
    out_dir = Path(args.out_dir)
    write_traces(corpus.traces, out_dir / "traces")
    _emit(corpus.dumps_origins(), str(out_dir / "origins.csv"))

    if args.labels:
        carried = corpus.carry_labels(label_map(read_labels(args.labels)))
        _emit(dumps_labels(labels_from_map(carried)), str(out_dir / "labels.csv"))


def command_stats(args: argparse.Namespace, settings: PipelineSettings):
    report = prevalence(
        _graphs(args.path, settings),
        label_map(read_labels(args.labels)),
        request_rules=read_request_rules(args.request_rules) if args.request_rules else None,
        top_n=args.top,
    )
    sys.stdout.write(report.render())


def command_robustness(args: argparse.Namespace, settings: PipelineSettings):
    labels = label_map(read_labels(args.labels))
    planted = {decoration_id for decoration_id, label in labels.items() if label == Label.ATS}
    report = robustness(
        read_traces(args.path),
        labels,
        planted,
        cfg=_forest_config(args, settings),
        k=args.folds or settings.folds,
        min_len=settings.min_value_len,
        seed=settings.seed,
    )
    sys.stdout.write(report.render())


def _add_forest_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--max-depth", type=int, default=None, help="maximum tree depth, unlimited by default")
    parser.add_argument(
        "--features-per-split",
        default="sqrt",
        help="features tried per split: sqrt, log2, all or an integer",
    )
    parser.add_argument("--no-bootstrap", action="store_true", default=False, help="grow every tree on all rows")
    parser.add_argument(
        "--class-balance",
        choices=[balance.value for balance in ClassBalance],
        default=ClassBalance.DOWNSAMPLE.value,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkscrub",
        description="Detect and sanitize tracking link decorations",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--seed", type=int, default=None, help="seed of every random choice")
    parser.add_argument("--min-value-len", type=int, default=None, help="shortest value matched against storage")
    parser.add_argument("--threshold", type=float, default=None, help="lowest ATS score that flags a decoration")
    parser.add_argument("--format-version", default=None, help="feature matrix version to require")
    parser.add_argument("--log-level", choices=LOG_LEVELS, default=None)
    commands = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    command = commands.add_parser("parse", help="validate traces and optionally write them normalized")
    command.add_argument("path", help="trace file or directory of .jsonl traces")
    command.add_argument("--out", default=None, help="directory for normalized traces")
    command.set_defaults(handler=command_parse)

    command = commands.add_parser("graph", help="dump the page graphs of traces")
    command.add_argument("path")
    command.add_argument("--out", default=None, help="directory for one .graph file per trace")
    command.set_defaults(handler=command_graph)

    command = commands.add_parser("features", help="build the feature matrix of traces")
    command.add_argument("path")
    command.add_argument("--out", default=None)
    command.add_argument("--keywords", default=None, help="JSON keyword lists replacing the bundled ones")
    command.set_defaults(handler=command_features)

    command = commands.add_parser("label", help="label decorations from the ground truth sources")
    command.add_argument("path")
    command.add_argument("--request-rules", default=None)
    command.add_argument("--cookie-purposes", default=None)
    command.add_argument("--curated", default=None)
    command.add_argument("--out", default=None)
    command.set_defaults(handler=command_label)

    command = commands.add_parser("train", help="train a forest on a labeled feature matrix")
    command.add_argument("matrix")
    command.add_argument("labels")
    command.add_argument("--out", required=True, help="forest JSON file")
    command.add_argument("--importance", action="store_true", default=False, help="print the ATS feature ranking")
    _add_forest_arguments(command)
    command.set_defaults(handler=command_train)

    command = commands.add_parser("cv", help="stratified k-fold cross validation")
    command.add_argument("matrix")
    command.add_argument("labels")
    command.add_argument("--folds", type=int, default=None)
    command.add_argument("--json", action="store_true", default=False)
    command.add_argument("--shuffle-labels", action="store_true", default=False, help="label-permuted control run")
    _add_forest_arguments(command)
    command.set_defaults(handler=command_cv)

    command = commands.add_parser("predict", help="score a feature matrix with a trained forest")
    command.add_argument("forest")
    command.add_argument("matrix")
    command.add_argument("--out", default=None)
    command.set_defaults(handler=command_predict)

    command = commands.add_parser("emit-list", help="turn predictions into a filter list")
    command.add_argument("predictions")
    command.add_argument("--out", default=None)
    command.add_argument("--action", choices=[mode.value for mode in SanitizeMode], default=SanitizeMode.REPLACE.value)
    command.add_argument("--model-version", default="")
    command.set_defaults(handler=command_emit_list)

    command = commands.add_parser("export-adblock", help="render a filter list as removeparam rules")
    command.add_argument("list")
    command.add_argument("--out", default=None)
    command.set_defaults(handler=command_export_adblock)

    command = commands.add_parser("sanitize", help="sanitize URLs with a filter list")
    command.add_argument("list")
    command.add_argument("urls", nargs="*", metavar="URL", help="URLs to sanitize, stdin lines when none given")
    command.add_argument("--site", required=True, help="registrable domain of the visited page")
    command.add_argument("--mode", choices=[mode.value for mode in SanitizeMode], default=None)
    command.set_defaults(handler=command_sanitize)

    command = commands.add_parser("generate", help="write a synthetic corpus with its ground truth")
    command.add_argument("out_dir")
    command.add_argument("--sites", type=int, default=None)
    command.add_argument("--trackers-per-site", type=int, default=None)
    command.add_argument("--identifier-length", type=int, default=None)
    command.add_argument("--functional-noise", type=float, default=None)
    command.set_defaults(handler=command_generate)

    command = commands.add_parser("evade", help="rewrite traces with an evasion technique")
    command.add_argument("technique", choices=sorted(registry))
    command.add_argument("path")
    command.add_argument("out_dir")
    command.add_argument("--labels", default=None, help="labels to carry over to the rewritten decorations")
    command.set_defaults(handler=command_evade)

    command = commands.add_parser("stats", help="prevalence of decorations by kind and label")
    command.add_argument("path")
    command.add_argument("labels")
    command.add_argument("--request-rules", default=None, help="rules deciding ATS endpoints")
    command.add_argument("--top", type=int, default=DEFAULT_TOP_N)
    command.set_defaults(handler=command_stats)

    command = commands.add_parser("robustness", help="measure the classifier against the evasion techniques")
    command.add_argument("path")
    command.add_argument("labels")
    command.add_argument("--folds", type=int, default=None)
    command.set_defaults(handler=command_robustness)

    return parser


@cli_errors.decorate
def load_settings(args: argparse.Namespace) -> PipelineSettings:
    """Flags given on the command line win over LINKSCRUB_* variables"""
    flags = {
        "seed": args.seed,
        "min_value_len": args.min_value_len,
        "threshold": args.threshold,
        "format_version": args.format_version,
        "log_level": args.log_level,
    }
    return PipelineSettings(**{name: value for name, value in flags.items() if value is not None})


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT_ERROR if exc.code else EXIT_OK

    try:
        settings = load_settings(args)
        logging.basicConfig(level=settings.log_level, format=LOG_FORMAT)

        with cli_errors:
            args.handler(args, settings)
    except InvariantViolation as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVARIANT_VIOLATION
    except LinkscrubError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
