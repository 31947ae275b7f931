"""Command-line surface: ``llpbench preprocess|bag|filter|metrics|cluster|train|report``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, NoReturn, Optional, Sequence, Tuple

import pandas as pd

from . import __version__
from .error_handlers import error_envelope, report_error
from .formats.validators import require_valid
from .methods import load_method, method_names, require_supported
from .orchestrator import WorkItem, collect_runs, correlations, results_table, run_jobs
from .orchestrator.aggregator import run_documents
from .stages.bagging import (
    BagCollection,
    BagFile,
    GroupingKey,
    clipping_stats,
    count_retained,
    dataset_id,
    enumerate_candidate_keys,
    filter_bags,
    fixed_size_feature_bags,
    group_by_key,
    parse_key,
    passes_dataset_filter,
    random_fixed_bags,
    read_bags,
    write_bags,
)
from .stages.characterize import Axis, classify_all, reports_from_frame
from .stages.hardness import REPORT_COLUMNS, SpaceMode, hardness_report, skewed_large_bag_fraction
from .stages.harness import (
    Metric,
    TrainConfig,
    TrainRun,
    aggregate_runs,
    five_fold_split,
    instance_level_train,
    train,
)
from .stages.ingest import InstanceTable, Mode, Task, load_csv, load_table_schema, preprocess, read_table, write_table
from .stages.model import DEFAULT_HIDDEN, save_checkpoint
from .utils.audit import record_stage_event
from .utils.config import DEFAULT_JOBS, PipelineConfig, load_pipeline_config, split_csv_option
from .utils.errors import ArtifactNotFoundError, ConfigurationError, EmptyDataError
from .utils.hex import config_hash, fingerprint
from .utils.io import dumps_json, require_file, write_frame, write_json
from .utils.logging import configure_root, increment_counter, stage_scope

logger = logging.getLogger(__name__)

Handler = Callable[[argparse.Namespace, PipelineConfig, str], List[Path]]

_UNHASHED = frozenset({"func", "debug", "jobs", "config"})
CLIPPING_COLUMNS = (
    "dataset_id",
    "bags_created",
    "bags_retained",
    "retained_fraction",
    "mean_size",
    "std_size",
    "skewed_large_fraction",
    "kept",
)
AGGREGATE_COLUMNS = ("dataset_id", "method", "metric", "runs", "mean", "std", "auc_mean", "auc_std")


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors surface as :class:`ConfigurationError`."""

    def error(self, message: str) -> NoReturn:
        raise ConfigurationError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Shared helpers


def _seed(args: argparse.Namespace, config: PipelineConfig) -> int:
    return args.seed if args.seed is not None else config.seeds[0]


def _out_dir(args: argparse.Namespace, config: PipelineConfig) -> Path:
    return Path(args.out) if args.out is not None else Path(config.output_dir)


def _parameters(args: argparse.Namespace) -> Dict[str, object]:
    params: Dict[str, object] = {}
    for name, value in sorted(vars(args).items()):
        if name in _UNHASHED:
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = [str(item) if isinstance(item, Path) else item for item in value]
        params[name] = value
    return params


def _command_hash(args: argparse.Namespace, config: PipelineConfig) -> str:
    return config_hash(
        {"command": args.command, "args": _parameters(args), "config": config.to_dict()}
    )


def _bag_paths(values: Sequence[str]) -> List[Path]:
    """Expand files and directories (``*.bags.jsonl``) into a sorted, de-duplicated list."""

    paths: List[Path] = []
    for value in values:
        path = Path(value)
        if path.is_dir():
            paths.extend(sorted(path.glob("*.bags.jsonl")))
        elif path.is_file():
            paths.append(path)
        else:
            raise ArtifactNotFoundError(path, "bag file or directory")
    unique = sorted(set(paths))
    if not unique:
        raise EmptyDataError(f"no bag files found under {', '.join(values)}")
    return unique


def _load_bags(
    paths: Sequence[Path], table: InstanceTable, table_fp: str
) -> List[Tuple[Path, BagFile]]:
    return [(path, read_bags(path, table, table_fingerprint=table_fp)) for path in paths]


def _parse_ints(value: Optional[str], *, flag: str) -> List[int]:
    try:
        return [int(part) for part in split_csv_option(value)]
    except ValueError as exc:
        raise ConfigurationError(f"{flag} expects comma-separated integers, got {value!r}") from exc


def _parse_high(value: Optional[str], default: int) -> Optional[int]:
    if value is None:
        return default
    if value.strip().lower() == "none":
        return None
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigurationError(f"--high expects an integer or 'none', got {value!r}") from exc


def _checked_payload(schema: str, payload: Mapping[str, object], source: str) -> Dict[str, object]:
    """Validate the JSON form of *payload* (infinities already rendered as strings)."""

    plain = json.loads(dumps_json(payload))
    require_valid(schema, plain, source=source)
    return plain


# ---------------------------------------------------------------------------
# preprocess


def _preprocess_one(raw_path: Path, schema_path: Path, mode: Optional[str], target: Path, digest: str) -> Path:
    schema = load_table_schema(schema_path)
    if mode is not None:
        schema = replace(schema, mode=Mode(mode))
    raw = load_csv(raw_path, schema.columns, header=schema.header, delimiter=schema.delimiter)
    table, vocab = preprocess(raw, schema)
    write_table(
        target,
        table,
        vocab=vocab,
        config_hash=digest,
        upstream={
            "input": fingerprint(raw_path.read_bytes()),
            "schema": fingerprint(schema_path.read_bytes()),
        },
    )
    return target


def cmd_preprocess(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    inputs = [args.input] if args.input else list(config.inputs)
    if not inputs:
        raise ConfigurationError("preprocess needs --input or a config with inputs")
    out = _out_dir(args, config)
    schema_override = args.schema or config.schema
    written: List[Path] = []
    for text in inputs:
        raw_path = require_file(text, "input CSV")
        schema_path = (
            Path(schema_override) if schema_override else raw_path.with_name(raw_path.stem + ".schema.json")
        )
        # Several config inputs get one subdirectory each.
        target = out / "table.csv" if len(inputs) == 1 else out / raw_path.stem / "table.csv"
        written.append(_preprocess_one(raw_path, schema_path, args.mode or config.mode, target, digest))
    return written


# ---------------------------------------------------------------------------
# bag


def _requested_keys(args: argparse.Namespace, table: InstanceTable) -> List[GroupingKey]:
    keys: List[GroupingKey] = [parse_key(text, table) for text in args.key]
    if args.all_pairs:
        keys.extend(enumerate_candidate_keys(table.n_cat, args.max_key_size))
    return keys


def _config_keys(args: argparse.Namespace, config: PipelineConfig, table: InstanceTable) -> List[GroupingKey]:
    if config.keys == "all-pairs":
        return enumerate_candidate_keys(table.n_cat, args.max_key_size)
    return [parse_key(text, table) for text in config.keys]


def _bag_builders(
    args: argparse.Namespace, config: PipelineConfig, table: InstanceTable
) -> List[Callable[[], BagCollection]]:
    seed = _seed(args, config)
    sizes = _parse_ints(args.q, flag="--q") or list(config.bag_sizes)
    builders: List[Callable[[], BagCollection]] = [
        (lambda key=key: group_by_key(table, key)) for key in _requested_keys(args, table)
    ]
    if args.random:
        builders.extend((lambda q=q: random_fixed_bags(table, q, seed)) for q in sizes)
    for text in args.fixed:
        key = parse_key(text, table)
        builders.extend((lambda key=key, q=q: fixed_size_feature_bags(table, key, q, seed)) for q in sizes)
    if builders:
        return builders
    # No bagging flags: fall back to the config's key list.
    return [(lambda key=key: group_by_key(table, key)) for key in _config_keys(args, config, table)]


def _count_keys(
    args: argparse.Namespace, config: PipelineConfig, table: InstanceTable, table_fp: str, digest: str
) -> Path:
    keys = _requested_keys(args, table) or _config_keys(args, config, table)
    limits = config.thresholds
    retained = count_retained(table, keys, low=limits.low, high=limits.high, min_retain=limits.min_retain)
    logger.info("cli.key_count", extra={"candidates": len(keys), "retained": retained})
    return write_json(
        _out_dir(args, config) / "key_count.json",
        {
            "table_fingerprint": table_fp,
            "config_hash": digest,
            "keys": [list(key.columns) for key in keys],
            "candidates": len(keys),
            "retained": retained,
            "thresholds": {"low": limits.low, "high": limits.high, "min_retain": limits.min_retain},
        },
    )


def cmd_bag(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    table, table_fp = read_table(args.table)
    if args.count_only:
        return [_count_keys(args, config, table, table_fp, digest)]
    out = _out_dir(args, config)
    builders = _bag_builders(args, config, table)

    def build(make: Callable[[], BagCollection]) -> Tuple[str, BagCollection]:
        coll = make()
        return dataset_id(coll, table), coll

    built = run_jobs(
        [WorkItem(key=("bag", str(idx)), run=lambda make=make: build(make)) for idx, make in enumerate(builders)],
        jobs=args.jobs,
    )
    written: List[Path] = []
    seen: set[str] = set()
    for ds, coll in built:
        if ds in seen:
            continue
        seen.add(ds)
        path = out / f"{ds}.bags.jsonl"
        write_bags(path, coll, table, table_fingerprint=table_fp, config_hash=digest)
        written.append(path)
    logger.info("cli.bag", extra={"datasets": len(written)})
    return written


# ---------------------------------------------------------------------------
# filter


def cmd_filter(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    table, table_fp = read_table(args.table)
    low = args.low if args.low is not None else config.thresholds.low
    high = _parse_high(args.high, config.thresholds.high)
    min_retain = args.min_retain if args.min_retain is not None else config.thresholds.min_retain
    if not 0.0 < min_retain <= 1.0:
        raise ConfigurationError(f"--min-retain must lie in (0, 1], got {min_retain}")
    if not 0.0 < args.skew_eps < 0.5:
        raise ConfigurationError(f"--skew-eps must lie in (0, 0.5), got {args.skew_eps}")
    out = _out_dir(args, config)
    rows: List[Dict[str, object]] = []
    upstream: Dict[str, str] = {"table": table_fp}
    written: List[Path] = []
    for path, bag_file in _load_bags(_bag_paths(args.bags), table, table_fp):
        upstream[bag_file.dataset_id] = bag_file.fingerprint
        filtered = filter_bags(bag_file.collection, low, high)
        stats = clipping_stats(bag_file.collection, filtered, table)
        kept = bool(len(filtered)) and passes_dataset_filter(filtered, table, min_retain)
        if table.task is not Task.BINARY:
            skewed = math.nan
        elif high is None:
            skewed = 0.0
        else:
            skewed = skewed_large_bag_fraction(table, bag_file.collection, high, args.skew_eps)
        rows.append({"dataset_id": bag_file.dataset_id, **stats, "skewed_large_fraction": skewed, "kept": kept})
        if not kept:
            increment_counter("filter.datasets_dropped")
            logger.info(
                "cli.filter_dropped",
                extra={"dataset_id": bag_file.dataset_id, "retained_fraction": stats["retained_fraction"]},
            )
            continue
        target = out / path.name
        write_bags(target, filtered, table, table_fingerprint=table_fp, config_hash=digest)
        written.append(target)
    clipping = out / "clipping.csv"
    write_frame(clipping, pd.DataFrame(rows, columns=list(CLIPPING_COLUMNS)), config_hash=digest, upstream=upstream)
    return written + [clipping]


# ---------------------------------------------------------------------------
# metrics


def cmd_metrics(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    table, table_fp = read_table(args.table)
    out = _out_dir(args, config)
    bag_files = _load_bags(_bag_paths(args.bags), table, table_fp)

    def measure(bag_file: BagFile):
        return hardness_report(
            table,
            bag_file.collection,
            dataset_id=bag_file.dataset_id,
            space_mode=args.space,
            provenance={
                "table_fingerprint": table_fp,
                "bags_fingerprint": bag_file.fingerprint,
                "config_hash": digest,
            },
        )

    reports = run_jobs(
        [WorkItem(key=(bf.dataset_id,), run=lambda bf=bf: measure(bf)) for _, bf in bag_files],
        jobs=args.jobs,
    )
    written: List[Path] = []
    for report in reports:
        target = out / "reports" / f"{report.dataset_id}.report.json"
        write_json(target, _checked_payload("hardness_report.v1.json", report.to_dict(), str(target)))
        written.append(target)
    metrics = out / "metrics.csv"
    frame = pd.DataFrame([report.csv_row() for report in reports], columns=list(REPORT_COLUMNS))
    upstream = {"table": table_fp, **{bf.dataset_id: bf.fingerprint for _, bf in bag_files}}
    write_frame(metrics, frame, config_hash=digest, upstream=upstream)
    return written + [metrics]


# ---------------------------------------------------------------------------
# cluster


def cmd_cluster(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    source = require_file(args.metrics, "metrics table")
    data = source.read_bytes()
    reports = reports_from_frame(pd.read_csv(source))
    ks = {
        Axis.TAIL_SIZE: args.k_tail,
        Axis.LABEL_VARIATION: args.k_label,
        Axis.BAG_SEPARATION: args.k_sep,
    }
    assignments = classify_all(reports, {axis: k for axis, k in ks.items() if k > 0}, seed=_seed(args, config))
    rows = [row for assignment in assignments for row in assignment.rows()]
    target = _out_dir(args, config) / "clusters.csv"
    write_frame(
        target,
        pd.DataFrame(rows, columns=["dataset_id", "axis", "cluster_name"]),
        config_hash=digest,
        upstream={"metrics": fingerprint(data)},
    )
    return [target]


# ---------------------------------------------------------------------------
# train


def _hidden(value: str) -> Tuple[int, int]:
    sizes = _parse_ints(value, flag="--hidden")
    if len(sizes) != 2 or min(sizes) < 1:
        raise ConfigurationError(f"--hidden expects two positive sizes like 128,64, got {value!r}")
    return sizes[0], sizes[1]


def _train_config(args: argparse.Namespace, config: PipelineConfig) -> TrainConfig:
    overrides = {
        "lr": args.lr,
        "bags_per_batch": args.bags_per_batch,
        "patience": args.patience,
        "max_epochs": args.epochs,
        "metric": args.metric,
        "instances_per_batch": args.instances_per_batch,
        "instance_loss": args.instance_loss,
    }
    base = TrainConfig(seed=_seed(args, config), hidden=_hidden(args.hidden))
    return replace(base, **{key: value for key, value in overrides.items() if value is not None})


def _run_payload(run: TrainRun, provenance: Mapping[str, str], *, timings: bool, source: str) -> Dict[str, object]:
    payload = {**run.to_dict(include_timing=timings), **provenance}
    return _checked_payload("train_run.v1.json", payload, source)


def cmd_train(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    table, table_fp = read_table(args.table)
    out = _out_dir(args, config)
    base = _train_config(args, config)
    methods = split_csv_option(args.method) or list(config.methods)
    if not args.bags and not args.instance_level:
        raise ConfigurationError("train needs --bags, --instance-level, or both")
    for name in methods:
        require_supported(load_method(name), table.task)

    written: List[Path] = []
    if args.bags:
        bag_files = _load_bags(_bag_paths(args.bags), table, table_fp)
        items: List[WorkItem[TrainRun]] = []
        provenance: Dict[Tuple[str, str, int], Dict[str, str]] = {}
        for _, bag_file in bag_files:
            plan = five_fold_split(table, bag_file.collection, base.seed, n_folds=args.folds)
            for name in methods:
                run_config = replace(base, method=name)
                for fold in plan.folds:
                    key = (bag_file.dataset_id, name, fold.index)
                    provenance[key] = {
                        "table_fingerprint": table_fp,
                        "bags_fingerprint": bag_file.fingerprint,
                        "config_hash": digest,
                    }
                    items.append(
                        WorkItem(
                            key=(bag_file.dataset_id, name, str(fold.index)),
                            run=lambda fold=fold, run_config=run_config, ds=bag_file.dataset_id: train(
                                table, fold, run_config, dataset_id=ds
                            ),
                        )
                    )
        runs = run_jobs(items, jobs=args.jobs)
        grouped: Dict[Tuple[str, str], List[TrainRun]] = {}
        for run in runs:
            ds = str(run.dataset_id)
            target = out / ds / run.method / f"fold-{run.fold}.json"
            write_json(
                target,
                _run_payload(run, provenance[(ds, run.method, run.fold)], timings=args.timings, source=str(target)),
            )
            written.append(target)
            if args.checkpoints:
                written.append(save_checkpoint(target.with_suffix(".ckpt"), run.params, seed=base.seed, step=run.steps))
            grouped.setdefault((ds, run.method), []).append(run)
        aggregate = out / "aggregate.csv"
        frame = pd.DataFrame(
            [aggregate_runs(members).to_dict() for members in grouped.values()],
            columns=list(AGGREGATE_COLUMNS),
        )
        write_frame(
            aggregate,
            frame,
            config_hash=digest,
            upstream={"table": table_fp, **{bf.dataset_id: bf.fingerprint for _, bf in bag_files}},
        )
        written.append(aggregate)

    if args.instance_level:
        run = instance_level_train(table, base, dataset_id="instance-level")
        target = out / "instance" / f"{run.method}.json"
        write_json(
            target,
            _run_payload(
                run,
                {"table_fingerprint": table_fp, "config_hash": digest},
                timings=args.timings,
                source=str(target),
            ),
        )
        written.append(target)
    return written


# ---------------------------------------------------------------------------
# report


def _run_files(root: Path) -> List[Path]:
    if not root.is_dir():
        raise ArtifactNotFoundError(root, "train-run directory")
    return sorted(path for path in root.rglob("*.json") if not path.name.endswith(".meta.json"))


def _cluster_mapping(path: Optional[str]) -> Optional[Dict[str, str]]:
    if path is None:
        return None
    frame = pd.read_csv(require_file(path, "cluster table"))
    if frame.empty:
        return None
    # Plots colour by the first axis present in the table.
    axis = str(frame["axis"].iloc[0])
    chosen = frame[frame["axis"] == axis]
    return dict(zip(chosen["dataset_id"].astype(str), chosen["cluster_name"].astype(str)))


def cmd_report(args: argparse.Namespace, config: PipelineConfig, digest: str) -> List[Path]:
    metrics_path = require_file(args.metrics, "metrics table")
    metrics = pd.read_csv(metrics_path)
    collected = collect_runs(_run_files(Path(args.runs)))
    results = results_table(run_documents(collected))
    out = _out_dir(args, config)
    upstream = {"metrics": fingerprint(metrics_path.read_bytes())}
    for item in collected["items"]:  # type: ignore[union-attr]
        if item.get("ok"):
            upstream[str(item["path"])] = fingerprint(Path(str(item["path"])).read_bytes())

    joined = results.merge(metrics, on="dataset_id", how="left")
    results_path = out / "results.csv"
    write_frame(results_path, joined, config_hash=digest, upstream=upstream)
    corr_path = out / "correlations.csv"
    write_frame(corr_path, correlations(metrics, results), config_hash=digest, upstream=upstream)
    written = [results_path, corr_path]
    if args.svg:
        from .orchestrator.plots import write_report_plots

        written.extend(write_report_plots(metrics, out / "plots", clusters=_cluster_mapping(args.clusters)))
    return written


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    """Create the ``llpbench`` argument tree."""

    parser = _Parser(prog="llpbench", description="Build, measure and benchmark LLP datasets")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    parser.add_argument("--config", default=None, help="Pipeline config JSON (pipeline_config.v1)")
    parser.add_argument(
        "--jobs", type=int, default=DEFAULT_JOBS, help=f"Parallel work items, default: {DEFAULT_JOBS}"
    )
    parser.add_argument("--version", action="version", version=f"llpbench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pre = sub.add_parser("preprocess", help="Encode a raw CSV into an instance table")
    pre.add_argument("--input", default=None, help="Raw delimited file, default: config inputs")
    pre.add_argument("--schema", default=None, help="Schema sidecar, default: <input stem>.schema.json")
    pre.add_argument("--mode", choices=[mode.value for mode in Mode], default=None, help="Override the schema mode")
    pre.add_argument("--out", default=None, help="Output directory")
    pre.set_defaults(func=cmd_preprocess)

    bag = sub.add_parser("bag", help="Create bag collections from an encoded table")
    bag.add_argument("--table", required=True)
    bag.add_argument("--key", action="append", default=[], help="Grouping key such as C3,C11 (repeatable)")
    bag.add_argument("--all-pairs", action="store_true", help="Every key of size 1..--max-key-size")
    bag.add_argument("--max-key-size", type=int, default=2)
    bag.add_argument("--random", action="store_true", help="Random fixed-size bags for each --q")
    bag.add_argument("--fixed", action="append", default=[], help="Fixed-size feature bags over this key")
    bag.add_argument("--q", default=None, help="Comma-separated bag sizes, default: config bag_sizes")
    bag.add_argument("--seed", type=int, default=None)
    bag.add_argument(
        "--count-only",
        action="store_true",
        help="Write key_count.json with how many candidate keys pass the dataset filter instead of bag files",
    )
    bag.add_argument("--out", default=None)
    bag.set_defaults(func=cmd_bag)

    flt = sub.add_parser("filter", help="Clip bags by size and drop thin datasets")
    flt.add_argument("--table", required=True)
    flt.add_argument("--bags", nargs="+", required=True, help="Bag files or directories")
    flt.add_argument("--low", type=int, default=None)
    flt.add_argument("--high", default=None, help="Upper size bound or 'none'")
    flt.add_argument("--min-retain", type=float, default=None)
    flt.add_argument(
        "--skew-eps",
        type=float,
        default=0.1,
        help="Proportions below eps or above 1-eps count as skewed for skewed_large_fraction",
    )
    flt.add_argument("--out", default=None)
    flt.set_defaults(func=cmd_filter)

    met = sub.add_parser("metrics", help="Compute hardness reports")
    met.add_argument("--table", required=True)
    met.add_argument("--bags", nargs="+", required=True)
    met.add_argument("--space", choices=[mode.value for mode in SpaceMode], default=SpaceMode.MULTIHOT.value)
    met.add_argument("--out", default=None)
    met.set_defaults(func=cmd_metrics)

    clu = sub.add_parser("cluster", help="Characterize datasets by k-means on hardness metrics")
    clu.add_argument("--metrics", required=True)
    clu.add_argument("--k-tail", type=int, default=4)
    clu.add_argument("--k-label", type=int, default=4)
    clu.add_argument("--k-sep", type=int, default=4)
    clu.add_argument("--seed", type=int, default=None)
    clu.add_argument("--out", default=None)
    clu.set_defaults(func=cmd_cluster)

    trn = sub.add_parser("train", help="Train LLP methods over bag-respecting folds")
    trn.add_argument("--table", required=True)
    trn.add_argument("--bags", nargs="+", default=[])
    trn.add_argument(
        "--method", default=None, help=f"Comma-separated ids from: {', '.join(method_names())}"
    )
    trn.add_argument("--folds", type=int, default=5)
    trn.add_argument("--epochs", type=int, default=None)
    trn.add_argument("--lr", type=float, default=None)
    trn.add_argument("--patience", type=int, default=None)
    trn.add_argument("--bags-per-batch", type=int, default=None)
    trn.add_argument("--instances-per-batch", type=int, default=None)
    trn.add_argument("--metric", choices=[metric.value for metric in Metric], default=None)
    trn.add_argument("--hidden", default=",".join(str(size) for size in DEFAULT_HIDDEN))
    trn.add_argument("--seed", type=int, default=None)
    trn.add_argument("--instance-level", action="store_true", help="Also train the per-instance reference")
    trn.add_argument("--instance-loss", choices=["bce", "mse"], default=None)
    trn.add_argument("--timings", action="store_true", help="Record wall time in run files")
    trn.add_argument("--checkpoints", action="store_true", help="Save the best parameters per fold")
    trn.add_argument("--out", default=None)
    trn.set_defaults(func=cmd_train)

    rep = sub.add_parser("report", help="Join hardness metrics with training results")
    rep.add_argument("--metrics", required=True)
    rep.add_argument("--runs", required=True, help="Directory of train-run JSON files")
    rep.add_argument("--clusters", default=None)
    rep.add_argument("--svg", action="store_true", help="Write SVG scatter plots")
    rep.add_argument("--out", default=None)
    rep.set_defaults(func=cmd_report)
    return parser


def _emit(paths: Iterable[Path], stream=None) -> None:
    target = stream if stream is not None else sys.stdout
    for path in paths:
        target.write(f"{path}\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigurationError as exc:
        return report_error(exc)
    configure_root(logging.DEBUG if args.debug else logging.INFO)
    if args.debug:
        logging.getLogger("llpbench").setLevel(logging.DEBUG)
    if args.jobs < 1:
        return report_error(ConfigurationError(f"--jobs must be >= 1, got {args.jobs}"), debug=args.debug)

    handler: Handler = args.func
    parameters = _parameters(args)
    try:
        config = load_pipeline_config(args.config)
        with stage_scope(args.command, extra={"command": args.command}):
            try:
                outputs = handler(args, config, _command_hash(args, config))
            except Exception as exc:
                record_stage_event(
                    command=args.command, parameters=parameters, outputs=[], ok=False, error=error_envelope(exc)
                )
                raise
            record_stage_event(command=args.command, parameters=parameters, outputs=outputs, ok=True)
    except Exception as exc:
        return report_error(exc, debug=args.debug)
    _emit(outputs)
    return 0


__all__ = ["build_parser", "main"]
