# SPDX-License-Identifier: LGPL-3.0-only

"""The ``metaemb`` command line: align, train, eval, reproduce, export, grad-check."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import pathlib
import sys
import typing as t
from concurrent import futures

import numpy as np

from . import __version__
from .config import ALL_LOSSES, ALL_METHODS, load_run_config, parse_dataset, parse_source
from .embeddings import (
    AlignedEmbeddingSet,
    EmbeddingTable,
    TableFormat,
    align,
    export_table,
    l2_normalize,
    load_aligned,
    load_table,
    save_aligned,
)
from .errors import ArtifactError, ContractError, MetaEmbeddingError
from .evaluation import EvalEntry, EvalReport, SimilarityDataset, evaluate, load_dataset
from .losses import LossKind
from .methods import METHODS, MetaMethod, MetaModel, load_model, save_model
from .nn import Activation, init_net
from .nn import grad_check as check_gradients
from .reference import load_reference

if t.TYPE_CHECKING:
    from .config import MethodRequest, RunConfig, SourceSpec
    from .registry import MethodSpec

__all__ = ("main", "build_parser", "Job", "expand_jobs", "build_grid", "evaluate_grid")

LOGGER = logging.getLogger(__name__)

EXIT_OK: t.Final[int] = 0
EXIT_USAGE: t.Final[int] = 1
EXIT_DATA: t.Final[int] = 2
EXIT_PARTIAL: t.Final[int] = 3

LOG_FORMAT: t.Final[str] = "[%(asctime)s] %(levelname)s - %(message)s"

Architecture = t.Tuple[t.List[int], t.List[Activation]]

GRAD_CHECK_ARCHITECTURES: t.Final[t.Mapping[str, Architecture]] = {
    "linear": ([6, 4], [Activation.LINEAR]),
    "tanh": ([6, 5, 4], [Activation.TANH, Activation.LINEAR]),
    "tanh+log_softmax": ([6, 5, 4], [Activation.TANH, Activation.LOG_SOFTMAX]),
}

Outcome = t.Union[MetaModel, MetaEmbeddingError]


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> t.NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# Jobs


@dataclasses.dataclass(frozen = True)
class Job:
    """One cell of the training grid."""

    label: str
    method: MetaMethod
    options: t.Mapping[str, t.Any] = dataclasses.field(default_factory = dict)
    error: t.Optional[str] = None
    """Set when the cell cannot be built at all, e.g. for an unknown target."""


def _resolve_target(token: str, names: t.Sequence[str]) -> int:
    if token in names:
        return list(names).index(token)
    try:
        index = int(token)
    except ValueError:
        raise ContractError(f"unknown target source {token!r}; sources are {list(names)}") from None
    if not 0 <= index < len(names):
        raise ContractError(f"target index {index} out of range for {len(names)} sources")
    return index


def expand_jobs(request: MethodRequest, names: t.Sequence[str], config: RunConfig) -> t.List[Job]:
    """Turn one requested method into its (loss, target) grid cells."""
    method = request.resolved
    train = config.train

    if method in (MetaMethod.CONC, MetaMethod.AV):
        return [Job(method.value, method)]
    if method is MetaMethod.SVD:
        return [Job(method.value, method, { "rank": request.rank })]
    if method is MetaMethod.ONE_TON:
        label = f"{method.value}-{LossKind.MSE.value}"
        return [Job(label, method, { "config": train, "dim": train.hidden_dim })]

    jobs: t.List[Job] = []
    for loss in request.losses:
        options = { "loss": loss, "config": train }
        if not METHODS.get(method).needs_target:
            jobs.append(Job(f"{method.value}-{loss.value}", method, options))
            continue

        for token in request.targets or tuple(names):
            try:
                index = _resolve_target(token, names)
            except ContractError as exc:
                jobs.append(Job(f"{method.value}-{loss.value}@{token}", method, error = str(exc)))
                continue
            label = f"{method.value}-{loss.value}@{names[index]}"
            jobs.append(Job(label, method, { **options, "target_index": index }))
    return jobs


def _run_job(job: Job, aligned: AlignedEmbeddingSet) -> MetaModel:
    if job.error is not None:
        raise ContractError(job.error)
    return METHODS.build(job.method, aligned, **job.options)


def build_grid(
    jobs: t.Sequence[Job],
    aligned: AlignedEmbeddingSet,
    workers: int = 1,
) -> t.List[t.Tuple[Job, Outcome]]:
    """Build every job on a worker pool; results come back in submission order."""

    def announce(spec: MethodSpec, options: t.Mapping[str, t.Any]) -> None:
        loss = options.get("loss")
        LOGGER.info("Building %s%s", spec.method.value, f" ({loss.value})" if loss else "")

    METHODS.build_hook()(announce)
    try:
        with futures.ThreadPoolExecutor(max_workers = workers) as pool:
            pending = [pool.submit(_run_job, job, aligned) for job in jobs]
            results: t.List[t.Tuple[Job, Outcome]] = []
            for job, future in zip(jobs, pending):
                try:
                    results.append((job, future.result()))
                except MetaEmbeddingError as exc:
                    LOGGER.error("%s failed: %s", job.label, exc)
                    results.append((job, exc))
    finally:
        METHODS.remove_hook(announce)

    return results


def evaluate_grid(
    rows: t.Sequence[t.Tuple[str, EmbeddingTable]],
    datasets: t.Sequence[SimilarityDataset],
    workers: int = 1,
) -> EvalReport:
    """Score every row on every dataset; failed cells hold their error message."""
    report = EvalReport(datasets = [dataset.name for dataset in datasets])
    with futures.ThreadPoolExecutor(max_workers = workers) as pool:
        pending = [
            (label, dataset, pool.submit(evaluate, table, dataset))
            for label, table in rows for dataset in datasets
        ]
        for label, dataset, future in pending:
            try:
                cell: t.Union[EvalEntry, str] = future.result()
            except MetaEmbeddingError as exc:
                LOGGER.warning("%s on %s failed: %s", label, dataset.name, exc)
                cell = f"error: {exc}"
            report.add(label, dataset.name, cell)
    return report


# Artifacts


def _write_json(path: pathlib.Path, payload: t.Any) -> None:
    try:
        path.write_text(
            json.dumps(payload, indent = 2, sort_keys = True) + "\n",
            encoding = "utf-8",
        )
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc


def _write_model(
    label: str,
    model: MetaModel,
    aligned: AlignedEmbeddingSet,
    out: pathlib.Path,
) -> EmbeddingTable:
    table = model.table(aligned, label)
    export_table(table, out / f"{label}.txt")
    save_model(model, out / f"{label}.npz")
    if model.trace:
        _write_json(out / f"{label}.trace.json", { "label": label, "trace": list(model.trace) })
    return table


def _load_sources(sources: t.Sequence[SourceSpec]) -> AlignedEmbeddingSet:
    if not sources:
        raise ContractError("no source embeddings; pass --sources or add [source:<name>] sections")
    missing = [str(source.path) for source in sources if not source.path.is_file()]
    if missing:
        raise ContractError(f"missing source embedding file(s): {', '.join(missing)}")

    tables = [load_table(source.path, source.format, name = source.name) for source in sources]
    return l2_normalize(align(tables))


def _aligned_for(args: argparse.Namespace, config: RunConfig) -> AlignedEmbeddingSet:
    if args.aligned is not None:
        return load_aligned(args.aligned)
    if config.sources:
        aligned = _load_sources(config.sources)
        save_aligned(aligned, config.out)
        return aligned
    if (config.out / "manifest.json").is_file():
        return load_aligned(config.out)
    raise ContractError("no aligned set; run `metaemb align` first or pass --aligned or --sources")


def _load_datasets(config: RunConfig) -> t.List[SimilarityDataset]:
    if not config.datasets:
        raise ContractError("no datasets; pass --datasets or add [dataset:<name>] sections")
    missing = [str(spec.path) for spec in config.datasets if not spec.path.is_file()]
    if missing:
        raise ContractError(f"missing dataset file(s): {', '.join(missing)}")
    return [
        load_dataset(spec.path, spec.name, delimiter = spec.delimiter)
        for spec in config.datasets
    ]


def _train_and_write(
    config: RunConfig,
    aligned: AlignedEmbeddingSet,
    *,
    derive_plus_y: bool = False,
) -> t.Tuple[t.List[t.Tuple[str, EmbeddingTable]], t.List[t.Tuple[str, str]]]:
    names = aligned.names
    jobs = [job for request in config.methods for job in expand_jobs(request, names, config)]
    tables: t.List[t.Tuple[str, EmbeddingTable]] = []
    failures: t.List[t.Tuple[str, str]] = []

    try:
        config.out.mkdir(parents = True, exist_ok = True)
    except OSError as exc:
        raise ArtifactError(config.out, exc.strerror or str(exc)) from exc

    for job, result in build_grid(jobs, aligned, config.workers):
        if isinstance(result, MetaEmbeddingError):
            failures.append((job.label, str(result)))
            continue
        tables.append((job.label, _write_model(job.label, result, aligned, config.out)))

        if derive_plus_y and result.method is MetaMethod.TAE:
            label = job.label.replace(MetaMethod.TAE.value, MetaMethod.TAE_PLUS_Y.value, 1)
            plus_y = result.with_target_appended()
            tables.append((label, _write_model(label, plus_y, aligned, config.out)))

    _write_json(
        config.out / "summary.json",
        {
            "models": [label for label, _ in tables],
            "failures": [{ "label": label, "error": error } for label, error in failures],
        },
    )
    return tables, failures


# Verbs


def _choices(values: t.Optional[t.Sequence[str]], every: t.Tuple[t.Any, ...], kind: t.Any) -> t.Any:
    if values is None:
        return None
    return every if "all" in values else tuple(kind(value) for value in values)


def _config(args: argparse.Namespace, **defaults: t.Any) -> RunConfig:
    sources = getattr(args, "sources", None)
    datasets = getattr(args, "datasets", None)
    overrides: t.Dict[str, t.Any] = {
        "out": args.out,
        "seed": args.seed,
        "workers": args.workers,
        "sources": [parse_source(text) for text in sources] if sources else None,
        "datasets": [parse_dataset(text) for text in datasets] if datasets else None,
    }
    for key in ("concat_y", "rank", "hidden", "dropout", "batch", "epochs", "lr", "init_std"):
        overrides[key] = getattr(args, key, None)
    overrides["init_scaled"] = getattr(args, "init_scaled", None)
    overrides["methods"] = _choices(getattr(args, "methods", None), ALL_METHODS, MetaMethod)
    overrides["loss"] = _choices(getattr(args, "loss", None), ALL_LOSSES, LossKind)
    target = getattr(args, "target", None)
    overrides["target"] = tuple(target) if target else None

    return load_run_config(args.config, overrides, **defaults)


def cmd_align(args: argparse.Namespace) -> int:
    config = _config(args)
    sources = config.sources
    if args.format is not None:
        fmt = TableFormat(args.format)
        sources = tuple(dataclasses.replace(source, format = fmt) for source in sources)

    aligned = _load_sources(sources)
    manifest = save_aligned(aligned, config.out)
    print(f"{len(aligned)} shared words over {len(aligned.sources)} sources -> {manifest}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _config(args)
    aligned = _aligned_for(args, config)
    tables, failures = _train_and_write(config, aligned)
    print(f"built {len(tables)} model(s), {len(failures)} failure(s) -> {config.out}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    config = _config(args)
    if not args.tables:
        raise ContractError("no tables to evaluate; pass --tables")
    datasets = _load_datasets(config)

    rows: t.List[t.Tuple[str, EmbeddingTable]] = []
    for path in map(pathlib.Path, args.tables):
        rows.append((path.stem, load_table(path, TableFormat.AUTO, name = path.stem)))

    report = evaluate_grid(rows, datasets, config.workers)
    reference = load_reference() if args.reference else None
    report.write(config.out, reference)
    print(report.render(reference), end = "")
    return EXIT_PARTIAL if report.failures else EXIT_OK


def cmd_reproduce(args: argparse.Namespace) -> int:
    config = _config(args, default_losses = ALL_LOSSES, default_methods = ALL_METHODS)
    aligned = _load_sources(config.sources)
    datasets = _load_datasets(config)
    save_aligned(aligned, config.out)

    tables, failures = _train_and_write(config, aligned, derive_plus_y = True)
    rows = [(source.name, source) for source in aligned.sources] + tables
    report = evaluate_grid(rows, datasets, config.workers)

    reference = load_reference()
    report.write(config.out, reference)
    print(report.render(reference), end = "")
    return EXIT_PARTIAL if failures or report.failures else EXIT_OK


def cmd_export(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    aligned = load_aligned(args.aligned)
    target = pathlib.Path(args.out)
    export_table(model.table(aligned, target.stem), target)
    print(f"{len(aligned)} x {model.meta_dim} table -> {target}")
    return EXIT_OK


def grad_check_grid(
    seeds: int,
    losses: t.Sequence[LossKind] = ALL_LOSSES,
    *,
    batch: int = 3,
) -> t.Dict[t.Tuple[LossKind, str], float]:
    """Worst gradient discrepancy of every loss x architecture over ``seeds`` random nets."""
    worst: t.Dict[t.Tuple[LossKind, str], float] = {}
    for loss in losses:
        for name, (dims, activations) in GRAD_CHECK_ARCHITECTURES.items():
            errors: t.List[float] = []
            for seed in range(seeds):
                rng = np.random.default_rng(seed)
                net = init_net(dims, activations, seed = seed)
                inputs = rng.normal(size = (batch, dims[0]))
                targets = rng.normal(size = (batch, dims[-1]))
                errors.append(check_gradients(net, loss, inputs, targets))
            worst[(loss, name)] = max(errors)
    return worst


def cmd_grad_check(args: argparse.Namespace) -> int:
    losses = _choices(args.loss, ALL_LOSSES, LossKind) or ALL_LOSSES
    failed = False
    for (loss, name), error in grad_check_grid(args.seeds, losses).items():
        ok = error <= args.tolerance
        failed = failed or not ok
        print(f"{loss.value:<4} {name:<17} {error:.3e} {'ok' if ok else 'FAIL'}")
    return EXIT_DATA if failed else EXIT_OK


# Parser


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type = pathlib.Path, help = "INI run file; flags win")
    parser.add_argument("--out", type = pathlib.Path, help = "output directory (default: out)")
    parser.add_argument("--seed", type = int, help = "init, dropout and shuffle seed")
    parser.add_argument("--workers", type = int, help = "worker pool size (default: 1)")
    parser.add_argument("--sources", nargs = "+", metavar = "NAME=PATH", help = "source tables")
    parser.add_argument("--datasets", nargs = "+", metavar = "NAME=PATH", help = "similarity data")


def _add_training(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--methods",
        nargs = "+",
        choices = [*(method.value for method in MetaMethod), "all"],
        help = "methods to build",
    )
    parser.add_argument(
        "--loss",
        nargs = "+",
        choices = [*(loss.value for loss in LossKind), "all"],
        help = "training objectives",
    )
    parser.add_argument(
        "--target", nargs = "+", metavar = "SOURCE", help = "target names or indices",
    )
    parser.add_argument(
        "--concat-y",
        dest = "concat_y",
        action = "store_true",
        default = None,
        help = "append the target vector to TAE meta vectors",
    )
    parser.add_argument("--rank", type = int, help = "SVD rank (default: 200)")
    parser.add_argument("--hidden", type = int, help = "hidden units (default: 200)")
    parser.add_argument("--dropout", type = float, help = "dropout rate (default: 0.2)")
    parser.add_argument("--batch", type = int, help = "minibatch size (default: 32)")
    parser.add_argument("--epochs", type = int, help = "training epochs (default: 50)")
    parser.add_argument("--lr", type = float, help = "learning rate for every loss")
    parser.add_argument("--init-std", dest = "init_std", type = float, help = "weight init std")
    parser.add_argument(
        "--init-scaled",
        dest = "init_scaled",
        action = "store_true",
        default = None,
        help = "use 1/sqrt(fan_in) as the init std",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog = "metaemb", description = "Word meta-embeddings.")
    parser.add_argument("--version", action = "version", version = f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action = "store_true", help = "log epoch losses")
    verbosity.add_argument("-q", "--quiet", action = "store_true", help = "log warnings only")
    verbs = parser.add_subparsers(dest = "verb", required = True, parser_class = _ArgumentParser)

    align_cmd = verbs.add_parser("align", help = "align and normalise source embeddings")
    _add_common(align_cmd)
    align_cmd.add_argument("--format", choices = [fmt.value for fmt in TableFormat])
    align_cmd.set_defaults(handler = cmd_align)

    train_cmd = verbs.add_parser("train", help = "build meta-embeddings over an aligned set")
    _add_common(train_cmd)
    _add_training(train_cmd)
    train_cmd.add_argument("--aligned", type = pathlib.Path, help = "aligned set directory")
    train_cmd.set_defaults(handler = cmd_train)

    eval_cmd = verbs.add_parser("eval", help = "score embedding tables on similarity datasets")
    _add_common(eval_cmd)
    eval_cmd.add_argument("--tables", nargs = "+", metavar = "FILE", help = "embedding tables")
    eval_cmd.add_argument("--reference", action = "store_true", help = "show published deltas")
    eval_cmd.set_defaults(handler = cmd_eval)

    reproduce_cmd = verbs.add_parser("reproduce", help = "align, train everything, evaluate")
    _add_common(reproduce_cmd)
    _add_training(reproduce_cmd)
    reproduce_cmd.set_defaults(handler = cmd_reproduce)

    export_cmd = verbs.add_parser("export", help = "write a saved model as a text table")
    export_cmd.add_argument("--model", required = True, type = pathlib.Path)
    export_cmd.add_argument("--aligned", required = True, type = pathlib.Path)
    export_cmd.add_argument("--out", required = True, type = pathlib.Path)
    export_cmd.set_defaults(handler = cmd_export)

    grad_cmd = verbs.add_parser("grad-check", help = "compare backprop with finite differences")
    grad_cmd.add_argument("--seeds", type = int, default = 20, help = "nets per cell")
    grad_cmd.add_argument("--tolerance", type = float, default = 1e-4, help = "largest error")
    grad_cmd.add_argument("--loss", nargs = "+", choices = [*(k.value for k in LossKind), "all"])
    grad_cmd.set_defaults(handler = cmd_grad_check)

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format = LOG_FORMAT, stream = sys.stderr)
    logging.getLogger().setLevel(level)


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    """Run the command line and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE

    _configure_logging(args)
    handler: t.Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except MetaEmbeddingError as exc:
        print(f"metaemb {args.verb}: error: {exc}", file = sys.stderr)
        return EXIT_DATA
