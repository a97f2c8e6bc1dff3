# SPDX-License-Identifier: LGPL-3.0-only

"""Run configuration: typed settings read from INI run files and command-line flags.

A run file has a ``[run]`` section of global keys and repeated sections for sources,
datasets and per-method options::

    [run]
    out = runs/toy
    methods = conc, svd, caeme
    loss = mse, scp
    epochs = 50

    [source:glove]
    path = glove.txt
    format = auto

    [dataset:simlex]
    path = simlex.tsv

    [method:svd]
    rank = 100

Flags win over method sections, which win over ``[run]`` keys.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
import pathlib
import typing as t

from .embeddings import TableFormat
from .errors import ArtifactError, ContractError
from .losses import LossKind
from .methods import DEFAULT_META_DIM, MetaMethod
from .nn import TrainConfig

__all__ = (
    "SourceSpec",
    "DatasetSpec",
    "MethodRequest",
    "RunConfig",
    "load_run_config",
    "parse_source",
    "parse_dataset",
)

ALL_LOSSES: t.Final[t.Tuple[LossKind, ...]] = tuple(LossKind)
ALL_METHODS: t.Final[t.Tuple[MetaMethod, ...]] = tuple(
    method for method in MetaMethod if method is not MetaMethod.TAE_PLUS_Y
)
DELIMITERS: t.Final[t.Mapping[str, t.Optional[str]]] = {
    "tab": "\t",
    "comma": ",",
    "space": None,
}


@dataclasses.dataclass(frozen = True)
class SourceSpec:
    name: str
    path: pathlib.Path
    format: TableFormat = TableFormat.AUTO


@dataclasses.dataclass(frozen = True)
class DatasetSpec:
    name: str
    path: pathlib.Path
    delimiter: t.Optional[str] = "\t"


@dataclasses.dataclass(frozen = True)
class MethodRequest:
    """One method of a run and the options it is built with."""

    method: MetaMethod
    losses: t.Tuple[LossKind, ...] = (LossKind.MSE,)
    targets: t.Tuple[str, ...] = ()
    """Target source names or indices; empty means every source."""
    concat_y: bool = False
    rank: int = DEFAULT_META_DIM

    @property
    def resolved(self) -> MetaMethod:
        if self.method is MetaMethod.TAE and self.concat_y:
            return MetaMethod.TAE_PLUS_Y
        return self.method


@dataclasses.dataclass(frozen = True)
class RunConfig:
    """Everything one ``metaemb`` invocation needs.

    Raises
    ------
    ContractError
        Source names repeat, a referenced path is the output directory, or
        ``workers`` is not positive.
    """

    sources: t.Tuple[SourceSpec, ...] = ()
    datasets: t.Tuple[DatasetSpec, ...] = ()
    methods: t.Tuple[MethodRequest, ...] = ()
    train: TrainConfig = TrainConfig()  # noqa: RUF009
    out: pathlib.Path = pathlib.Path("out")
    workers: int = 1

    def __post_init__(self) -> None:
        names = [source.name for source in self.sources]
        if len(set(names)) != len(names):
            raise ContractError(f"source names must be unique, got {names}")
        if self.workers < 1:
            raise ContractError(f"workers must be positive, got {self.workers}")

        out = self.out.resolve()
        for spec in (*self.sources, *self.datasets):
            if spec.path.resolve() == out:
                raise ContractError(f"{spec.name}: path {spec.path} is the output directory")

    @property
    def source_names(self) -> t.List[str]:
        return [source.name for source in self.sources]


# Value parsing


def _split(value: str) -> t.List[str]:
    return [item.strip() for item in value.replace("\n", ",").split(",") if item.strip()]


def _boolean(value: t.Union[str, bool]) -> bool:
    if isinstance(value, bool):
        return value
    try:
        return configparser.ConfigParser.BOOLEAN_STATES[value.strip().lower()]
    except KeyError:
        raise ContractError(f"{value!r} is not a boolean") from None


def _optional_float(value: str) -> t.Optional[float]:
    return float(value) if value.strip() else None


def _losses(value: str) -> t.Tuple[LossKind, ...]:
    items = _split(value)
    if items == ["all"]:
        return ALL_LOSSES
    return tuple(LossKind(item.lower()) for item in items)


def _methods(value: str) -> t.Tuple[MetaMethod, ...]:
    items = _split(value)
    if items == ["all"]:
        return ALL_METHODS
    return tuple(MetaMethod(item.lower()) for item in items)


_CONVERTERS: t.Final[t.Mapping[str, t.Callable[[str], t.Any]]] = {
    "out": pathlib.Path,
    "seed": int,
    "workers": int,
    "epochs": int,
    "batch": int,
    "hidden": int,
    "dropout": float,
    "lr": _optional_float,
    "init_std": float,
    "init_scaled": _boolean,
    "loss": _losses,
    "methods": _methods,
    "target": lambda value: tuple(_split(value)),
    "concat_y": _boolean,
    "rank": int,
}
_METHOD_KEYS: t.Final[t.FrozenSet[str]] = frozenset({ "loss", "target", "concat_y", "rank" })


def _convert(
    section: str,
    values: t.Mapping[str, str],
    allowed: t.Iterable[str],
) -> t.Dict[str, t.Any]:
    allowed = set(allowed)
    converted: t.Dict[str, t.Any] = {}
    for key, value in values.items():
        if key not in allowed:
            raise ContractError(f"[{section}]: unknown key {key!r}")
        try:
            converted[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ContractError(f"[{section}] {key}: {exc}") from None
    return converted


def parse_source(text: str) -> SourceSpec:
    """Parse a ``name=path`` or bare ``path`` command-line source."""
    name, sep, path = text.partition("=")
    if not sep:
        path = name
        name = pathlib.Path(path).stem
    return SourceSpec(name.strip(), pathlib.Path(path.strip()))


def parse_dataset(text: str) -> DatasetSpec:
    """Parse a ``name=path`` or bare ``path`` command-line dataset."""
    source = parse_source(text)
    delimiter = "," if source.path.suffix == ".csv" else "\t"
    return DatasetSpec(source.name, source.path, delimiter)


# Loading


def load_run_config(
    path: t.Optional[t.Union[str, "os.PathLike[str]"]] = None,
    overrides: t.Optional[t.Mapping[str, t.Any]] = None,
    *,
    default_losses: t.Tuple[LossKind, ...] = (LossKind.MSE,),
    default_methods: t.Tuple[MetaMethod, ...] = ALL_METHODS,
) -> RunConfig:
    """Merge a run file with command-line ``overrides``.

    Parameters
    ----------
    path: Optional[:class:`os.PathLike`]
        INI run file; relative source and dataset paths resolve against its directory.
    overrides: Optional[Mapping[:class:`str`, Any]]
        Typed flag values keyed like ``[run]`` keys, plus ``sources`` and ``datasets``
        as sequences of specs. ``None`` values are ignored.

    Raises
    ------
    ArtifactError
        The run file cannot be read.
    ContractError
        Unknown keys, bad values, or an inconsistent configuration.
    """
    cli = { key: value for key, value in (overrides or {}).items() if value is not None }
    parser = configparser.ConfigParser(interpolation = None)
    base = pathlib.Path()
    if path is not None:
        base = pathlib.Path(path).parent
        try:
            with pathlib.Path(path).open(encoding = "utf-8") as f:
                parser.read_file(f)
        except OSError as exc:
            raise ArtifactError(path, exc.strerror or str(exc)) from exc
        except configparser.Error as exc:
            raise ContractError(f"{path}: {exc}") from None

    run: t.Dict[str, t.Any] = {}
    sections: t.Dict[str, t.Dict[str, t.Any]] = {}
    sources: t.List[SourceSpec] = []
    datasets: t.List[DatasetSpec] = []
    for section in parser.sections():
        kind, _, name = section.partition(":")
        values = dict(parser[section])
        if section == "run":
            run = _convert(section, values, _CONVERTERS)
        elif kind == "source" and name:
            fmt = _enum(TableFormat, values.get("format", TableFormat.AUTO.value), section)
            sources.append(SourceSpec(name, base / _require(section, values, "path"), fmt))
        elif kind == "dataset" and name:
            delimiter = DELIMITERS.get(values.get("delimiter", "tab"), values.get("delimiter"))
            datasets.append(DatasetSpec(name, base / _require(section, values, "path"), delimiter))
        elif kind == "method" and name:
            method = _enum(MetaMethod, name.lower(), section)
            sections[method.value] = _convert(section, values, _METHOD_KEYS)
        else:
            raise ContractError(f"unknown section [{section}]")

    settings = { **run, **cli }

    if "methods" in settings:
        method_list = tuple(settings["methods"])
    elif sections:
        method_list = tuple(MetaMethod(name) for name in sections)
    else:
        method_list = default_methods

    def pick(key: str, method: MetaMethod, default: t.Any) -> t.Any:
        for layer in (cli, sections.get(method.value, {}), run):
            if key in layer:
                return layer[key]
        return default

    methods = tuple(
        MethodRequest(
            method,
            losses = tuple(pick("loss", method, default_losses)),
            targets = tuple(pick("target", method, ())),
            concat_y = bool(pick("concat_y", method, False)),
            rank = int(pick("rank", method, DEFAULT_META_DIM)),
        ) for method in method_list
    )

    seed = int(settings.get("seed", 0))
    defaults = TrainConfig()
    try:
        train = TrainConfig(
            batch_size = int(settings.get("batch", defaults.batch_size)),
            epochs = int(settings.get("epochs", defaults.epochs)),
            learning_rate = settings.get("lr"),
            init_std = float(settings.get("init_std", defaults.init_std)),
            init_scaled = bool(settings.get("init_scaled", defaults.init_scaled)),
            shuffle_seed = seed,
            seed = seed,
            hidden_dim = int(settings.get("hidden", defaults.hidden_dim)),
            dropout_rate = float(settings.get("dropout", defaults.dropout_rate)),
        )
    except ValueError as exc:
        raise ContractError(str(exc)) from None

    return RunConfig(
        sources = tuple(cli.get("sources", sources)),
        datasets = tuple(cli.get("datasets", datasets)),
        methods = methods,
        train = train,
        out = pathlib.Path(settings.get("out", "out")),
        workers = int(settings.get("workers", 1)),
    )


EnumT = t.TypeVar("EnumT", TableFormat, MetaMethod)


def _enum(cls: t.Type[EnumT], value: str, section: str) -> EnumT:
    try:
        return cls(value)
    except ValueError:
        raise ContractError(f"[{section}]: unknown {cls.__name__} {value!r}") from None


def _require(section: str, values: t.Mapping[str, str], key: str) -> str:
    try:
        return values[key]
    except KeyError:
        raise ContractError(f"[{section}] needs a {key!r} key") from None
