# SPDX-License-Identifier: LGPL-3.0-only

"""Word-similarity evaluation with Spearman rank correlation."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import pathlib
import typing as t

import numpy as np
from scipy import stats

from .embeddings import AlignedEmbeddingSet, EmbeddingTable
from .errors import (
    ArtifactError,
    ContractError,
    CoverageError,
    DuplicatePairError,
    EmptyInputError,
    FormatError,
    MetaEmbeddingError,
    ParseError,
    UndefinedCorrelationError,
    UndefinedCosineError,
)
from .methods import MetaModel

if t.TYPE_CHECKING:
    from .reference import ReferenceScores

__all__ = (
    "SimilarityDataset",
    "EvalEntry",
    "EvalReport",
    "load_dataset",
    "cosine",
    "spearman",
    "evaluate",
)

LOGGER = logging.getLogger(__name__)

Pair = t.Tuple[str, str, float]


@dataclasses.dataclass(frozen = True)
class SimilarityDataset:
    """Word pairs with human similarity judgements."""

    name: str
    pairs: t.Tuple[Pair, ...]

    def __post_init__(self) -> None:
        seen: t.Set[t.FrozenSet[str]] = set()
        for a, b, score in self.pairs:
            key = frozenset((a, b))
            if key in seen:
                raise DuplicatePairError(f"dataset {self.name!r} lists ({a}, {b}) twice")
            if not np.isfinite(score):
                raise ContractError(f"dataset {self.name!r} has a non-finite score for ({a}, {b})")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def words(self) -> t.Set[str]:
        return { word for a, b, _ in self.pairs for word in (a, b) }


def load_dataset(
    path: t.Union[str, "os.PathLike[str]"],
    name: t.Optional[str] = None,
    *,
    delimiter: t.Optional[str] = "\t",
) -> SimilarityDataset:
    """Read ``word_a<TAB>word_b<TAB>score`` lines.

    A first line whose score field is not a number is taken as a header and skipped.
    Scores are parsed with a dot decimal separator regardless of locale.

    Parameters
    ----------
    delimiter: Optional[:class:`str`]
        Field separator; ``","`` for CSV files, ``None`` for any whitespace.

    Raises
    ------
    EmptyInputError
        The file holds no pairs.
    FormatError
        A line does not have three fields.
    ParseError
        A score is not a number.
    DuplicatePairError
        An unordered pair occurs twice.
    """
    path = pathlib.Path(path)
    try:
        lines = path.read_text(encoding = "utf-8").splitlines()
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc

    pairs: t.List[Pair] = []
    for lineno, line in enumerate(lines, start = 1):
        if not line.strip():
            continue
        fields = [field.strip() for field in line.split(delimiter)]
        if len(fields) != 3:
            raise FormatError(f"expected 3 fields, found {len(fields)}", line = lineno)

        try:
            score = float(fields[2])
        except ValueError:
            if not pairs and lineno == _first_content_line(lines):
                continue
            raise ParseError(f"score {fields[2]!r} is not a number", line = lineno) from None

        pairs.append((fields[0], fields[1], score))

    if not pairs:
        raise EmptyInputError(f"{path}: no similarity pairs")

    return SimilarityDataset(name or path.stem, tuple(pairs))


def _first_content_line(lines: t.Sequence[str]) -> int:
    return next(i for i, line in enumerate(lines, start = 1) if line.strip())


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two non-zero vectors.

    Raises
    ------
    UndefinedCosineError
        Either vector is all zeros.
    """
    u = np.asarray(u, dtype = np.float64)
    v = np.asarray(v, dtype = np.float64)
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        raise UndefinedCosineError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (norm_u * norm_v), -1.0, 1.0))


def spearman(xs: t.Sequence[float], ys: t.Sequence[float]) -> float:
    """Spearman rank correlation; tied values share the mean of their ranks.

    Raises
    ------
    ContractError
        The sequences differ in length or hold fewer than two values.
    UndefinedCorrelationError
        Either sequence is constant.
    """
    x = np.asarray(xs, dtype = np.float64)
    y = np.asarray(ys, dtype = np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError("spearman needs two 1-D sequences of equal length")
    if x.size < 2:
        raise ContractError("spearman needs at least 2 observations")

    rx = stats.rankdata(x) - (x.size + 1) / 2.0
    ry = stats.rankdata(y) - (y.size + 1) / 2.0
    denom = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))
    if denom == 0.0:
        raise UndefinedCorrelationError("rank correlation is undefined for constant input")
    return float(np.clip(np.dot(rx, ry) / denom, -1.0, 1.0))


@dataclasses.dataclass(frozen = True)
class EvalEntry:
    """Score of one embedding on one dataset."""

    dataset: str
    rho_scaled: float
    """``100 * spearman``."""
    pairs_total: int
    pairs_scored: int

    @property
    def skipped(self) -> int:
        return self.pairs_total - self.pairs_scored


def evaluate(
    source: t.Union[EmbeddingTable, MetaModel],
    dataset: SimilarityDataset,
    aligned: t.Optional[AlignedEmbeddingSet] = None,
) -> EvalEntry:
    """Score ``source`` on ``dataset``.

    Pairs with a word missing from ``source`` are skipped and counted.

    Parameters
    ----------
    source: Union[:class:`~metaemb.embeddings.EmbeddingTable`, :class:`~metaemb.methods.MetaModel`]
        The embedding to score. A model is materialised over ``aligned``.
    aligned: Optional[:class:`~metaemb.embeddings.AlignedEmbeddingSet`]
        Required when ``source`` is a model.

    Raises
    ------
    CoverageError
        Fewer than two pairs could be scored.
    """
    if isinstance(source, MetaModel):
        if aligned is None:
            raise ContractError("evaluating a MetaModel needs the aligned set it embeds")
        source = source.table(aligned)

    model_scores: t.List[float] = []
    human_scores: t.List[float] = []
    for a, b, score in dataset.pairs:
        if a not in source or b not in source:
            continue
        model_scores.append(cosine(source.vector(a), source.vector(b)))
        human_scores.append(score)

    scored = len(model_scores)
    if scored < 2:
        raise CoverageError(
            f"{source.name} covers {scored} of {len(dataset)} pairs of {dataset.name!r}",
        )
    if scored < len(dataset):
        LOGGER.warning(
            "%s: skipped %d of %d %s pairs with out-of-vocabulary words",
            source.name,
            len(dataset) - scored,
            len(dataset),
            dataset.name,
        )

    rho = spearman(model_scores, human_scores)
    return EvalEntry(dataset.name, 100.0 * rho, len(dataset), scored)


# Reports


@dataclasses.dataclass
class EvalReport:
    """A grid of :class:`EvalEntry` results keyed by row label and dataset.

    Cells that could not be scored hold the error message instead.
    """

    datasets: t.List[str] = dataclasses.field(default_factory = list)
    rows: t.List[str] = dataclasses.field(default_factory = list)
    cells: t.Dict[t.Tuple[str, str], t.Union[EvalEntry, str]] = dataclasses.field(
        default_factory = dict,
    )

    def add(self, row: str, dataset: str, result: t.Union[EvalEntry, str]) -> None:
        if row not in self.rows:
            self.rows.append(row)
        if dataset not in self.datasets:
            self.datasets.append(dataset)
        self.cells[(row, dataset)] = result

    def score(
        self,
        row: str,
        source: t.Union[EmbeddingTable, MetaModel],
        dataset: SimilarityDataset,
        aligned: t.Optional[AlignedEmbeddingSet] = None,
    ) -> None:
        """Evaluate and record one cell; library errors are recorded in the cell."""
        try:
            result: t.Union[EvalEntry, str] = evaluate(source, dataset, aligned)
        except MetaEmbeddingError as exc:
            LOGGER.warning("%s on %s failed: %s", row, dataset.name, exc)
            result = f"error: {exc}"
        self.add(row, dataset.name, result)

    @property
    def failures(self) -> t.List[t.Tuple[str, str, str]]:
        return [
            (row, dataset, cell) for (row, dataset), cell in self.cells.items()
            if isinstance(cell, str)
        ]

    def render(self, reference: t.Optional[ReferenceScores] = None) -> str:
        """Aligned-column text grid, two decimals; deltas against ``reference`` if given."""
        header = ["method", *self.datasets]
        body: t.List[t.List[str]] = []
        for row in self.rows:
            line = [row]
            for dataset in self.datasets:
                cell = self.cells.get((row, dataset))
                if cell is None:
                    line.append("-")
                elif isinstance(cell, str):
                    line.append("error")
                else:
                    text = f"{cell.rho_scaled:.2f}"
                    expected = reference.lookup(row, dataset) if reference else None
                    if reference is not None:
                        text += (
                            f" ({cell.rho_scaled - expected:+.2f})" if expected is not None
                            else " (n/a)"
                        )
                    line.append(text)
            body.append(line)

        widths = [max(len(line[i]) for line in [header, *body]) for i in range(len(header))]
        rendered = [
            "  ".join(
                cell.ljust(width) if i == 0 else cell.rjust(width)
                for i, (cell, width) in enumerate(zip(line, widths))
            ).rstrip() for line in [header, *body]
        ]
        return "\n".join(rendered) + "\n"

    def records(self, reference: t.Optional[ReferenceScores] = None) -> t.List[t.Dict[str, t.Any]]:
        records: t.List[t.Dict[str, t.Any]] = []
        for row in self.rows:
            for dataset in self.datasets:
                cell = self.cells.get((row, dataset))
                if cell is None:
                    continue
                record: t.Dict[str, t.Any] = { "method": row, "dataset": dataset }
                if isinstance(cell, str):
                    record["error"] = cell
                else:
                    record.update(
                        rho_scaled = round(cell.rho_scaled, 2),
                        pairs_total = cell.pairs_total,
                        pairs_scored = cell.pairs_scored,
                    )
                    if reference is not None:
                        expected = reference.lookup(row, dataset)
                        record["reference"] = expected
                        record["delta"] = (
                            round(cell.rho_scaled - expected, 2) if expected is not None else None
                        )
                records.append(record)
        return records

    def write(
        self,
        directory: t.Union[str, "os.PathLike[str]"],
        reference: t.Optional[ReferenceScores] = None,
        stem: str = "report",
    ) -> t.Tuple[pathlib.Path, pathlib.Path]:
        """Write ``<stem>.txt`` and ``<stem>.jsonl`` into ``directory``."""
        directory = pathlib.Path(directory)
        text_path = directory / f"{stem}.txt"
        json_path = directory / f"{stem}.jsonl"
        try:
            directory.mkdir(parents = True, exist_ok = True)
            text_path.write_text(self.render(reference), encoding = "utf-8")
            json_path.write_text(
                "".join(
                    json.dumps(record, sort_keys = True) + "\n"
                    for record in self.records(reference)
                ),
                encoding = "utf-8",
            )
        except OSError as exc:
            raise ArtifactError(directory, exc.strerror or str(exc)) from exc
        return text_path, json_path
