# SPDX-License-Identifier: LGPL-3.0-only

"""Source embedding tables: parsing, alignment, normalisation and export."""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
import pathlib
import typing as t

import numpy as np

from .errors import (
    AlignmentError,
    ArtifactError,
    ContractError,
    DimensionError,
    EmptyInputError,
    FormatError,
    ParseError,
    UnknownWordError,
)

__all__ = (
    "TableFormat",
    "AlignmentPolicy",
    "EmbeddingTable",
    "AlignedEmbeddingSet",
    "load_table",
    "export_table",
    "align",
    "l2_normalize",
    "save_aligned",
    "load_aligned",
)

LOGGER = logging.getLogger(__name__)

PathLike = t.Union[str, "os.PathLike[str]"]

_ALIGNED_ARCHIVE = "aligned.npz"
_MANIFEST = "manifest.json"
_NORM_TOLERANCE = 1e-6


class TableFormat(str, enum.Enum):
    """Layout of a word2vec-style text file."""

    PLAIN = "plain"
    """One ``word v1 ... vd`` line per word, no header."""
    HEADERED = "headered"
    """A first ``<count> <dim>`` line, then plain rows."""
    AUTO = "auto"
    """Headered if the first line is exactly two integers, plain otherwise."""


class AlignmentPolicy(str, enum.Enum):
    INTERSECTION = "intersection"


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype = np.float64, copy = True)
    matrix.setflags(write = False)
    return matrix


@dataclasses.dataclass(frozen = True, eq = False)
class EmbeddingTable:
    """One embedding set: a vocabulary and the vector of every word in it.

    Tables are immutable; the matrix is stored read-only.

    Parameters
    ----------
    name: :class:`str`
        Identifier used in reports and artifact names.
    vocab: Sequence[:class:`str`]
        Unique words, row order of ``matrix``.
    matrix: :class:`numpy.ndarray`
        ``len(vocab) x dim`` array of finite values.
    """

    name: str
    vocab: t.Tuple[str, ...]
    matrix: np.ndarray = dataclasses.field(repr = False)
    _index: t.Dict[str, int] = dataclasses.field(init = False, repr = False, compare = False)

    def __post_init__(self) -> None:
        vocab = tuple(self.vocab)
        matrix = _frozen(self.matrix)

        if matrix.ndim != 2:
            raise DimensionError(f"table {self.name!r} matrix must be 2-D, got {matrix.ndim}-D")
        if matrix.shape[0] != len(vocab):
            raise DimensionError(
                f"table {self.name!r} has {len(vocab)} words but {matrix.shape[0]} rows",
            )
        if matrix.shape[1] < 1:
            raise DimensionError(f"table {self.name!r} has no columns")
        if not np.all(np.isfinite(matrix)):
            raise DimensionError(f"table {self.name!r} holds non-finite values")

        index = { word: i for i, word in enumerate(vocab) }
        if len(index) != len(vocab):
            raise ContractError(f"table {self.name!r} has duplicate vocabulary entries")

        object.__setattr__(self, "vocab", vocab)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_index", index)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return len(self.vocab)

    def __contains__(self, word: object) -> bool:
        return word in self._index

    def index(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise UnknownWordError(f"{word!r} is not in table {self.name!r}") from None

    def vector(self, word: str) -> np.ndarray:
        """Return the row of ``word``.

        Raises
        ------
        UnknownWordError
            The word is not in the vocabulary.
        """
        return self.matrix[self.index(word)]

    lookup = vector

    def rows(self, words: t.Iterable[str]) -> np.ndarray:
        return self.matrix[[self.index(word) for word in words]]


@dataclasses.dataclass(frozen = True, eq = False)
class AlignedEmbeddingSet:
    """Several source tables indexed by one shared vocabulary.

    Row ``i`` of every source is the vector of ``shared_vocab[i]``.
    """

    sources: t.Tuple[EmbeddingTable, ...]
    shared_vocab: t.Tuple[str, ...]
    normalized: bool = False
    dropped: int = 0
    """Words removed from the shared vocabulary because some source had a zero row."""

    def __post_init__(self) -> None:
        sources = tuple(self.sources)
        vocab = tuple(self.shared_vocab)
        if not sources:
            raise ContractError("an aligned set needs at least one source")

        for source in sources:
            if source.vocab != vocab:
                raise AlignmentError(
                    f"source {source.name!r} is not indexed by the shared vocabulary",
                )

        if self.normalized:
            for source in sources:
                norms = np.linalg.norm(source.matrix, axis = 1)
                if not np.allclose(norms, 1.0, rtol = 0.0, atol = _NORM_TOLERANCE):
                    raise ContractError(f"source {source.name!r} is flagged normalized but is not")

        object.__setattr__(self, "sources", sources)
        object.__setattr__(self, "shared_vocab", vocab)

    def __len__(self) -> int:
        return len(self.shared_vocab)

    def __contains__(self, word: object) -> bool:
        return word in self.sources[0]

    @property
    def names(self) -> t.Tuple[str, ...]:
        return tuple(source.name for source in self.sources)

    @property
    def dims(self) -> t.Tuple[int, ...]:
        return tuple(source.dim for source in self.sources)

    @property
    def matrices(self) -> t.Tuple[np.ndarray, ...]:
        return tuple(source.matrix for source in self.sources)

    def index(self, word: str) -> int:
        return self.sources[0].index(word)

    def concatenated(self) -> np.ndarray:
        return np.hstack(self.matrices)


# Parsing


def _parse_row(tokens: t.Sequence[str], lineno: int) -> np.ndarray:
    try:
        row = np.array([float(token) for token in tokens], dtype = np.float64)
    except ValueError:
        bad = next(token for token in tokens if not _is_float(token))
        raise ParseError(f"non-numeric value {bad!r}", line = lineno) from None

    if not np.all(np.isfinite(row)):
        raise ParseError("non-finite value", line = lineno)
    return row


def _is_float(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def _looks_like_header(tokens: t.Sequence[str]) -> bool:
    return len(tokens) == 2 and all(token.isdigit() for token in tokens)


def load_table(
    path: PathLike,
    format: t.Union[TableFormat, str] = TableFormat.AUTO,  # noqa: A002
    *,
    name: t.Optional[str] = None,
) -> EmbeddingTable:
    """Read a word2vec-style UTF-8 text file.

    Parameters
    ----------
    path: Union[:class:`str`, :class:`os.PathLike`]
        The file to read.
    format: :class:`TableFormat`
        Whether the file starts with a ``<count> <dim>`` header.
    name: Optional[:class:`str`]
        Table name. Defaults to the file stem.

    Returns
    -------
    :class:`EmbeddingTable`
        The table; for duplicated words the first occurrence is kept.

    Raises
    ------
    EmptyInputError
        The file holds no rows.
    FormatError
        A row's width disagrees with the table dimension, or the header is wrong.
    ParseError
        A value is not a finite number.
    ArtifactError
        The file cannot be read.
    """
    path = pathlib.Path(path)
    format = TableFormat(format)  # noqa: A001
    name = name or path.stem

    try:
        with path.open(encoding = "utf-8") as f:
            lines = f.read().splitlines()
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc

    numbered = [(i, line.split()) for i, line in enumerate(lines, start = 1) if line.strip()]
    if not numbered:
        raise EmptyInputError(f"{path}: no embedding rows")

    header: t.Optional[t.Tuple[int, int]] = None
    first_line, first = numbered[0]
    if format is TableFormat.HEADERED or (
        format is TableFormat.AUTO and _looks_like_header(first)
    ):
        if not _looks_like_header(first):
            raise FormatError("expected a '<count> <dim>' header", line = first_line)
        header = (int(first[0]), int(first[1]))
        numbered = numbered[1:]
        if not numbered:
            raise EmptyInputError(f"{path}: header but no embedding rows")

    dim = header[1] if header is not None else len(numbered[0][1]) - 1
    if dim < 1:
        raise FormatError("rows carry no vector values", line = numbered[0][0])

    vocab: t.List[str] = []
    rows: t.List[np.ndarray] = []
    seen: t.Set[str] = set()
    duplicates = 0

    for lineno, tokens in numbered:
        if len(tokens) - 1 != dim:
            raise FormatError(
                f"expected {dim} values, found {len(tokens) - 1}",
                line = lineno,
            )
        word = tokens[0]
        row = _parse_row(tokens[1:], lineno)
        if word in seen:
            duplicates += 1
            continue
        seen.add(word)
        vocab.append(word)
        rows.append(row)

    if header is not None and header[0] != len(numbered):
        raise FormatError(
            f"header announces {header[0]} rows but the file holds {len(numbered)}",
            line = first_line,
        )

    if duplicates:
        LOGGER.warning("%s: ignored %d duplicate word(s), first occurrence kept", path, duplicates)

    LOGGER.debug("Loaded %r: %d words, dim %d", name, len(vocab), dim)
    return EmbeddingTable(name, tuple(vocab), np.vstack(rows))


def export_table(table: EmbeddingTable, path: PathLike) -> None:
    """Write ``table`` as headered word2vec text with 10 significant digits.

    Raises
    ------
    ArtifactError
        The file cannot be written.
    """
    path = pathlib.Path(path)
    lines = [f"{len(table)} {table.dim}"]
    lines.extend(
        word + " " + " ".join(f"{value:.10g}" for value in row)
        for word, row in zip(table.vocab, table.matrix)
    )
    try:
        with path.open("w", encoding = "utf-8", newline = "\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc


# Alignment


def align(
    tables: t.Sequence[EmbeddingTable],
    policy: t.Union[AlignmentPolicy, str] = AlignmentPolicy.INTERSECTION,
) -> AlignedEmbeddingSet:
    """Restrict ``tables`` to the sorted intersection of their vocabularies.

    Raises
    ------
    ContractError
        Fewer than two tables were given, or two share a name.
    AlignmentError
        The vocabularies have no word in common.
    """
    AlignmentPolicy(policy)
    if len(tables) < 2:
        raise ContractError(f"alignment needs at least 2 tables, got {len(tables)}")

    names = [table.name for table in tables]
    if len(set(names)) != len(names):
        raise ContractError(f"source names must be unique, got {names}")

    shared = set(tables[0].vocab)
    for table in tables[1:]:
        shared.intersection_update(table.vocab)

    if not shared:
        sizes = ", ".join(f"{table.name}={len(table)}" for table in tables)
        raise AlignmentError(f"source vocabularies do not intersect ({sizes})")

    vocab = tuple(sorted(shared))
    sources = tuple(EmbeddingTable(table.name, vocab, table.rows(vocab)) for table in tables)

    LOGGER.info(
        "Aligned %d sources on %d shared words (%s)",
        len(sources),
        len(vocab),
        ", ".join(f"{table.name}={len(table)}" for table in tables),
    )
    return AlignedEmbeddingSet(sources, vocab)


def l2_normalize(aligned: AlignedEmbeddingSet) -> AlignedEmbeddingSet:
    """Scale every row of every source to unit length.

    Words with a zero row in any source are dropped first, with a warning.
    Normalising an already normalised set returns it unchanged.

    Raises
    ------
    AlignmentError
        Every word had a zero row somewhere.
    """
    if aligned.normalized:
        return aligned

    norms = np.stack([np.linalg.norm(matrix, axis = 1) for matrix in aligned.matrices])
    keep = np.all(norms > 0.0, axis = 0)
    dropped = int(np.count_nonzero(~keep))

    if dropped:
        LOGGER.warning("Dropping %d word(s) with a zero vector in some source", dropped)
    if not np.any(keep):
        raise AlignmentError("every shared word has a zero vector in some source")

    vocab = tuple(word for word, kept in zip(aligned.shared_vocab, keep) if kept)
    sources = tuple(
        EmbeddingTable(source.name, vocab, source.matrix[keep] / norm[keep, None])
        for source, norm in zip(aligned.sources, norms)
    )
    return AlignedEmbeddingSet(
        sources,
        vocab,
        normalized = True,
        dropped = aligned.dropped + dropped,
    )


# Aligned-set artifacts


def save_aligned(aligned: AlignedEmbeddingSet, directory: PathLike) -> pathlib.Path:
    """Write ``aligned`` and its manifest into ``directory``.

    Returns
    -------
    :class:`pathlib.Path`
        The manifest path.
    """
    directory = pathlib.Path(directory)
    arrays = { f"source_{i}": matrix for i, matrix in enumerate(aligned.matrices) }
    manifest = {
        "normalized": aligned.normalized,
        "shared_vocab_size": len(aligned),
        "dropped_zero_rows": aligned.dropped,
        "sources": [
            { "name": name, "dim": dim } for name, dim in zip(aligned.names, aligned.dims)
        ],
    }
    try:
        directory.mkdir(parents = True, exist_ok = True)
        np.savez(
            directory / _ALIGNED_ARCHIVE,
            vocab = np.array(aligned.shared_vocab, dtype = str),
            **arrays,
        )
        (directory / _MANIFEST).write_text(
            json.dumps(manifest, indent = 2, sort_keys = True) + "\n",
            encoding = "utf-8",
        )
    except OSError as exc:
        raise ArtifactError(directory, exc.strerror or str(exc)) from exc
    return directory / _MANIFEST


def load_aligned(directory: PathLike) -> AlignedEmbeddingSet:
    """Read a set written by :func:`save_aligned`."""
    directory = pathlib.Path(directory)
    try:
        manifest = json.loads((directory / _MANIFEST).read_text(encoding = "utf-8"))
        with np.load(directory / _ALIGNED_ARCHIVE) as archive:
            vocab = tuple(str(word) for word in archive["vocab"])
            matrices = [archive[f"source_{i}"] for i in range(len(manifest["sources"]))]
    except (OSError, KeyError, ValueError) as exc:
        raise ArtifactError(directory, f"not a readable aligned set ({exc})") from exc

    sources = tuple(
        EmbeddingTable(entry["name"], vocab, matrix)
        for entry, matrix in zip(manifest["sources"], matrices)
    )
    return AlignedEmbeddingSet(
        sources,
        vocab,
        normalized = bool(manifest["normalized"]),
        dropped = int(manifest.get("dropped_zero_rows", 0)),
    )
