# SPDX-License-Identifier: LGPL-3.0-only

from __future__ import annotations

import os
import typing as t

__all__ = (
    "MetaEmbeddingError",
    "EmptyInputError",
    "FormatError",
    "ParseError",
    "AlignmentError",
    "UnknownWordError",
    "DimensionError",
    "ConstructionError",
    "UndefinedCosineError",
    "UndefinedCorrelationError",
    "NumericError",
    "DivergenceError",
    "ContractError",
    "CoverageError",
    "DuplicatePairError",
    "ArtifactError",
)


class MetaEmbeddingError(Exception):
    """Base class for every error raised by :mod:`metaemb`."""


class EmptyInputError(MetaEmbeddingError, ValueError):
    """A file or collection that must hold data holds none."""


class FormatError(MetaEmbeddingError, ValueError):
    """A data file is structurally inconsistent.

    Parameters
    ----------
    message: :class:`str`
        What went wrong.
    line: Optional[:class:`int`]
        The 1-based line number at fault, if known.
    """

    def __init__(self, message: str, *, line: t.Optional[int] = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ParseError(FormatError):
    """A token could not be parsed as the value it should hold."""


class AlignmentError(MetaEmbeddingError, ValueError):
    """Source tables cannot be brought onto a shared vocabulary."""


class UnknownWordError(MetaEmbeddingError, LookupError):
    """A word is not in the vocabulary being queried."""


class DimensionError(MetaEmbeddingError, ValueError):
    """An array does not have the shape an operation requires."""


class ConstructionError(MetaEmbeddingError, ValueError):
    """A network was described with inconsistent layer sizes or activations."""


class UndefinedCosineError(MetaEmbeddingError, ZeroDivisionError):
    """Cosine similarity was requested for a zero vector."""


class UndefinedCorrelationError(MetaEmbeddingError, ZeroDivisionError):
    """A rank correlation was requested for a constant sequence."""


class NumericError(MetaEmbeddingError, ArithmeticError):
    """A computation produced non-finite values."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss or parameter.

    Parameters
    ----------
    epoch: :class:`int`
        The 0-based epoch during which training diverged.
    """

    def __init__(self, epoch: int, detail: str = "non-finite loss") -> None:
        super().__init__(f"training diverged in epoch {epoch}: {detail}")
        self.epoch = epoch


class ContractError(MetaEmbeddingError, ValueError):
    """Arguments violate an operation's documented preconditions."""


class CoverageError(MetaEmbeddingError, ValueError):
    """Too few dataset pairs are covered by an embedding table to score it."""


class DuplicatePairError(FormatError):
    """A similarity dataset lists the same unordered pair twice."""


class ArtifactError(MetaEmbeddingError, OSError):
    """Reading or writing a file failed.

    Parameters
    ----------
    path: Union[:class:`str`, :class:`os.PathLike`]
        The path involved.
    reason: :class:`str`
        Human-readable cause.
    """

    def __init__(self, path: t.Union[str, "os.PathLike[str]"], reason: str) -> None:
        super().__init__(f"{os.fspath(path)}: {reason}")
        self.path = os.fspath(path)
