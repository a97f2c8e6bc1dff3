# SPDX-License-Identifier: LGPL-3.0-only

"""Published word-similarity scores used as reference points in reproduce runs."""

from __future__ import annotations

import csv
import dataclasses
import io
import typing as t
from importlib import resources

from .errors import FormatError
from .losses import LossKind
from .methods import MetaMethod

__all__ = ("ReferenceKey", "ReferenceScores", "parse_label", "load_reference")

DATA_FILE: t.Final[str] = "reference_scores.tsv"
KEY_COLUMNS: t.Final[t.FrozenSet[str]] = frozenset({ "method", "loss", "target", "provenance" })
DATASETS: t.Final[t.Tuple[str, ...]] = ("simlex", "ws353", "rg", "mturk", "rw", "men")
METHOD_NAMES: t.Final[t.FrozenSet[str]] = frozenset(method.value for method in MetaMethod)
LOSS_NAMES: t.Final[t.FrozenSet[str]] = frozenset(loss.value for loss in LossKind)


@dataclasses.dataclass(frozen = True)
class ReferenceKey:
    method: str
    """A method value such as ``caeme``, or a source name for single-embedding rows."""
    loss: str = ""
    target: str = ""


def parse_label(label: str) -> ReferenceKey:
    """Split a row label of the form ``method[-loss][@target]``.

    ``tae+y-mse@glove`` becomes ``ReferenceKey("tae+y", "mse", "glove")``. A head that is
    not a known method joined to a known loss is kept whole, so source names such as
    ``glove-6b`` survive.
    """
    head, _, target = label.partition("@")
    method, _, loss = head.rpartition("-")
    if method in METHOD_NAMES and loss in LOSS_NAMES:
        return ReferenceKey(method, loss, target)
    return ReferenceKey(head, "", target)


@dataclasses.dataclass(frozen = True)
class ReferenceScores:
    scores: t.Mapping[t.Tuple[ReferenceKey, str], float]
    provenance: t.Mapping[ReferenceKey, str] = dataclasses.field(default_factory = dict)

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def datasets(self) -> t.List[str]:
        return sorted({ dataset for _, dataset in self.scores }, key = _dataset_order)

    def lookup(self, label: str, dataset: str) -> t.Optional[float]:
        """Reference score of row ``label`` on ``dataset``, or ``None`` if unpublished."""
        return self.scores.get((parse_label(label), dataset))


def _dataset_order(name: str) -> t.Tuple[int, str]:
    return (DATASETS.index(name) if name in DATASETS else len(DATASETS), name)


def load_reference(text: t.Optional[str] = None) -> ReferenceScores:
    """Parse a reference score table.

    Parameters
    ----------
    text: Optional[:class:`str`]
        Tab-separated table with ``method``, ``loss``, ``target`` and ``provenance``
        columns and one column per dataset. Defaults to the packaged table.

    Raises
    ------
    FormatError
        A column is missing or a score is not a number.
    """
    if text is None:
        text = resources.files("metaemb").joinpath("data").joinpath(DATA_FILE).read_text(
            encoding = "utf-8",
        )

    reader = csv.DictReader(io.StringIO(text), delimiter = "\t")
    fields = list(reader.fieldnames or ())
    missing = KEY_COLUMNS - set(fields)
    if missing:
        raise FormatError(f"reference table lacks column(s) {sorted(missing)}", line = 1)
    datasets = [field for field in fields if field not in KEY_COLUMNS]

    scores: t.Dict[t.Tuple[ReferenceKey, str], float] = {}
    provenance: t.Dict[ReferenceKey, str] = {}
    for lineno, row in enumerate(reader, start = 2):
        key = ReferenceKey(row["method"], row["loss"] or "", row["target"] or "")
        provenance[key] = row["provenance"]
        for dataset in datasets:
            value = (row[dataset] or "").strip()
            if not value:
                continue
            try:
                scores[(key, dataset)] = float(value)
            except ValueError:
                raise FormatError(f"score {value!r} is not a number", line = lineno) from None

    return ReferenceScores(scores, provenance)
