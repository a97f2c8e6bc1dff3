# SPDX-License-Identifier: LGPL-3.0-only

import pathlib
import typing as t

import numpy as np
import pytest

from metaemb import AlignedEmbeddingSet, EmbeddingTable, align, l2_normalize


def _random_aligned(
    words: int = 50,
    dims: t.Sequence[int] = (20, 20, 20),
    seed: int = 0,
) -> AlignedEmbeddingSet:
    rng = np.random.default_rng(seed)
    vocab = [f"w{i:03d}" for i in range(words)]
    tables = [
        EmbeddingTable(f"src{i}", vocab, rng.normal(size = (words, dim)))
        for i, dim in enumerate(dims)
    ]
    return l2_normalize(align(tables))


@pytest.fixture
def make_aligned() -> t.Callable[..., AlignedEmbeddingSet]:
    """Factory for normalized random sets: ``make_aligned(words, dims, seed)``."""
    return _random_aligned


@pytest.fixture
def aligned() -> AlignedEmbeddingSet:
    """Three 20-d sources over 50 words."""
    return _random_aligned()


@pytest.fixture
def write_text(tmp_path: pathlib.Path) -> t.Callable[[str, str], pathlib.Path]:
    def write(name: str, text: str) -> pathlib.Path:
        path = tmp_path / name
        path.write_text(text, encoding = "utf-8")
        return path

    return write
