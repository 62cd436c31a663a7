"""Pretrained head-word embeddings, the learned gloss table, and cosine ranking.

The pretrained file format is one word per line followed by its vector:
``word f1 f2 ... fD``, whitespace separated.  Rows with the wrong number of
fields, unparseable floats, or zero norm are dropped (counted, not fatal);
duplicate words keep their first occurrence.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import DataError

PRETRAINED_DIM = 500
LEARNED_DIM = 500
INIT_SCALE = 0.05


@dataclass
class PretrainedTable:
    """Immutable word -> D-vector table with cached row norms."""

    words: list[str]
    matrix: np.ndarray  # (n, D) float64
    word_to_row: dict[str, int]
    norms: np.ndarray  # (n,) float64, all > 0

    @classmethod
    def from_arrays(cls, words: Sequence[str], matrix: np.ndarray) -> "PretrainedTable":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("matrix must be (len(words), D)")
        if len(set(words)) != len(words):
            raise ValueError("duplicate words in table")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("zero-norm vector in table")
        return cls(
            words=list(words),
            matrix=matrix,
            word_to_row={w: i for i, w in enumerate(words)},
            norms=norms,
        )

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_row

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])

    def lookup(self, word: str) -> np.ndarray | None:
        row = self.word_to_row.get(word)
        if row is None:
            return None
        return self.matrix[row]


@dataclass
class PretrainedLoadStats:
    kept: int = 0
    dim_mismatch: int = 0
    zero_norm: int = 0
    duplicates: int = 0

    @property
    def rejected(self) -> int:
        return self.dim_mismatch + self.zero_norm + self.duplicates


def load_pretrained(
    path: str | Path, expected_dim: int | None = PRETRAINED_DIM
) -> tuple[PretrainedTable, PretrainedLoadStats]:
    """Load a pretrained vector file, skipping malformed rows.

    Returns the table and counts of what was dropped.  Raises DataError if
    no usable row remains.  With expected_dim=None the first parseable row
    fixes the width and later rows must agree with it.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    word_to_row: dict[str, int] = {}
    stats = PretrainedLoadStats()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            fields = line.split()
            if not fields:
                continue
            word = fields[0]
            try:
                vector = np.array([float(f) for f in fields[1:]], dtype=np.float64)
            except ValueError:
                stats.dim_mismatch += 1
                continue
            if vector.shape[0] == 0:
                stats.dim_mismatch += 1
                continue
            if expected_dim is None:
                expected_dim = int(vector.shape[0])
            if vector.shape[0] != expected_dim:
                stats.dim_mismatch += 1
                continue
            if not np.linalg.norm(vector) > 0.0:
                stats.zero_norm += 1
                continue
            if word in word_to_row:
                stats.duplicates += 1
                continue
            word_to_row[word] = len(words)
            words.append(word)
            rows.append(vector)
    if not rows:
        raise DataError(f"{path}: no usable embedding rows")
    stats.kept = len(rows)
    matrix = np.stack(rows)
    return (
        PretrainedTable(
            words=words,
            matrix=matrix,
            word_to_row=word_to_row,
            norms=np.linalg.norm(matrix, axis=1),
        ),
        stats,
    )


@dataclass
class LearnedTable:
    """Trainable gloss-token embedding matrix; the PAD row stays all-zero."""

    matrix: np.ndarray  # (vocab, E) float64
    pad_id: int

    @property
    def vocab_size(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[1])


def init_learned(
    vocab_size: int, dim: int = LEARNED_DIM, seed: int | np.random.Generator = 0, pad_id: int = -1
) -> LearnedTable:
    """Uniform [-0.05, 0.05] init, deterministic in ``seed``; PAD row zeroed."""
    if vocab_size < 2:
        raise ValueError("vocabulary must contain at least UNK and PAD")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    matrix = rng.uniform(-INIT_SCALE, INIT_SCALE, size=(vocab_size, dim))
    if pad_id < 0:
        pad_id += vocab_size
    matrix[pad_id] = 0.0
    return LearnedTable(matrix=matrix, pad_id=pad_id)


def cosine_to_all(query: np.ndarray, table: PretrainedTable) -> np.ndarray:
    """Cosine similarity of ``query`` against every table row."""
    query = np.asarray(query, dtype=np.float64)
    qnorm = np.linalg.norm(query)
    if not qnorm > 0.0:
        raise ValueError("zero-norm query")
    return (table.matrix @ query) / (table.norms * qnorm)


def rank_by_cosine(
    query: np.ndarray,
    table: PretrainedTable,
    candidate_filter: Callable[[str], bool] | None = None,
) -> list[tuple[str, float]]:
    """All candidates passing the filter, best cosine first, ties by word."""
    scores = cosine_to_all(query, table)
    if candidate_filter is None:
        pool = range(len(table.words))
    else:
        pool = [i for i, w in enumerate(table.words) if candidate_filter(w)]
    ranked = sorted(((table.words[i], float(scores[i])) for i in pool), key=lambda ws: (-ws[1], ws[0]))
    return ranked
