"""Ranking evaluation: median rank, accuracy@k, rank variance, length filter.

Each test gloss is encoded on its own, with no padding, and the correct head
is ranked among the pretrained candidates by cosine.  Exact cosine ties are
broken lexicographically so ranks are deterministic.  Crossword mode first
restricts candidates to words with the answer's character count.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import CrosswordClue, DefinitionPair
from .embeddings import PretrainedTable, cosine_to_all
from .errors import DataError
from .tokenizer import encode_gloss


@dataclass
class RankRecord:
    """Outcome of ranking one test item."""

    item_id: str
    rank: int
    candidate_count: int
    filtered: bool = False
    excluded: bool = False  # correct word did not survive the filter


@dataclass
class MetricsReport:
    median_rank: float
    acc_at_10: float
    acc_at_100: float
    rank_variance: float
    n_items: int


def length_filter(table: PretrainedTable, answer_length: int) -> list[str]:
    """Exactly the table words with ``answer_length`` characters."""
    if answer_length < 1:
        raise ValueError("answer length must be at least 1")
    return [w for w in table.words if len(w) == answer_length]


def rank_of_correct(
    y: np.ndarray,
    table: PretrainedTable,
    correct: str,
    candidate_filter: Callable[[str], bool] | None = None,
    item_id: str = "",
) -> RankRecord:
    """1-based rank of ``correct`` among (filtered) candidates by cosine.

    A correct word that the filter removes is scored one past the worst
    candidate and flagged, keeping set-level metrics defined.
    """
    if correct not in table:
        raise DataError(f"correct word {correct!r} not in the candidate table")
    scores = cosine_to_all(y, table)
    if candidate_filter is None:
        pool = np.arange(len(table.words))
    else:
        pool = np.array(
            [i for i, w in enumerate(table.words) if candidate_filter(w)], dtype=np.int64
        )
    correct_row = table.word_to_row[correct]
    filtered = candidate_filter is not None
    if correct_row not in pool:
        return RankRecord(
            item_id=item_id,
            rank=len(pool) + 1,
            candidate_count=len(pool),
            filtered=filtered,
            excluded=True,
        )
    pool_scores = scores[pool]
    correct_score = scores[correct_row]
    greater = int((pool_scores > correct_score).sum())
    tied = [
        int(i)
        for i, s in zip(pool, pool_scores)
        if s == correct_score and i != correct_row
    ]
    tied_before = sum(1 for i in tied if table.words[i] < correct)
    return RankRecord(
        item_id=item_id,
        rank=1 + greater + tied_before,
        candidate_count=len(pool),
        filtered=filtered,
    )


def median_rank(ranks: Sequence[float]) -> float:
    """Middle rank; for even counts, the mean of the two middle ranks."""
    if len(ranks) == 0:
        raise ValueError("median of an empty rank list")
    return float(np.median(np.asarray(ranks, dtype=np.float64)))


def accuracy_at_k(ranks: Sequence[float], k: int) -> float:
    if len(ranks) == 0:
        raise ValueError("accuracy of an empty rank list")
    ranks = np.asarray(ranks, dtype=np.float64)
    return float((ranks <= k).mean())


def rank_variance(ranks: Sequence[float]) -> float:
    """Population variance (divide by n) of the rank distribution."""
    if len(ranks) == 0:
        raise ValueError("variance of an empty rank list")
    return float(np.var(np.asarray(ranks, dtype=np.float64)))


def summarize(records: Sequence[RankRecord]) -> MetricsReport:
    ranks = [r.rank for r in records]
    return MetricsReport(
        median_rank=median_rank(ranks),
        acc_at_10=accuracy_at_k(ranks, 10),
        acc_at_100=accuracy_at_k(ranks, 100),
        rank_variance=rank_variance(ranks),
        n_items=len(records),
    )


def format_summary(report: MetricsReport) -> str:
    return (
        f"median_rank={report.median_rank!r} "
        f"acc@10={report.acc_at_10!r} "
        f"acc@100={report.acc_at_100!r} "
        f"rank_variance={report.rank_variance!r}"
    )


def write_rank_records(path: str | Path, records: Sequence[RankRecord]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for rec in records:
            handle.write(f"{rec.item_id}\t{rec.rank}\t{rec.candidate_count}\n")


def evaluate(
    checkpoint,
    items: Sequence[DefinitionPair | CrosswordClue],
    mode: str = "definitions",
) -> tuple[MetricsReport, list[RankRecord]]:
    """Rank every test item under a trained checkpoint.

    ``checkpoint`` provides model, vocab, pretrained table, merge table and
    config (trainer module).  ``mode`` is "definitions" or "crossword"; the
    latter expects CrosswordClue items and applies the length filter.
    """
    if mode not in ("definitions", "crossword"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if len(items) == 0:
        raise DataError("empty test set")
    model = checkpoint.model
    table: PretrainedTable = checkpoint.pretrained
    segmentation = checkpoint.config.segmentation
    records = []
    for index, item in enumerate(items):
        if mode == "crossword":
            if not isinstance(item, CrosswordClue):
                raise DataError("crossword mode needs crossword clue items")
            tokens, correct = item.clue, item.answer
            wanted = item.answer_length
            candidate_filter = lambda w, n=wanted: len(w) == n
        else:
            tokens, correct = item.gloss, item.head
            candidate_filter = None
        if correct not in table:
            raise DataError(f"test head {correct!r} missing from the pretrained table")
        ids = encode_gloss(tokens, checkpoint.vocab, checkpoint.merges, segmentation)
        y = model.encode_ids(np.asarray(ids, dtype=np.int64), np.array([len(ids)]))
        records.append(
            rank_of_correct(
                y, table, correct, candidate_filter, item_id=f"{index}:{correct}"
            )
        )
    return summarize(records), records
