"""Word vocabulary with UNK/PAD and byte-pair-encoding subword segmentation.

BPE here works on whole words: each word starts as its characters with a
word-final marker fused onto the last character ("dogs" -> d o g s#), and
the most frequent adjacent symbol pair is merged repeatedly.  Count ties
prefer the alphabetically earliest left symbol, then the earliest right
symbol.  Segmented words are rendered with a trailing "@@" on every
non-final subword, e.g. "commencing" -> "comm@@ en@@ cing".
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .errors import DataError

UNK_TOKEN = "<unk>"
PAD_TOKEN = "<pad>"
END_MARKER = "#"
CONTINUATION = "@@"

WORD_VOCAB_CAP = 100_000
BPE_MERGES = 10_000


@dataclass
class WordVocab:
    """Dense token<->id maps over the ``cap`` most frequent tokens plus UNK/PAD."""

    token_to_id: dict[str, int]
    id_to_token: list[str]
    unk_id: int
    pad_id: int
    cap: int

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to ids, sending out-of-vocabulary tokens to UNK."""
        return [self.token_to_id.get(tok, self.unk_id) for tok in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for idx, token in enumerate(self.id_to_token):
                handle.write(f"{token}\t{idx}\n")

    @classmethod
    def load(cls, path: str | Path) -> "WordVocab":
        id_to_token: list[str] = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                token, sep, idx = line.partition("\t")
                if not sep or not idx.isdigit():
                    raise DataError(f"{path}: bad vocab line {line!r}")
                if int(idx) != len(id_to_token):
                    raise DataError(f"{path}: vocab ids must be dense from 0")
                id_to_token.append(token)
        try:
            unk_id = id_to_token.index(UNK_TOKEN)
            pad_id = id_to_token.index(PAD_TOKEN)
        except ValueError as exc:
            raise DataError(f"{path}: vocab file lacks {UNK_TOKEN}/{PAD_TOKEN}") from exc
        return cls(
            token_to_id={tok: i for i, tok in enumerate(id_to_token)},
            id_to_token=id_to_token,
            unk_id=unk_id,
            pad_id=pad_id,
            cap=len(id_to_token) - 2,
        )


def build_word_vocab(frequencies: Mapping[str, int], cap: int = WORD_VOCAB_CAP) -> WordVocab:
    """Keep the ``cap`` most frequent tokens (ties lexicographic), add UNK and PAD."""
    ranked = sorted(frequencies.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [token for token, _ in ranked[:cap]]
    id_to_token = kept + [UNK_TOKEN, PAD_TOKEN]
    return WordVocab(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
        unk_id=len(kept),
        pad_id=len(kept) + 1,
        cap=cap,
    )


@dataclass
class MergeTable:
    """Ordered list of learned BPE merges plus the word-final marker."""

    merges: list[tuple[str, str]] = field(default_factory=list)
    end_marker: str = END_MARKER

    def __len__(self) -> int:
        return len(self.merges)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            for left, right in self.merges:
                handle.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path: str | Path) -> "MergeTable":
        merges: list[tuple[str, str]] = []
        with open(path, encoding="utf-8") as handle:
            for line in handle:
                line = line.rstrip("\n")
                if not line:
                    continue
                parts = line.split(" ")
                if len(parts) != 2:
                    raise DataError(f"{path}: bad merge line {line!r}")
                merges.append((parts[0], parts[1]))
        return cls(merges=merges)


def _initial_symbols(word: str, end_marker: str) -> tuple[str, ...]:
    if not word:
        raise ValueError("cannot segment an empty word")
    if end_marker in word:
        raise ValueError(f"word {word!r} contains the end marker {end_marker!r}")
    return tuple(word[:-1]) + (word[-1] + end_marker,)


def _merge_symbols(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    # single left-to-right pass; a fused symbol is not re-merged in this pass
    merged: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
            merged.append(symbols[i] + symbols[i + 1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


def learn_bpe(word_frequencies: Mapping[str, int], num_merges: int = BPE_MERGES) -> MergeTable:
    """Learn a merge table from word frequencies.

    Each step merges the adjacent symbol pair with the highest total count
    (every adjacent position counts, weighted by word frequency).  Learning
    stops after ``num_merges`` merges or once the best pair occurs fewer
    than twice.
    """
    words = [_initial_symbols(w, END_MARKER) for w in word_frequencies]
    freqs = [int(word_frequencies[w]) for w in word_frequencies]

    pair_counts: Counter[tuple[str, str]] = Counter()
    where: dict[tuple[str, str], set[int]] = {}
    for idx, symbols in enumerate(words):
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += freqs[idx]
            where.setdefault(pair, set()).add(idx)

    table = MergeTable()
    for _ in range(num_merges):
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(p for p, c in pair_counts.items() if c == best_count)
        table.merges.append(best)

        for idx in sorted(where.get(best, ())):
            old = words[idx]
            new = _merge_symbols(old, best)
            if new == old:
                continue
            for pair in zip(old, old[1:]):
                pair_counts[pair] -= freqs[idx]
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                occupants = where.get(pair)
                if occupants is not None:
                    occupants.discard(idx)
                    if not occupants:
                        del where[pair]
            for pair in zip(new, new[1:]):
                pair_counts[pair] += freqs[idx]
                where.setdefault(pair, set()).add(idx)
            words[idx] = new
    return table


def apply_bpe(word: str, table: MergeTable) -> list[str]:
    """Segment a word by replaying the merge table; keeps the fused end marker."""
    symbols = _initial_symbols(word, table.end_marker)
    for pair in table.merges:
        if len(symbols) == 1:
            break
        symbols = _merge_symbols(symbols, pair)
    return list(symbols)


def render_subwords(subwords: list[str], end_marker: str = END_MARKER) -> list[str]:
    """Serialize subwords: "@@" on non-final pieces, marker stripped from the last."""
    if not subwords:
        return []
    rendered = [s + CONTINUATION for s in subwords[:-1]]
    last = subwords[-1]
    if last.endswith(end_marker):
        last = last[: -len(end_marker)]
    rendered.append(last)
    return rendered


def segment_word(word: str, table: MergeTable) -> list[str]:
    """Segment and serialize a word, e.g. "abd" -> ["ab@@", "d"]."""
    return render_subwords(apply_bpe(word, table), table.end_marker)


def segment_tokens(tokens: Iterable[str], table: MergeTable) -> list[str]:
    out: list[str] = []
    for token in tokens:
        out.extend(segment_word(token, table))
    return out


def unsegment_text(text: str) -> str:
    """Undo the "@@ " serialization, recovering the original token text."""
    return text.replace(CONTINUATION + " ", "")


def encode_gloss(
    tokens: Iterable[str],
    vocab: WordVocab,
    merges: MergeTable | None = None,
    segmentation: str = "word",
) -> list[int]:
    """Token ids for a gloss, segmenting into subwords first under "bpe"."""
    if segmentation == "bpe":
        if merges is None:
            raise DataError("bpe segmentation requested but no merge table given")
        tokens = segment_tokens(tokens, merges)
    elif segmentation != "word":
        raise ValueError(f"unknown segmentation {segmentation!r}")
    return vocab.encode(tokens)
