"""Watch byte-pair merges grow a subword inventory on a tiny corpus.

Every word starts as its characters with a '#' fused onto the last one, so
"low" begins life as ('l', 'o', 'w#').  Each merge step fuses the most
frequent adjacent pair across the whole corpus (weighted by word frequency)
until nothing occurs twice.  Segmenting a new word just replays the merges
in order.
"""

from collections import Counter

from revdict.tokenizer import apply_bpe, learn_bpe, segment_word, unsegment_text

CORPUS = (
    "low low low low low "
    "lower lower "
    "newest newest newest newest newest newest "
    "widest widest widest"
)


def main() -> None:
    freqs = Counter(CORPUS.split())
    print("word frequencies:")
    for word, count in freqs.most_common():
        print(f"  {word:8s} {count}")

    table = learn_bpe(freqs, num_merges=10)
    exhausted = learn_bpe(freqs, num_merges=10_000)
    print(f"\nlearned {len(table)} merges (cap 10; uncapped learning stops at {len(exhausted)})")
    for step, (left, right) in enumerate(table.merges, start=1):
        print(f"  step {step:2d}: {left!r} + {right!r} -> {left + right!r}")

    print("\nsegmentations (raw symbols, then the @@ serialization):")
    for word in ["lowest", "newer", "wider", "low"]:
        raw = apply_bpe(word, table)
        rendered = segment_word(word, table)
        print(f"  {word:8s} {raw!r:40s} {' '.join(rendered)}")

    # the serialization is reversible: drop every "@@ " and the text is back
    line = " ".join(" ".join(segment_word(w, table)) for w in ["newest", "lowest"])
    print(f"\nround trip: {line!r} -> {unsegment_text(line)!r}")


if __name__ == "__main__":
    main()
