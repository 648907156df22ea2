"""Byte-pair-encoding subword learner used for the subword overlap feature.

Words are split into characters plus an end-of-word marker, then the most
frequent adjacent symbol pair is merged greedily, one pair per step. Ties on
frequency are broken toward the lexicographically smaller pair so the learned
vocabulary is a pure function of the input. Symbols that stop occurring after
later merges are never pruned from the vocabulary: every merge adds exactly
one new symbol.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import Corpus
from .errors import DataError

END_OF_WORD = "</w>"


@dataclass(frozen=True)
class SubwordVocabulary:
    """An ordered merge list plus the full set of subword symbols it produces."""

    merges: tuple[tuple[str, str], ...]
    subword_types: frozenset[str]

    @property
    def num_merges(self) -> int:
        return len(self.merges)


def _word_symbols(word: str) -> tuple[str, ...]:
    return tuple(word) + (END_OF_WORD,)


def _pair_counts(symbols: Sequence[str]) -> Counter:
    counts: Counter = Counter()
    for a, b in zip(symbols, symbols[1:]):
        counts[(a, b)] += 1
    return counts


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    # Left-to-right greedy replacement of the pair by its concatenation.
    a, b = pair
    merged = a + b
    out: list[str] = []
    i = 0
    while i < len(symbols):
        if i + 1 < len(symbols) and symbols[i] == a and symbols[i + 1] == b:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(corpora: Iterable[Corpus], num_merges: int) -> SubwordVocabulary:
    """Learn `num_merges` greedy highest-frequency pair merges.

    Pair frequencies are counted over word occurrences (a word of frequency f
    contributes f times each of its adjacent symbol pairs, overlapping pairs
    included). Learning stops early if no adjacent pair remains.
    """
    if num_merges < 0:
        raise ValueError(f"num_merges must be >= 0, got {num_merges}")
    word_freq: Counter = Counter()
    for corp in corpora:
        for sent in corp.sentences:
            word_freq.update(sent)
    if not word_freq:
        raise DataError("cannot learn subwords from corpora with no tokens")

    words: list[tuple[str, ...]] = []
    freqs: list[int] = []
    for word, freq in word_freq.items():
        words.append(_word_symbols(word))
        freqs.append(freq)

    vocab: set[str] = set()
    for sym_word in words:
        vocab.update(sym_word)

    pair_counts: Counter = Counter()
    pair_to_words: defaultdict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, sym_word in enumerate(words):
        for pair, c in _pair_counts(sym_word).items():
            pair_counts[pair] += c * freqs[wi]
            pair_to_words[pair].add(wi)

    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        if not pair_counts:
            break
        best_pair = min(pair_counts, key=lambda p: (-pair_counts[p], p))
        if pair_counts[best_pair] <= 0:
            break
        merges.append(best_pair)
        vocab.add(best_pair[0] + best_pair[1])
        # Re-count pairs only in the words that actually contain the pair.
        affected = sorted(pair_to_words[best_pair])
        for wi in affected:
            old = words[wi]
            for pair, c in _pair_counts(old).items():
                pair_counts[pair] -= c * freqs[wi]
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                pair_to_words[pair].discard(wi)
            new = _merge_word(old, best_pair)
            words[wi] = new
            for pair, c in _pair_counts(new).items():
                pair_counts[pair] += c * freqs[wi]
                pair_to_words[pair].add(wi)

    return SubwordVocabulary(tuple(merges), frozenset(vocab))


def segment_word(word: str, vocab: SubwordVocabulary) -> tuple[str, ...]:
    """Split one word into subwords by replaying the learned merges in order."""
    symbols = _word_symbols(word)
    for pair in vocab.merges:
        if len(symbols) < 2:
            break
        symbols = _merge_word(symbols, pair)
    return symbols
