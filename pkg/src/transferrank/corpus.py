"""Tokenized corpora: the raw material for all dataset-dependent features.

Corpus files are UTF-8 text with one pre-tokenized sentence per line and
tokens separated by whitespace. Gazetteer files carry one entity string per
line; the whole line is kept as a single token so that entity overlap means
exact string match.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataError


@dataclass(frozen=True)
class Corpus:
    """An immutable tokenized corpus for one language."""

    language_code: str
    sentences: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        if not self.language_code:
            raise DataError("corpus language code must be non-empty")

    @cached_property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    @cached_property
    def type_set(self) -> frozenset[str]:
        return frozenset(tok for sent in self.sentences for tok in sent)

    @property
    def sentence_count(self) -> int:
        return len(self.sentences)

    @staticmethod
    def from_sentences(language_code: str, sentences: Iterable[Sequence[str]]) -> "Corpus":
        return Corpus(language_code, tuple(tuple(s) for s in sentences))


def load_corpus(path: str | Path, language_code: str | None = None) -> Corpus:
    """Read a one-sentence-per-line tokenized corpus.

    Tokens are split on whitespace; no case or punctuation normalization is
    applied. Blank lines are skipped (they are not training examples). When
    `language_code` is omitted it defaults to the file stem.
    """
    path = Path(path)
    code = language_code if language_code is not None else path.stem
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read corpus file {path}: {exc}") from exc
    sentences = tuple(tuple(line.split()) for line in text.splitlines() if line.strip())
    return Corpus(code, sentences)


def load_gazetteer(path: str | Path, language_code: str | None = None) -> Corpus:
    """Read a one-entity-per-line gazetteer.

    Each line becomes a single-token sentence, so sentence count, token count
    and entry count coincide, and type overlap counts exact entity matches.
    """
    path = Path(path)
    code = language_code if language_code is not None else path.stem
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read gazetteer file {path}: {exc}") from exc
    sentences = tuple((line.strip(),) for line in text.splitlines() if line.strip())
    return Corpus(code, sentences)
