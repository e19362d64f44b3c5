"""Tokenization and the two normal forms used for quote matching.

Text is lowercased and split on whitespace; every maximal run of
punctuation characters becomes its own token, so "first!" yields
``["first", "!"]``. The exact form keeps those tokens. The loose form
drops punctuation tokens and stopwords.

Punctuation here means any character in the Unicode general categories
P* (punctuation) or S* (symbols).
"""

from __future__ import annotations

import re
import sys
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path


def _punctuation_class() -> str:
    ranges: list[tuple[int, int]] = []
    for cp in range(sys.maxunicode + 1):
        if unicodedata.category(chr(cp))[0] in "PS":
            if ranges and ranges[-1][1] == cp - 1:
                ranges[-1] = (ranges[-1][0], cp)
            else:
                ranges.append((cp, cp))
    parts = []
    for lo, hi in ranges:
        if lo == hi:
            parts.append(re.escape(chr(lo)))
        else:
            parts.append(f"{re.escape(chr(lo))}-{re.escape(chr(hi))}")
    return "".join(parts)


_PUNCT = _punctuation_class()
_TOKEN_RE = re.compile(f"[{_PUNCT}]+|[^\\s{_PUNCT}]+")
_PUNCT_RE = re.compile(f"[{_PUNCT}]")


def is_punct_token(token: str) -> bool:
    # Tokens are either all punctuation or contain none, so one char decides.
    if not token or token.isalnum():
        return False
    return _PUNCT_RE.match(token) is not None


def tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    for chunk in text.lower().split():
        if chunk.isalnum():
            tokens.append(chunk)
        else:
            tokens.extend(_TOKEN_RE.findall(chunk))
    return tokens


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    version: str

    def __contains__(self, token: str) -> bool:
        return token in self.words


def parse_stopwords(text: str) -> StopwordList:
    """Parse a stopword file: a ``# version: <label>`` header, then one token per line."""
    version = None
    words = set()
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "version" and version is None:
                version = value.strip()
            continue
        words.add(line.lower())
    if not version:
        raise ValueError("stopword file has no '# version:' header")
    return StopwordList(frozenset(words), version)


def load_stopwords(path: str | Path | None = None) -> StopwordList:
    if path is None:
        return default_stopwords()
    return parse_stopwords(Path(path).read_text(encoding="utf-8"))


@lru_cache(maxsize=1)
def default_stopwords() -> StopwordList:
    text = resources.files("quotespread.data").joinpath("stopwords_en.txt").read_text(encoding="utf-8")
    return parse_stopwords(text)


@dataclass(frozen=True)
class NormalForm:
    exact_tokens: tuple[str, ...]
    loose_tokens: tuple[str, ...]

    @property
    def loose_key(self) -> str:
        return " ".join(self.loose_tokens)

    @property
    def matchable(self) -> bool:
        return bool(self.loose_tokens)


def loosen(tokens, stopwords: StopwordList) -> tuple[str, ...]:
    words = stopwords.words
    match = _PUNCT_RE.match
    return tuple(t for t in tokens if t not in words and (t.isalnum() or match(t) is None))


def normalize(text: str, stopwords: StopwordList | None = None) -> NormalForm:
    if stopwords is None:
        stopwords = default_stopwords()
    exact = tuple(tokenize(text))
    return NormalForm(exact, loosen(exact, stopwords))
