"""Keyword-based edit-intent detection over a semantic dictionary.

A prompt has high edit intent (indicator 1) exactly when it contains at
least one dictionary phrase as a contiguous whole-token subsequence.
An entry whose last token carries a trailing ``*`` matches any prompt
token that starts with that token, which covers inflections without any
stemming ("laugh*" matches "laughing" and "laughs").
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DictionaryParseError, ValidationError

CATEGORIES = ("expression", "pose", "style")


@dataclass(frozen=True)
class DictEntry:
    phrase: tuple[str, ...]
    category: str
    prefix: bool

    def display(self) -> str:
        text = " ".join(self.phrase)
        return text + "*" if self.prefix else text


@dataclass(frozen=True)
class EditDictionary:
    entries: tuple[DictEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Prompt:
    raw: str
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class IntentMatch:
    tokens: tuple[str, ...]
    phrase: str
    category: str
    start: int


@dataclass(frozen=True)
class IntentResult:
    indicator: int
    matches: tuple[IntentMatch, ...]


def default_dictionary_path() -> Path:
    return Path(resources.files("flexid").joinpath("data/edit_dictionary.txt"))


def load_dictionary(path) -> EditDictionary:
    """Parse a dictionary file: ``#`` comments, lines ``category: phrase[*]``."""
    text = Path(path).read_text(encoding="utf-8")
    entries: list[DictEntry] = []
    seen: set[tuple[tuple[str, ...], str]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if ":" not in stripped:
            raise DictionaryParseError(f"expected 'category: phrase', got {stripped!r}", lineno)
        category, _, phrase_text = stripped.partition(":")
        category = category.strip().lower()
        if category not in CATEGORIES:
            raise DictionaryParseError(f"unknown category {category!r}", lineno)
        phrase_text = phrase_text.strip().lower()
        prefix = phrase_text.endswith("*")
        if prefix:
            phrase_text = phrase_text[:-1]
        tokens = tuple(phrase_text.split())
        if not tokens or any(not t for t in tokens):
            raise DictionaryParseError("empty phrase", lineno)
        key = (tokens, category)
        if key in seen:
            raise DictionaryParseError(f"duplicate entry {phrase_text!r} for {category}", lineno)
        seen.add(key)
        entries.append(DictEntry(tokens, category, prefix))
    if not entries:
        raise ValidationError(f"dictionary {path} contains no entries")
    return EditDictionary(tuple(entries))


def normalize_prompt(raw: str) -> Prompt:
    """Lowercase, replace Unicode punctuation with spaces, split on whitespace."""
    chars = []
    for ch in raw:
        if unicodedata.category(ch).startswith("P"):
            chars.append(" ")
        else:
            chars.append(ch)
    tokens = tuple("".join(chars).casefold().split())
    return Prompt(raw=raw, tokens=tokens)


def _entry_matches_at(tokens: tuple[str, ...], entry: DictEntry, start: int) -> bool:
    n = len(entry.phrase)
    if start + n > len(tokens):
        return False
    for j in range(n - 1):
        if tokens[start + j] != entry.phrase[j]:
            return False
    last = entry.phrase[-1]
    tok = tokens[start + n - 1]
    return tok.startswith(last) if entry.prefix else tok == last


def detect_intent(prompt: Prompt, dictionary: EditDictionary) -> IntentResult:
    """Indicator 1 iff any dictionary phrase occurs in the prompt tokens."""
    matches: list[IntentMatch] = []
    tokens = prompt.tokens
    for entry in dictionary.entries:
        n = len(entry.phrase)
        for start in range(len(tokens) - n + 1):
            if _entry_matches_at(tokens, entry, start):
                matches.append(IntentMatch(
                    tokens=tokens[start:start + n],
                    phrase=entry.display(),
                    category=entry.category,
                    start=start,
                ))
    return IntentResult(indicator=1 if matches else 0, matches=tuple(matches))
