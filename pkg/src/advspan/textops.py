"""Shared word tokenization and sentence splitting.

Every module that slices text (perturbation, answer scoring, ensembling,
readability) goes through these two functions, so token and sentence
boundaries are consistent across the whole toolkit.
"""
from __future__ import annotations

import re
from typing import NamedTuple

# A token is a maximal run of Unicode letters, digits, and apostrophes.
# Underscore is deliberately excluded from \w via the double negative.
_TOKEN_RE = re.compile(r"(?:[^\W_]|['’])+", re.UNICODE)

_TERMINATORS = ".!?"

# Fixed exception list: a terminator ending one of these strings never
# closes a sentence. Matched case-sensitively against the text.
ABBREVIATIONS = frozenset({
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "St.", "Mt.", "No.", "Fig.",
    "Gen.", "Col.", "Sgt.", "Rev.", "Jr.", "Sr.", "vs.", "etc.", "e.g.",
    "i.e.", "cf.", "al.", "U.S.", "U.K.", "U.N.", "a.m.", "p.m.",
})

_MAX_ABBREV_LEN = max(len(a) for a in ABBREVIATIONS)


class Token(NamedTuple):
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    """Split text into word tokens with codepoint intervals."""
    return [Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def _is_abbreviation(text: str, dot_index: int) -> bool:
    """True if the '.' at dot_index ends a listed abbreviation."""
    for abbr in ABBREVIATIONS:
        start = dot_index - len(abbr) + 1
        if start < 0 or text[start:dot_index + 1] != abbr:
            continue
        # The abbreviation must not be the tail of a longer word
        # ("St." matches, "Worst." does not).
        if start == 0 or not text[start - 1].isalnum():
            return True
    return False


def split_sentences(text: str) -> list[tuple[int, int]]:
    """Sentence intervals as (start, end) codepoint pairs.

    A sentence ends at '.', '!' or '?' when followed by whitespace and an
    uppercase letter or digit, except after a listed abbreviation.
    Intervals cover all non-whitespace text and exclude surrounding
    whitespace.
    """
    boundaries = []  # index one past each sentence-ending terminator
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in _TERMINATORS:
            continue
        j = i + 1
        if j >= n or not text[j].isspace():
            continue
        while j < n and text[j].isspace():
            j += 1
        if j >= n:
            continue
        nxt = text[j]
        if not (nxt.isupper() or nxt.isdigit()):
            continue
        if ch == "." and _is_abbreviation(text, i):
            continue
        boundaries.append(i + 1)

    intervals = []
    cursor = 0
    for b in boundaries + [n]:
        chunk = text[cursor:b]
        stripped = chunk.strip()
        if stripped:
            start = cursor + (len(chunk) - len(chunk.lstrip()))
            intervals.append((start, start + len(stripped)))
        cursor = b
    return intervals
