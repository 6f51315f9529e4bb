"""Visually deceptive character substitutions from Unicode security data.

Parses the intentional-confusables text format (';'-separated hex fields,
'#' comments) into a symmetric lookup table. A copy of the data, pinned to
the 12.1.0 release, is vendored under ``advspan/data`` so nothing is
fetched at runtime.
"""
from __future__ import annotations

from importlib import resources

DEFAULT_DATA = "intentional.txt"


class ConfusablesParseError(Exception):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ConfusableTable:
    """Bidirectional codepoint -> alternatives map, immutable after parse."""

    def __init__(self, pairs: list[tuple[int, int]]):
        table: dict[int, list[int]] = {}
        for a, b in pairs:
            if a == b:
                continue
            for src, dst in ((a, b), (b, a)):
                alts = table.setdefault(src, [])
                if dst not in alts:
                    alts.append(dst)
        self._table = {cp: tuple(alts) for cp, alts in table.items()}

    def alternatives(self, codepoint: int) -> tuple[int, ...]:
        """Alternatives in file order; empty when the codepoint is unknown."""
        return self._table.get(codepoint, ())

    def __contains__(self, codepoint: int) -> bool:
        return codepoint in self._table

    def __len__(self) -> int:
        return len(self._table)

    def codepoints(self) -> tuple[int, ...]:
        return tuple(self._table)


def parse_confusables(raw: bytes | str) -> ConfusableTable:
    """Parse intentional.txt-format data into a ConfusableTable.

    Each data line pairs its first codepoint field with every following
    field. Fields holding multi-codepoint sequences are skipped: the
    homograph attack substitutes one codepoint for one codepoint so that
    offsets never move.
    """
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    pairs: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        fields = [f.strip() for f in body.split(";")]
        if len(fields) < 2:
            raise ConfusablesParseError("expected at least two ';' fields", lineno)
        codepoints: list[int | None] = []
        for raw_field in fields:
            if not raw_field:
                raise ConfusablesParseError("empty codepoint field", lineno)
            parts = raw_field.split()
            if len(parts) > 1:
                codepoints.append(None)  # multi-codepoint sequence: excluded
                continue
            try:
                codepoints.append(int(parts[0], 16))
            except ValueError:
                raise ConfusablesParseError(
                    f"malformed hex field {parts[0]!r}", lineno) from None
        source = codepoints[0]
        if source is None:
            continue
        for alt in codepoints[1:]:
            if alt is not None:
                pairs.append((source, alt))
    return ConfusableTable(pairs)


def load_default_table() -> ConfusableTable:
    """Table built from the vendored data file."""
    data = resources.files("advspan.data").joinpath(DEFAULT_DATA).read_bytes()
    return parse_confusables(data)


def detect_homoglyphs(
    text: str,
    table: ConfusableTable,
    reference_alphabet: frozenset[int] | set[int],
) -> list[tuple[int, int]]:
    """Positions of codepoints outside the reference alphabet that are
    confusable alternatives of some in-alphabet codepoint.

    The inverse of the character attack: running it on attacked text with
    the attack's own table recovers exactly the substituted positions.
    """
    found = []
    for pos, ch in enumerate(text):
        cp = ord(ch)
        if cp in reference_alphabet:
            continue
        if any(alt in reference_alphabet for alt in table.alternatives(cp)):
            found.append((pos, cp))
    return found
