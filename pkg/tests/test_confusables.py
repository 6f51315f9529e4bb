import pytest

from advspan.confusables import (
    ConfusablesParseError, detect_homoglyphs, load_default_table,
    parse_confusables,
)

ASCII = frozenset(range(128))


class TestParse:
    def test_exclamation_pair_from_shipped_data(self, confusable_table):
        # First data line of the shipped file: 0021 ; 01C3.
        assert 0x01C3 in confusable_table.alternatives(0x21)
        assert 0x21 in confusable_table.alternatives(0x01C3)

    def test_empty_and_comment_only_file(self):
        table = parse_confusables(b"# nothing here\n\n# more comments\n")
        assert len(table) == 0

    def test_duplicate_pair_deduplicated(self):
        table = parse_confusables(b"0061 ; 0430\n0061 ; 0430\n")
        assert table.alternatives(0x61) == (0x0430,)

    def test_multi_field_line_pairs_with_first(self):
        table = parse_confusables(b"0041 ; 0391 ; 0410\n")
        assert table.alternatives(0x41) == (0x0391, 0x0410)
        assert table.alternatives(0x0391) == (0x41,)

    def test_multi_codepoint_sequence_excluded(self):
        table = parse_confusables(b"0077 ; 0475 0475\n0061 ; 0430\n")
        assert table.alternatives(0x77) == ()
        assert table.alternatives(0x61) == (0x0430,)

    def test_malformed_hex_reports_line_number(self):
        with pytest.raises(ConfusablesParseError) as err:
            parse_confusables(b"0061 ; 0430\n0062 ; zz\n")
        assert err.value.line_number == 2

    def test_self_pair_ignored(self):
        table = parse_confusables(b"0061 ; 0061\n")
        assert table.alternatives(0x61) == ()


class TestSymmetry:
    def test_every_pair_queryable_both_ways(self, confusable_table):
        for cp in confusable_table.codepoints():
            for alt in confusable_table.alternatives(cp):
                assert cp in confusable_table.alternatives(alt), (
                    f"U+{cp:04X} -> U+{alt:04X} not symmetric")

    def test_no_codepoint_maps_to_itself(self, confusable_table):
        for cp in confusable_table.codepoints():
            assert cp not in confusable_table.alternatives(cp)

    def test_ascii_letters_have_nonascii_alternatives(self, confusable_table):
        # The homograph attack needs deceptive (non-ASCII) substitutes for
        # common letters.
        for ch in "aceopsxy":
            alts = confusable_table.alternatives(ord(ch))
            assert alts, f"no alternatives for {ch!r}"
            assert all(alt > 127 for alt in alts)


class TestDetect:
    def test_clean_ascii_text_empty(self, confusable_table):
        assert detect_homoglyphs("a plain sentence.", confusable_table, ASCII) == []

    def test_substituted_positions_found(self, confusable_table):
        text = "cаt"  # Cyrillic a inside an ASCII word
        assert detect_homoglyphs(text, confusable_table, ASCII) == [(1, 0x0430)]

    def test_non_confusable_emoji_ignored(self, confusable_table):
        assert detect_homoglyphs("ok \U0001F600 fine", confusable_table, ASCII) == []

    def test_loader_is_cached_free_fresh_parse(self):
        assert len(load_default_table()) > 0
