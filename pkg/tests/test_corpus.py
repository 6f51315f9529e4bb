import json

import pytest

from advspan.corpus import (
    AnswerSpan, DatasetParseError, OffsetMap, QA, SpanIntegrityError,
    SpanProtectionError, parse_dataset, remap_answers, serialize_dataset,
)

from conftest import (
    CURIE_ANSWER, CURIE_CONTEXT, CURIE_QUESTION, squad_bytes, squad_doc,
)


class TestParse:
    def test_table1_record(self, curie_dataset):
        assert len(curie_dataset.articles) == 1
        paragraph = curie_dataset.articles[0].paragraphs[0]
        assert len(paragraph.qas) == 1
        qa = paragraph.qas[0]
        assert qa.question == CURIE_QUESTION
        ans = qa.answers[0]
        assert paragraph.context[ans.answer_start:ans.answer_end] == CURIE_ANSWER

    def test_empty_data_array(self):
        d = parse_dataset(b'{"version": "1.1", "data": []}')
        assert d.articles == ()

    def test_off_by_one_span_rejected(self):
        start = CURIE_CONTEXT.index(CURIE_ANSWER) + 1
        raw = squad_bytes([(CURIE_CONTEXT,
                            [("bad-1", CURIE_QUESTION, CURIE_ANSWER, start)])])
        with pytest.raises(SpanIntegrityError) as err:
            parse_dataset(raw)
        assert "bad-1" in str(err.value)

    def test_malformed_json_reports_byte_offset(self):
        with pytest.raises(DatasetParseError) as err:
            parse_dataset(b'{"data": [')
        assert err.value.byte_offset is not None

    def test_missing_data_key(self):
        with pytest.raises(DatasetParseError):
            parse_dataset(b'{"version": "1.1"}')

    def test_answer_without_evidence_dropped_with_count(self):
        doc = squad_doc([
            ("The sky is blue today.", [("ok-1", "What color?", "blue", 11)]),
        ])
        doc["data"][0]["paragraphs"][0]["qas"].append({
            "id": "gone-1", "question": "What?",
            "answers": [{"text": "absent phrase", "answer_start": 0}],
        })
        d = parse_dataset(json.dumps(doc).encode())
        assert d.dropped_without_evidence == 1
        assert [qa.id for _, p in d.paragraphs() for qa in p.qas] == ["ok-1"]

    def test_duplicate_ids_rejected(self):
        raw = squad_bytes([
            ("alpha beta", [("q", "What?", "alpha", 0), ("q", "What?", "beta", 6)]),
        ])
        with pytest.raises(Exception, match="duplicate"):
            parse_dataset(raw)


class TestRoundTrip:
    def test_parse_serialize_identity(self, curie_dataset):
        again = parse_dataset(serialize_dataset(curie_dataset))
        assert again == curie_dataset

    def test_non_ascii_codepoints_preserved(self, curie_dataset):
        raw = serialize_dataset(curie_dataset)
        assert "Skłodowska-Curie".encode("utf-8") in raw

    def test_zero_article_dataset(self):
        d = parse_dataset(b'{"version": "x", "data": []}')
        doc = json.loads(serialize_dataset(d))
        assert doc == {"version": "x", "data": []}

    def test_unknown_fields_round_trip(self):
        doc = squad_doc([("alpha beta", [("q1", "What?", "alpha", 0)])])
        doc["custom_top"] = {"a": 1}
        doc["data"][0]["paragraphs"][0]["qas"][0]["custom_qa"] = "kept"
        raw = json.dumps(doc).encode()
        out = json.loads(serialize_dataset(parse_dataset(raw)))
        assert out["custom_top"] == {"a": 1}
        assert out["data"][0]["paragraphs"][0]["qas"][0]["custom_qa"] == "kept"

    def test_perturbation_meta_round_trip(self, curie_dataset):
        from dataclasses import replace
        from advspan.corpus import PerturbationMeta
        art = curie_dataset.articles[0]
        para = art.paragraphs[0]
        qa = replace(para.qas[0], is_perturbed=True,
                     perturbation_meta=PerturbationMeta("char", "full"))
        d = replace(curie_dataset, articles=(
            replace(art, paragraphs=(replace(para, qas=(qa,)),)),))
        again = parse_dataset(serialize_dataset(d))
        got = again.articles[0].paragraphs[0].qas[0]
        assert got.is_perturbed
        assert got.perturbation_meta == PerturbationMeta("char", "full")


class TestOffsetMap:
    def test_identity_map_keeps_answers(self):
        qas = [QA(id="q", question="?", answers=(AnswerSpan("bc", 1),))]
        out = remap_answers(qas, OffsetMap.identity(4))
        assert out[0].answers[0].answer_start == 1

    def test_insertion_before_answer_shifts_start(self):
        original = "xx answer yy"
        new_text, m = OffsetMap.from_replacements(original, [(0, 2, "12345")])
        assert new_text == "12345 answer yy"
        qas = [QA(id="q", question="?", answers=(AnswerSpan("answer", 3),))]
        out = remap_answers(qas, m, new_text)
        assert out[0].answers[0].answer_start == 6

    def test_answer_inside_rewritten_segment_rejected(self):
        original = "xx answer yy"
        _, m = OffsetMap.from_replacements(original, [(3, 9, "other")])
        qas = [QA(id="q7", question="?", answers=(AnswerSpan("answer", 3),))]
        with pytest.raises(SpanProtectionError, match="q7"):
            remap_answers(qas, m)

    def test_same_length_rewrite_is_not_identity(self):
        _, m = OffsetMap.from_replacements("abcd", [(1, 2, "X")])
        with pytest.raises(SpanProtectionError):
            m.map_span(1, 2)
        assert m.map_span(2, 4) == 2

    def test_composition_matches_sequential_remap(self):
        original = "aa bb cc dd"
        text1, m1 = OffsetMap.from_replacements(original, [(0, 2, "xxxx")])
        text2, m2 = OffsetMap.from_replacements(text1, [(10, 12, "y")])
        composed = m1.compose(m2)
        # "cc" at [6, 8) survives both rewrites.
        assert composed.map_span(6, 8) == m2.map_span(m1.map_span(6, 8), 10)

    def test_composition_rejects_spans_rewritten_later(self):
        original = "aa bb cc"
        text1, m1 = OffsetMap.from_replacements(original, [(0, 2, "x")])
        _, m2 = OffsetMap.from_replacements(text1, [(2, 4, "zz")])
        composed = m1.compose(m2)
        with pytest.raises(SpanProtectionError):
            composed.map_span(3, 5)  # "bb" in original coordinates
