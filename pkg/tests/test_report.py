from advspan.analysis.report import (
    answer_length_ratio, confidence_split, error_heatmap, report_tables,
    svg_bars, svg_heatmap,
)
from advspan.eval import EvalRecord


def record(qa_id="q", answer="x", em=1, confidence=0.9, amount="none",
           ptype="char"):
    return EvalRecord(
        qa_id=qa_id, model_answer=answer, gold_answers=("x",), em=em,
        f1=float(em), confidence=confidence, perturbation_type=ptype,
        perturbation_amount=amount, training_amount=amount)


class TestErrorHeatmap:
    def test_all_correct_run_is_zeros(self):
        table = error_heatmap([record(em=1) for _ in range(5)])
        assert all(v == 0 for row in table.rows for v in row[1:])

    def test_cells_partition_total_errors(self):
        records = [
            record(qa_id=f"a{i}", em=0, amount="none", ptype="char")
            for i in range(3)
        ] + [
            record(qa_id=f"b{i}", em=0, amount="full", ptype="word")
            for i in range(2)
        ] + [record(qa_id="ok", em=1)]
        table = error_heatmap(records)
        total = sum(v for row in table.rows for v in row[1:])
        assert total == 5
        by_amount = {row[0]: row for row in table.rows}
        assert by_amount["none"][1] == 3  # char column
        assert by_amount["full"][2] == 2  # word column

    def test_empty_records_header_only_zeros(self):
        table = error_heatmap([])
        assert table.columns[0] == "training_amount"
        assert all(v == 0 for row in table.rows for v in row[1:])


class TestConfidenceSplit:
    def test_threshold_partitions_errors(self):
        records = [record(qa_id="a", em=0, confidence=0.9),
                   record(qa_id="b", em=0, confidence=0.2),
                   record(qa_id="c", em=0, confidence=0.5)]
        table = confidence_split(records, threshold=0.5)
        assert table.rows[0][2] == 2  # >= threshold
        assert table.rows[0][3] == 1


class TestAnswerLengthRatio:
    def test_errors_beyond_length_three(self):
        records = []
        for i, n_tokens in enumerate([1, 2, 3, 4, 5]):
            answer = " ".join(["w"] * n_tokens)
            records.append(record(qa_id=f"q{i}", answer=answer,
                                  em=int(n_tokens <= 3)))
        table = answer_length_ratio(records)
        by_length = {row[0]: row for row in table.rows}
        assert by_length[2][1] == 1 and by_length[2][2] == 0
        assert by_length[4][1] == 0 and by_length[4][2] == 1
        assert by_length[4][3] == 0.0


class TestBundleAndSvg:
    def test_tables_without_features(self):
        tables = report_tables([record()])
        assert set(tables) == {"error_heatmap", "confidence_split",
                               "answer_length_ratio"}

    def test_tables_with_features(self, curie_dataset):
        from advspan.analysis import build_features
        from advspan.eval import evaluate_dataset
        from advspan.model_client import MockModelConfig, mock_predictor
        records = evaluate_dataset(
            curie_dataset,
            mock_predictor(MockModelConfig(rules=(("Nobel", "Nobel Prize"),))))
        features = build_features(records, curie_dataset)
        tables = report_tables(records, features)
        assert "readability_medians" in tables
        assert "confidence_joint" in tables
        medians = dict((row[0], row[1]) for row in
                       tables["readability_medians"].rows)
        assert medians["correct"] is not None
        assert medians["error"] is None  # no errors in this run

    def test_csv_and_json_shapes(self):
        table = error_heatmap([record(em=0)])
        lines = table.to_csv().splitlines()
        assert lines[0].split(",")[0] == "training_amount"
        import json
        doc = json.loads(table.to_json())
        assert doc["columns"][0] == "training_amount"

    def test_svg_renderings_are_deterministic(self):
        table = error_heatmap([record(em=0), record(qa_id="b", em=0)])
        assert svg_heatmap(table, "t") == svg_heatmap(table, "t")
        ratio = answer_length_ratio([record(em=0)])
        svg = svg_bars(ratio, "r", value_col=2)
        assert svg.startswith("<svg ") and svg.rstrip().endswith("</svg>")
