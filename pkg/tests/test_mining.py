import json

import pytest

from figcap.mining import (
    MinedObject,
    NotRoman,
    SchemaError,
    article_parsability,
    corpus_report,
    int_to_roman,
    parse_label_numbers,
    parse_pdffigures2,
    roman_to_int,
    sequence_parsable,
)


class TestRoman:
    @pytest.mark.parametrize("s,v", [("IV", 4), ("XIX", 19), ("I", 1), ("MCMXCIV", 1994)])
    def test_valid(self, s, v):
        assert roman_to_int(s) == v

    @pytest.mark.parametrize("s", ["IC", "XIIII", "", "VX", "IIV", "ABC", "iv"])
    def test_strict_rejects(self, s):
        with pytest.raises(NotRoman):
            roman_to_int(s)

    def test_roundtrip_1_to_100(self):
        for n in range(1, 101):
            assert roman_to_int(int_to_roman(n)) == n


class TestSequence:
    def test_complete(self):
        assert sequence_parsable([1, 2, 3])

    def test_gap(self):
        assert not sequence_parsable([1, 3])

    def test_duplicate(self):
        assert not sequence_parsable([1, 2, 2, 3])

    def test_empty(self):
        assert not sequence_parsable([])

    def test_unsorted_ok(self):
        assert sequence_parsable([3, 1, 2])


def obj(kind, label):
    whole, roman = parse_label_numbers(label)
    return MinedObject(kind=kind, label_raw=label, number_whole=whole, number_roman=roman)


class TestArticleParsability:
    def test_mixed_schemes_across_kinds(self):
        objs = [obj("figure", "1"), obj("figure", "2"), obj("figure", "3"),
                obj("table", "I"), obj("table", "II")]
        v = article_parsability("a", objs)
        assert v.figures_parsable and v.figure_scheme == "whole"
        assert v.tables_parsable and v.table_scheme == "roman"

    def test_subfigure_suffix_breaks_scheme(self):
        objs = [obj("figure", "1"), obj("figure", "2"), obj("figure", "4a")]
        v = article_parsability("a", objs)
        assert not v.figures_parsable and v.figure_scheme == "none"

    def test_no_objects(self):
        v = article_parsability("a", [])
        assert not v.figures_parsable and v.figure_scheme == "none"

    def test_permutation_invariant(self):
        objs = [obj("figure", s) for s in ("2", "1", "3")]
        a = article_parsability("a", objs)
        b = article_parsability("a", list(reversed(objs)))
        assert a == b

    def test_scheme_never_mixed_within_kind(self):
        # 1, II would pass only by mixing schemes; must fail
        objs = [obj("figure", "1"), obj("figure", "II")]
        assert not article_parsability("a", objs).figures_parsable

    def test_roman_only_figures(self):
        objs = [obj("figure", "I"), obj("figure", "II"), obj("figure", "III")]
        v = article_parsability("a", objs)
        assert v.figures_parsable and v.figure_scheme == "roman"


class TestCorpusReport:
    def verdict(self, i, fig=False, tab=False):
        return article_parsability(
            f"a{i}",
            ([obj("figure", "1")] if fig else [obj("figure", "1"), obj("figure", "3")])
            + ([obj("table", "I")] if tab else [obj("table", "I"), obj("table", "III")]),
        )

    def test_single_bin_ratio(self):
        verdicts = [self.verdict(i, fig=i < 3) for i in range(10)]
        years = {f"a{i}": 1955 for i in range(10)}
        rows = corpus_report(verdicts, years)
        assert len(rows) == 1
        assert rows[0]["decade"] == "1950s"
        assert rows[0]["pct_figures_parsable"] == pytest.approx(30.0)

    def test_empty_bins_omitted(self):
        verdicts = [self.verdict(0)]
        rows = corpus_report(verdicts, {"a0": 1923})
        assert [r["decade"] for r in rows] == ["1920s"]

    def test_unknown_year_bin(self):
        verdicts = [self.verdict(0)]
        rows = corpus_report(verdicts, {"a0": None})
        assert rows[0]["decade"] == "unknown"

    def test_per_tool_split(self):
        verdicts = [self.verdict(i) for i in range(4)]
        years = {f"a{i}": 1960 for i in range(4)}
        tools = {"a0": "minerA", "a1": "minerA", "a2": "minerB", "a3": "minerB"}
        rows = corpus_report(verdicts, years, tools)
        assert sorted(r["tool"] for r in rows) == ["minerA", "minerB"]


class TestPdffigures2:
    def test_point_to_pixel_scale(self):
        doc = json.dumps([{
            "figType": "Figure", "name": "3", "page": 2,
            "regionBoundary": {"x1": 72, "y1": 72, "x2": 144, "y2": 144},
        }])
        objs = parse_pdffigures2(doc, dpi_effective=300)
        assert objs[0].figure_box.as_list() == [300.0, 300.0, 600.0, 600.0]
        assert objs[0].number_whole == 3
        assert objs[0].page_index == 2

    def test_table_roman(self):
        doc = json.dumps([{"figType": "Table", "name": "IV"}])
        o = parse_pdffigures2(doc)[0]
        assert o.kind == "table" and o.number_roman == 4

    def test_plate_counts_as_figure(self):
        doc = json.dumps([{"figType": "Plate", "name": "2"}])
        assert parse_pdffigures2(doc)[0].kind == "figure"

    def test_empty_list(self):
        assert parse_pdffigures2("[]") == []

    def test_schema_errors(self):
        with pytest.raises(SchemaError):
            parse_pdffigures2("not json")
        with pytest.raises(SchemaError):
            parse_pdffigures2(json.dumps([{"regionBoundary": {"x1": 1}}]))
