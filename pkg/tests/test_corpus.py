import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from topicsieve.corpus import (
    FilterReason,
    FilterRules,
    FilterVerdict,
    Gazetteer,
    KeywordList,
    MissingGazetteer,
    RawDocument,
    apply_filters,
    clean_and_split,
    intruder_only,
    load_jsonl,
    nonalpha_ratio,
    save_jsonl,
    split_concatenated,
    strip_markup,
)

FLOOD_KW = KeywordList("flood", frozenset({"flut"}), frozenset({"flutlicht"}))
DROUGHT_KW = KeywordList("drought", frozenset({"dürre"}), frozenset({"dürrenmatt"}))

GAZ = Gazetteer(
    countries=frozenset({"frankreich", "spanien", "deutschland"}),
    nationalities=frozenset({"französisch", "spanisch"}),
    cities=frozenset({"berlin", "hamburg"}),
)
RULES = FilterRules(location_gazetteer=GAZ)


class TestStripMarkup:
    def test_bold_tags(self):
        assert strip_markup("<b>Flut</b> in Ahrtal") == "Flut in Ahrtal"

    def test_no_markup_identity(self):
        assert strip_markup("no markup here") == "no markup here"

    def test_shortest_match(self):
        assert strip_markup("a<x>b<y>c") == "abc"

    @given(st.text())
    def test_idempotent(self, text):
        once = strip_markup(text)
        assert strip_markup(once) == once

    @given(st.text())
    def test_no_complete_tag_survives(self, text):
        import re

        assert re.search(r"<[^<>]*>", strip_markup(text)) is None


class TestSplitConcatenated:
    def test_two_wires(self):
        out = split_concatenated("Storm hits coast. (dpa) Markets rose. (afp)")
        assert out == ["Storm hits coast. (dpa)", " Markets rose. (afp)"]

    def test_no_marker(self):
        assert split_concatenated("No agency anywhere.") == ["No agency anywhere."]

    def test_bare_marker(self):
        assert split_concatenated("(dpa)") == ["(dpa)"]

    def test_trailing_text_becomes_segment(self):
        out = split_concatenated("One. (dpa) tail without marker")
        assert out == ["One. (dpa)", " tail without marker"]

    def test_unparenthesized_marker_ignored(self):
        assert split_concatenated("the dpa reported") == ["the dpa reported"]

    @given(st.text(), st.sets(st.sampled_from(["dpa", "afp", "rtr"]), min_size=1))
    def test_reconcatenation_identity(self, text, markers):
        assert "".join(split_concatenated(text, markers)) == text


class TestIntruderOnly:
    def test_floodlight_only(self):
        assert intruder_only(["flutlicht", "spiel"], FLOOD_KW) is True

    def test_real_keyword_wins(self):
        assert intruder_only(["flut", "flutlicht"], FLOOD_KW) is False

    def test_no_intruder_present(self):
        assert intruder_only(["spiel"], FLOOD_KW) is False

    def test_compound_keyword_counts(self):
        # a compound containing the keyword is a valid match, so the
        # intruder no longer stands alone
        assert intruder_only(["flutlicht", "flutkatastrophe"], FLOOD_KW) is False

    def test_playwright_name(self):
        assert intruder_only(["dürrenmatt", "theater"], DROUGHT_KW) is True

    @given(st.lists(st.sampled_from(["flut", "hochwasser", "spiel", "stadt"])))
    def test_never_fires_without_intruder_token(self, tokens):
        assert intruder_only(tokens, FLOOD_KW) is False


def _doc(text, **kw):
    defaults = dict(id="d1", outlet="A", date="2021-07-15", ressort=None, hazard="flood")
    defaults.update(kw)
    return RawDocument(text=text, **defaults)


def _tokens(n, extra=()):
    base = ["flut", "frankreich"] + list(extra)
    filler = [f"wort{i}" for i in range(max(0, n - len(base)))]
    return (base + filler)[:n]


class TestApplyFilters:
    def test_all_rules_pass(self):
        doc = _doc("Die Flut in Frankreich " + "wort " * 500)
        verdict = apply_filters(doc, _tokens(500), FLOOD_KW, RULES)
        assert verdict == FilterVerdict(keep=True, reasons=())

    def test_too_short(self):
        doc = _doc("Die Flut in Frankreich " + "wort " * 16)
        verdict = apply_filters(doc, _tokens(20), FLOOD_KW, RULES)
        assert verdict.keep is False
        assert verdict.reasons == (FilterReason.TOO_SHORT,)

    def test_too_long(self):
        doc = _doc("Die Flut in Frankreich " + "wort " * 1800)
        verdict = apply_filters(doc, _tokens(1801), FLOOD_KW, RULES)
        assert FilterReason.TOO_LONG in verdict.reasons

    def test_intruder_only_reason(self):
        tokens = ["dürrenmatt", "theater", "frankreich"] + ["wort"] * 40
        doc = _doc(" ".join(tokens))
        verdict = apply_filters(doc, tokens, DROUGHT_KW, RULES)
        assert verdict.keep is False
        assert verdict.reasons == (FilterReason.INTRUDER_ONLY,)

    def test_no_keyword(self):
        tokens = ["regen", "frankreich"] + ["wort"] * 40
        doc = _doc(" ".join(tokens))
        verdict = apply_filters(doc, tokens, FLOOD_KW, RULES)
        assert verdict.reasons == (FilterReason.NO_KEYWORD,)

    def test_forbidden_ressort(self):
        doc = _doc("Die Flut in Frankreich " + "wort " * 100, ressort="Lokales")
        verdict = apply_filters(doc, _tokens(100), FLOOD_KW, RULES)
        assert verdict.reasons == (FilterReason.FORBIDDEN_RESSORT,)

    def test_nonalpha_ratio(self):
        # 15 non-alpha over 109 non-space chars = 0.138 >= 0.11
        doc = _doc("Flut Frankreich 123456 +++ 99% $$$ " + "wort " * 20)
        verdict = apply_filters(doc, _tokens(40), FLOOD_KW, RULES)
        assert verdict.reasons == (FilterReason.NON_ALPHA_RATIO,)

    def test_no_location(self):
        tokens = ["flut"] + ["wort"] * 40
        doc = _doc(" ".join(tokens))
        verdict = apply_filters(doc, tokens, FLOOD_KW, RULES)
        assert verdict.reasons == (FilterReason.NO_LOCATION,)

    def test_city_dateline(self):
        doc = _doc("Berlin. Die Flut in Frankreich " + "wort " * 100)
        verdict = apply_filters(doc, _tokens(100), FLOOD_KW, RULES)
        assert verdict.reasons == (FilterReason.CITY_FIRST_TOKEN,)

    def test_city_mention_elsewhere_is_fine(self):
        doc = _doc("Die Flut traf Berlin und Frankreich " + "wort " * 100)
        verdict = apply_filters(doc, _tokens(100), FLOOD_KW, RULES)
        assert verdict.keep is True

    def test_nationality_prefix_counts_as_location(self):
        tokens = ["flut", "französischen"] + ["wort"] * 40
        doc = _doc(" ".join(tokens))
        verdict = apply_filters(doc, tokens, FLOOD_KW, RULES)
        assert FilterReason.NO_LOCATION not in verdict.reasons

    def test_missing_gazetteer_raises(self):
        rules = FilterRules(location_gazetteer=Gazetteer())
        with pytest.raises(MissingGazetteer):
            apply_filters(_doc("Flut " * 50), _tokens(50), FLOOD_KW, rules)

    def test_location_not_required_allows_empty_gazetteer(self):
        rules = FilterRules(require_location=False, location_gazetteer=Gazetteer())
        verdict = apply_filters(
            _doc("Die Flut kam " + "wort " * 100),
            ["flut"] + ["wort"] * 100,
            FLOOD_KW,
            rules,
        )
        assert verdict.keep is True

    def test_reasons_accumulate(self):
        tokens = ["regen"] * 10
        doc = _doc("regen " * 10)
        verdict = apply_filters(doc, tokens, FLOOD_KW, RULES)
        assert FilterReason.NO_KEYWORD in verdict.reasons
        assert FilterReason.TOO_SHORT in verdict.reasons
        assert FilterReason.NO_LOCATION in verdict.reasons


class TestNonalphaRatio:
    def test_whitespace_neutral(self):
        assert nonalpha_ratio("ab cd") == 0.0

    def test_all_digits(self):
        assert nonalpha_ratio("1234") == 1.0

    def test_mixed(self):
        # 8 letters, 2 digits over 10 non-space chars
        assert nonalpha_ratio("abcd efgh 12") == pytest.approx(0.2)


class TestKeywordList:
    def test_lowercased(self):
        kw = KeywordList("flood", frozenset({"Flut"}), frozenset({"FLUTLICHT"}))
        assert kw.keywords == frozenset({"flut"})
        assert kw.intruders == frozenset({"flutlicht"})

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            KeywordList("x", frozenset({"flut"}), frozenset({"Flut"}))

    def test_empty_keywords_rejected(self):
        with pytest.raises(ValueError):
            KeywordList("x", frozenset())


class TestIngest:
    def test_roundtrip_and_sorting(self, tmp_path):
        docs = [
            _doc("Zweiter Text hier.", id="b2"),
            _doc("Erster Text hier.", id="a1"),
        ]
        path = tmp_path / "in.jsonl"
        save_jsonl(docs, path)
        loaded = load_jsonl(path)
        assert [d.id for d in loaded] == ["b2", "a1"]
        cleaned = clean_and_split(loaded, RULES)
        assert [d.id for d in cleaned] == ["a1", "b2"]

    def test_exact_duplicates_dropped(self):
        a = _doc("Gleicher Text.", id="a")
        b = _doc("Gleicher Text.", id="b")  # identical everything but id
        cleaned = clean_and_split([a, b], RULES)
        assert [d.id for d in cleaned] == ["a"]

    def test_same_text_different_outlet_kept(self):
        a = _doc("Gleicher Text.", id="a", outlet="X")
        b = _doc("Gleicher Text.", id="b", outlet="Y")
        assert len(clean_and_split([a, b], RULES)) == 2

    def test_markup_stripped_and_wires_split(self):
        doc = _doc("<b>Eins.</b> (dpa) Zwei. (afp)", id="d")
        cleaned = clean_and_split([doc], RULES)
        assert [d.id for d in cleaned] == ["d.s0", "d.s1"]
        assert cleaned[0].text == "Eins. (dpa)"
        assert cleaned[1].text == " Zwei. (afp)"

    def test_duplicate_ids_rejected(self, tmp_path):
        path = tmp_path / "in.jsonl"
        rows = [
            {"id": "x", "text": "eins"},
            {"id": "x", "text": "zwei"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        with pytest.raises(ValueError, match="duplicate"):
            load_jsonl(path)

    def test_bad_record_reports_line(self, tmp_path):
        path = tmp_path / "in.jsonl"
        path.write_text('{"id": "x"}\n', encoding="utf-8")
        with pytest.raises(ValueError, match="1"):
            load_jsonl(path)
