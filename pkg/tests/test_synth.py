import pytest

from topicsieve.corpus import (
    FilterRules,
    Gazetteer,
    KeywordList,
    apply_filters,
    load_jsonl,
)
from topicsieve.evaluation import load_gold
from topicsieve.features import tokenize
from topicsieve.synth import SynthBundle, SynthConfig, generate, write_bundle


@pytest.fixture(scope="module")
def small_bundle():
    return generate(SynthConfig(num_docs=200, seed=42))


def test_exact_relevant_fraction(small_bundle):
    n_rel = sum(g.relevant for g in small_bundle.gold)
    assert n_rel == 60


def test_deterministic():
    a = generate(SynthConfig(num_docs=50, seed=7))
    b = generate(SynthConfig(num_docs=50, seed=7))
    assert [d.text for d in a.documents] == [d.text for d in b.documents]
    assert a.gold == b.gold
    c = generate(SynthConfig(num_docs=50, seed=8))
    assert [d.text for d in c.documents] != [d.text for d in a.documents]


def test_keywords_are_corpus_words(small_bundle):
    assert len(small_bundle.keywords.keywords) == 4
    joined = " ".join(d.text for d in small_bundle.documents)
    for kw in small_bundle.keywords.keywords:
        assert kw in joined.split()


def test_relevant_docs_always_contain_a_keyword(small_bundle):
    kws = small_bundle.keywords.keywords
    gold = {g.doc_id: g for g in small_bundle.gold}
    for doc in small_bundle.documents:
        if gold[doc.id].relevant:
            assert kws & set(doc.text.split()), doc.id


def test_prominence_tracks_hazard_weight(small_bundle):
    gold = {g.doc_id: g for g in small_bundle.gold}
    for doc_id, w in small_bundle.hazard_weights.items():
        g = gold[doc_id]
        if w == 0.0:
            assert g.prominence == "none"
        elif w >= 0.75:
            assert g.prominence == "main"
        else:
            assert g.prominence == "mention"


def test_split_is_stratified(small_bundle):
    by_split = {"train": [], "test": []}
    for g in small_bundle.gold:
        by_split[g.split].append(g.relevant)
    assert len(by_split["train"]) == 140
    assert sum(by_split["train"]) == 42
    assert sum(by_split["test"]) == 18


def test_corpus_passes_ingest_filters(small_bundle):
    rules = FilterRules(location_gazetteer=Gazetteer.default())
    gold = {g.doc_id: g for g in small_bundle.gold}
    keep = 0
    for doc in small_bundle.documents:
        verdict = apply_filters(doc, tokenize(doc.text), small_bundle.keywords, rules)
        keep += verdict.keep
        if not verdict.keep:
            # only irrelevant docs without a stray keyword may fall out
            assert gold[doc.id].relevant == 0
    assert keep >= 180


def test_doc_lengths_inside_bounds(small_bundle):
    for doc in small_bundle.documents:
        n = len(tokenize(doc.text))
        assert 30 <= n <= 1700


def test_topic_vocabularies_disjoint(small_bundle):
    seen = set()
    for vocab in small_bundle.topic_vocab:
        as_set = set(vocab)
        assert not (as_set & seen)
        seen |= as_set


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(num_docs=5)
    with pytest.raises(ValueError):
        SynthConfig(relevant_fraction=0.0)
    with pytest.raises(ValueError):
        SynthConfig(num_topics=1)
    with pytest.raises(ValueError):
        SynthConfig(num_keywords=40, vocab_per_topic=40)
    with pytest.raises(ValueError):
        SynthConfig(doc_len_min=10)
    with pytest.raises(ValueError):
        SynthConfig(hazard_weight_low=0.9, hazard_weight_high=0.6)


def test_write_bundle_roundtrip(tmp_path, small_bundle):
    paths = write_bundle(small_bundle, tmp_path)
    docs = load_jsonl(paths["corpus"])
    assert [d.id for d in docs] == [d.id for d in small_bundle.documents]
    assert docs[0].text == small_bundle.documents[0].text
    gold = load_gold(paths["gold"])
    assert tuple(gold) == small_bundle.gold
    kws = KeywordList.from_json(paths["keywords"])
    assert kws.keywords == small_bundle.keywords.keywords
    assert kws.hazard == small_bundle.keywords.hazard
