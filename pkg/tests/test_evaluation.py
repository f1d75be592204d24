import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topicsieve.classifier import PredictionSet, save_predictions
from topicsieve.evaluation import (
    DegenerateMarginals,
    DuplicateId,
    EvalReport,
    GoldLabel,
    IdSetMismatch,
    MissingPrediction,
    ParseError,
    baseline,
    cohen_kappa,
    evaluate,
    export_theta_sensitivity,
    import_external,
    load_gold,
    majority_vote,
    render_report,
    report_to_dict,
    save_gold,
    save_report_json,
)


def make_gold(n_pos, n_neg, hazard="flood", split="test", n_main=None, prefix=""):
    if n_main is None:
        n_main = n_pos
    gold = []
    for i in range(n_pos):
        prominence = "main" if i < n_main else "mention"
        gold.append(GoldLabel(f"{prefix}p{i:03d}", 1, prominence, hazard, split))
    for i in range(n_neg):
        gold.append(GoldLabel(f"{prefix}n{i:03d}", 0, "none", hazard, split))
    return gold


def predict(gold, labels_by_id, source="tm"):
    return PredictionSet(source=source, predictions=dict(labels_by_id))


# --------------------------------------------------------------------------
# GoldLabel validation


def test_gold_label_consistency():
    GoldLabel("a", 1, "main", "flood", "train")
    GoldLabel("b", 0, "none", "flood", "test")
    with pytest.raises(ValueError):
        GoldLabel("c", 0, "main", "flood", "train")
    with pytest.raises(ValueError):
        GoldLabel("d", 1, "none", "flood", "train")
    with pytest.raises(ValueError):
        GoldLabel("e", 1, "central", "flood", "train")
    with pytest.raises(ValueError):
        GoldLabel("f", 1, "main", "flood", "dev")
    with pytest.raises(ValueError):
        GoldLabel("g", 2, "main", "flood", "train")


# --------------------------------------------------------------------------
# evaluate


def test_all_positive_rate_035():
    gold = make_gold(35, 65)
    preds = PredictionSet("allpos", {g.doc_id: 1 for g in gold})
    rep = evaluate(preds, gold, "test")
    assert rep.precision == pytest.approx(0.350)
    assert rep.recall == pytest.approx(1.000)
    assert round(rep.f1, 3) == 0.519


def test_perfect_predictions():
    gold = make_gold(10, 10)
    preds = PredictionSet("oracle", {g.doc_id: g.relevant for g in gold})
    rep = evaluate(preds, gold, "test")
    assert (rep.precision, rep.recall, rep.f1) == (1.0, 1.0, 1.0)
    assert (rep.fp, rep.fn) == (0, 0)
    assert rep.tp == 10 and rep.tn == 10


def test_hand_confusion_matrix():
    # tp=3, fp=1, fn=2, tn=4
    gold = make_gold(5, 5)
    labels = {g.doc_id: 0 for g in gold}
    labels.update({"p000": 1, "p001": 1, "p002": 1, "n000": 1})
    rep = evaluate(PredictionSet("x", labels), gold, "test")
    assert (rep.tp, rep.fp, rep.fn, rep.tn) == (3, 1, 2, 4)
    assert rep.precision == pytest.approx(0.75)
    assert rep.recall == pytest.approx(0.6)
    assert rep.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)


def test_missing_prediction_lists_ids():
    gold = make_gold(2, 2)
    preds = PredictionSet("x", {"p000": 1, "n000": 0})
    with pytest.raises(MissingPrediction) as exc:
        evaluate(preds, gold, "test")
    assert exc.value.ids == ("n001", "p001")


def test_split_filtering():
    gold = make_gold(3, 3, split="train") + make_gold(2, 2, split="test", prefix="t")
    preds = PredictionSet("x", {g.doc_id: 1 for g in gold if g.split == "train"})
    rep = evaluate(preds, gold, "train")
    assert rep.n_docs == 6
    with pytest.raises(ValueError):
        evaluate(preds, gold, "dev")


def test_n_main_correct():
    gold = make_gold(4, 2, n_main=2)
    # predict 1 for one main, one mention, one negative
    labels = {g.doc_id: 0 for g in gold}
    labels.update({"p000": 1, "p002": 1, "n000": 1})
    rep = evaluate(PredictionSet("x", labels), gold, "test")
    assert rep.n_main_correct == 1


def test_per_hazard_breakdown():
    gold = make_gold(3, 2, hazard="flood") + make_gold(1, 4, hazard="storm", prefix="s")
    labels = {g.doc_id: g.relevant for g in gold}
    labels["sp000"] = 0  # flip one storm positive
    rep = evaluate(PredictionSet("x", labels), gold, "test")
    assert set(rep.per_hazard) == {"flood", "storm"}
    flood, storm = rep.per_hazard["flood"], rep.per_hazard["storm"]
    assert flood.tp == 3 and flood.recall == 1.0
    assert storm.fn == 1 and storm.tp == 0
    assert flood.n_docs + storm.n_docs == rep.n_docs
    assert (
        flood.tp + storm.tp,
        flood.fp + storm.fp,
        flood.fn + storm.fn,
        flood.tn + storm.tn,
    ) == (rep.tp, rep.fp, rep.fn, rep.tn)
    assert not flood.per_hazard


def brute_prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def test_metric_oracle_random_confusions():
    rng = np.random.default_rng(17)
    for _ in range(300):
        tp, fp, fn, tn = (int(x) for x in rng.integers(0, 12, size=4))
        if tp + fp + fn + tn == 0:
            tn = 1
        gold, labels = [], {}
        counter = 0
        for _i in range(tp):
            gold.append(GoldLabel(f"d{counter}", 1, "main", "h", "test")); labels[f"d{counter}"] = 1; counter += 1
        for _i in range(fp):
            gold.append(GoldLabel(f"d{counter}", 0, "none", "h", "test")); labels[f"d{counter}"] = 1; counter += 1
        for _i in range(fn):
            gold.append(GoldLabel(f"d{counter}", 1, "main", "h", "test")); labels[f"d{counter}"] = 0; counter += 1
        for _i in range(tn):
            gold.append(GoldLabel(f"d{counter}", 0, "none", "h", "test")); labels[f"d{counter}"] = 0; counter += 1
        rep = evaluate(PredictionSet("x", labels), gold, "test")
        assert (rep.tp, rep.fp, rep.fn, rep.tn) == (tp, fp, fn, tn)
        p, r, f = brute_prf(tp, fp, fn)
        assert rep.precision == p and rep.recall == r and rep.f1 == f


# --------------------------------------------------------------------------
# baseline


@pytest.mark.parametrize(
    "p,f1",
    [
        (0.170, 0.291),
        (0.440, 0.611),
        (0.360, 0.529),
        (0.200, 0.333),
        (0.580, 0.734),
        (0.270, 0.425),
        (0.430, 0.601),
    ],
)
def test_baseline_f1_identity(p, f1):
    n = 1000
    n_pos = round(p * n)
    gold = make_gold(n_pos, n - n_pos)
    rep = baseline(gold, "test")
    assert rep.precision == pytest.approx(p, abs=1e-9)
    assert rep.recall == 1.0
    assert abs(rep.f1 - f1) <= 0.0005


def test_baseline_equals_all_ones_evaluate():
    gold = make_gold(7, 13)
    direct = evaluate(
        PredictionSet("baseline", {g.doc_id: 1 for g in gold}), gold, "test"
    )
    via = baseline(gold, "test")
    assert (via.tp, via.fp, via.fn, via.tn) == (direct.tp, direct.fp, direct.fn, direct.tn)
    assert via.f1 == direct.f1


def test_baseline_zero_positives_flagged():
    gold = make_gold(0, 10)
    rep = baseline(gold, "test")
    assert rep.precision == 0.0
    assert rep.f1 == 0.0
    assert "recall" in rep.degenerate and "f1" in rep.degenerate


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 50), st.integers(1, 50))
def test_baseline_identity_property(n_pos, n_neg):
    gold = make_gold(n_pos, n_neg)
    via = baseline(gold, "test")
    direct = evaluate(PredictionSet("z", {g.doc_id: 1 for g in gold}), gold, "test")
    assert via.precision == direct.precision
    assert via.recall == direct.recall
    assert via.f1 == direct.f1


# --------------------------------------------------------------------------
# Cohen's kappa


def test_kappa_identical_vectors():
    a = {"a": 1, "b": 0, "c": 1, "d": 0}
    agreement, kappa = cohen_kappa(a, dict(a))
    assert agreement == 1.0
    assert kappa == pytest.approx(1.0)


def test_kappa_zero_case():
    a = {"w": 1, "x": 1, "y": 0, "z": 0}
    b = {"w": 1, "x": 0, "y": 1, "z": 0}
    agreement, kappa = cohen_kappa(a, b)
    assert agreement == 0.5
    assert kappa == pytest.approx(0.0, abs=1e-12)


def kappa_oracle(a_vec, b_vec):
    n = len(a_vec)
    table = {}
    for x, y in zip(a_vec, b_vec):
        table[(x, y)] = table.get((x, y), 0) + 1
    p_o = sum(v for (x, y), v in table.items() if x == y) / n
    classes = set(a_vec) | set(b_vec)
    p_e = 0.0
    for c in classes:
        pa = sum(1 for x in a_vec if x == c) / n
        pb = sum(1 for y in b_vec if y == c) / n
        p_e += pa * pb
    return p_o, (p_o - p_e) / (1 - p_e)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=100))
def test_kappa_matches_contingency_oracle(pairs):
    a_vec = [x for x, _ in pairs]
    b_vec = [y for _, y in pairs]
    a = {f"d{i}": v for i, v in enumerate(a_vec)}
    b = {f"d{i}": v for i, v in enumerate(b_vec)}
    try:
        agreement, kappa = cohen_kappa(a, b)
    except DegenerateMarginals:
        p_a = sum(a_vec) / len(a_vec)
        p_b = sum(b_vec) / len(b_vec)
        assert p_a in (0.0, 1.0) and p_a == p_b
        return
    ref_agreement, ref_kappa = kappa_oracle(a_vec, b_vec)
    assert agreement == pytest.approx(ref_agreement, abs=1e-12)
    assert kappa == pytest.approx(ref_kappa, abs=1e-12)


def test_kappa_swap_invariant():
    rng = np.random.default_rng(3)
    a_vec = rng.integers(0, 2, size=100)
    b_vec = rng.integers(0, 2, size=100)
    a = {f"d{i}": int(v) for i, v in enumerate(a_vec)}
    b = {f"d{i}": int(v) for i, v in enumerate(b_vec)}
    swapped_a = {k: 1 - v for k, v in a.items()}
    swapped_b = {k: 1 - v for k, v in b.items()}
    assert cohen_kappa(a, b)[1] == pytest.approx(cohen_kappa(swapped_a, swapped_b)[1])


def test_kappa_degenerate_marginals():
    a = {"x": 1, "y": 1}
    with pytest.raises(DegenerateMarginals):
        cohen_kappa(a, dict(a))
    # constant but opposite labelings are fine: p_e = 0
    agreement, kappa = cohen_kappa({"x": 1, "y": 1}, {"x": 0, "y": 0})
    assert agreement == 0.0


def test_kappa_id_mismatch():
    with pytest.raises(IdSetMismatch):
        cohen_kappa({"a": 1}, {"b": 1})


# --------------------------------------------------------------------------
# majority vote


def vote_sets(flips_a, flips_b, flips_c, n_pos=10, n_neg=10):
    gold = make_gold(n_pos, n_neg)
    truth = {g.doc_id: g.relevant for g in gold}

    def flipped(flips, name):
        labels = dict(truth)
        for d in flips:
            labels[d] = 1 - labels[d]
        return PredictionSet(name, labels)

    return gold, (
        flipped(flips_a, "a"),
        flipped(flips_b, "b"),
        flipped(flips_c, "c"),
    )


def test_majority_simple_cases():
    a = PredictionSet("a", {"d": 1})
    b = PredictionSet("b", {"d": 1})
    c = PredictionSet("c", {"d": 0})
    assert majority_vote([a, b, c]).predictions == {"d": 1}
    zero = PredictionSet("z", {"d": 0})
    assert majority_vote([zero, zero, zero]).predictions == {"d": 0}
    assert majority_vote([a, b, c]).source == "majority"


def test_majority_beats_constituents_on_disjoint_errors():
    gold, preds = vote_sets(
        {"p000", "n000", "n001"},
        {"p001", "n002", "n003"},
        {"p002", "n004", "n005"},
    )
    reports = [evaluate(p, gold, "test") for p in preds]
    ensemble = evaluate(majority_vote(list(preds)), gold, "test")
    assert ensemble.f1 == 1.0
    for rep in reports:
        assert ensemble.f1 > rep.f1


def test_majority_permutation_invariant():
    gold, preds = vote_sets({"p000"}, {"n000"}, {"p001", "n002"})
    import itertools

    reference = majority_vote(list(preds)).predictions
    for perm in itertools.permutations(preds):
        assert majority_vote(list(perm)).predictions == reference


def test_majority_idempotent_when_unanimous():
    gold, preds = vote_sets({"p000"}, {"p000"}, {"p000"})
    assert majority_vote(list(preds)).predictions == preds[0].predictions


def test_majority_requires_three_matching_sets():
    a = PredictionSet("a", {"d": 1})
    with pytest.raises(ValueError):
        majority_vote([a, a])
    b = PredictionSet("b", {"e": 1})
    with pytest.raises(IdSetMismatch):
        majority_vote([a, a, b])


# --------------------------------------------------------------------------
# external predictions and gold files


def test_import_external_valid(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("doc_id,label\nd1,1\nd2,0\n")
    preds = import_external(path, "llm")
    assert preds.source == "llm"
    assert preds.predictions == {"d1": 1, "d2": 0}


def test_import_external_bad_label(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("doc_id,label\nd1,1\nd2,2\n")
    with pytest.raises(ParseError) as exc:
        import_external(path, "llm")
    assert exc.value.line_no == 3


def test_import_external_duplicate(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("doc_id,label\nd1,1\nd1,0\n")
    with pytest.raises(DuplicateId):
        import_external(path, "llm")


def test_import_external_header(tmp_path):
    path = tmp_path / "preds.csv"
    path.write_text("id,label\nd1,1\n")
    with pytest.raises(ParseError):
        import_external(path, "llm")


def test_prediction_roundtrip(tmp_path):
    preds = PredictionSet(
        "tm-f1", {"a": 1, "b": 0, "c": 1}, {"a": (0,), "b": (), "c": (1, 2)}
    )
    path = tmp_path / "p.csv"
    save_predictions(preds, path)
    loaded = import_external(path, "tm-f1")
    assert loaded.predictions == dict(preds.predictions)


def test_gold_roundtrip(tmp_path):
    gold = make_gold(3, 2, n_main=1) + make_gold(1, 1, hazard="storm", split="train", prefix="s")
    path = tmp_path / "gold.csv"
    save_gold(gold, path)
    assert tuple(load_gold(path)) == tuple(gold)


def test_gold_parse_errors(tmp_path):
    path = tmp_path / "gold.csv"
    path.write_text("doc_id,relevant,prominence,hazard,split\nd1,1,none,flood,test\n")
    with pytest.raises(ParseError) as exc:
        load_gold(path)
    assert exc.value.line_no == 2
    path.write_text("doc_id,relevant\nd1,1\n")
    with pytest.raises(ParseError):
        load_gold(path)
    path.write_text(
        "doc_id,relevant,prominence,hazard,split\nd1,1,main,flood,test\nd1,0,none,flood,test\n"
    )
    with pytest.raises(DuplicateId):
        load_gold(path)


# --------------------------------------------------------------------------
# rendering and exports


def test_render_rounds_to_three_decimals():
    gold = make_gold(35, 65)
    rep = baseline(gold, "test")
    text = render_report(rep)
    assert "0.519" in text
    assert "0.350" in text
    # stored value keeps full precision
    assert report_to_dict(rep)["f1"] == pytest.approx(2 * 0.35 / 1.35, abs=1e-12)


def test_report_json(tmp_path):
    gold = make_gold(2, 2) + make_gold(1, 1, hazard="storm", prefix="s")
    rep = evaluate(PredictionSet("x", {g.doc_id: g.relevant for g in gold}), gold, "test")
    path = tmp_path / "report.json"
    save_report_json(rep, path)
    import json

    doc = json.loads(path.read_text())
    assert doc["tp"] == 3
    assert set(doc["per_hazard"]) == {"flood", "storm"}


def test_theta_sensitivity_export(tmp_path):
    from topicsieve.topicmodel import LDAConfig, TopicModel

    p_topic = np.array([[0.8, 0.2], [0.3, 0.7], [0.5, 0.5]])
    model = TopicModel(
        kind="lda",
        p_feat=np.array([[0.5, 0.5], [0.5, 0.5]]),
        p_topic=p_topic,
        doc_ids=("d0", "d1", "d2"),
        empty_docs=frozenset(),
        feature_space_checksum="x",
        config=LDAConfig(num_topics=2),
    )
    gold = [
        GoldLabel("d0", 1, "main", "flood", "test"),
        GoldLabel("d1", 0, "none", "flood", "test"),
        GoldLabel("d9", 1, "main", "flood", "test"),
    ]
    path = tmp_path / "theta.csv"
    export_theta_sensitivity(model, 0, gold, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "doc_id,topic_probability,gold_label"
    assert lines[1].startswith("d0,0.8") and lines[1].endswith(",1")
    assert len(lines) == 3  # d9 has no stored row
    with pytest.raises(ValueError):
        export_theta_sensitivity(model, 5, gold, path)
