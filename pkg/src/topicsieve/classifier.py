"""Keyword-guided topic partitioning and the binary relevance classifier.

A fitted topic model becomes a classifier in two steps. First the topics
are split into relevant and irrelevant sets by where the hazard keywords
sit: either a keyword gets probability above gamma in the topic
(keyword proximity), or a keyword appears among the topic's k most
probable features (top terms). Second, a document is labeled relevant
iff at least one relevant topic reaches proportion theta in it.

Comparisons are deliberately asymmetric: gamma is strict (>), theta is
non-strict (>=). Every positive prediction is traceable to a topic and
that topic to the keyword that selected it.

The sweep fits one model per feature/topic-count combination on the full
deduplicated corpus and scores every (rule, theta) cell on the training
labels only; select_variants then picks the three named configurations
(best F1, balanced, precision-leaning).
"""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .corpus import KeywordList
from .features import (
    DocTermMatrix,
    EmptyFeatureSpace,
    FeatureSpace,
    TokenizedDocument,
    build_feature_space,
    vectorize,
)
from .lda import fit_lda
from .nmf import fit_nmf
from .topicmodel import (
    DegenerateCorpus,
    FeatureSpaceMismatch,
    LDAConfig,
    NMFConfig,
    TopicModel,
    infer_matrix,
)

log = logging.getLogger(__name__)

METHODS = ("keyword_proximity", "top_terms")

DEFAULT_NUM_TOPICS = (50, 100, 300, 500)
DEFAULT_MIN_DOC_FREQ = (50, 100, 500, 1000, 5000, 10000)
DEFAULT_POS_SETS = (
    frozenset({"noun", "verb", "adj"}),
    frozenset({"noun", "verb", "propn"}),
    frozenset({"noun", "propn"}),
    frozenset({"noun"}),
)
DEFAULT_THETA_GRID = tuple(round(0.004 + 0.002 * i, 3) for i in range(99))
DEFAULT_GAMMA_GRID = tuple(round(0.018 * i, 3) for i in range(1, 12))
DEFAULT_K_GRID = (1, 2, 3, 4, 5)

DEFAULT_RECALL_FLOOR = 0.05


class NoKeywordsInFeatureSpace(ValueError):
    """The feature space marks no keyword indices; no partition possible."""


class EmptyGrid(ValueError):
    """The sweep grid has no cells (an axis is empty or nothing was feasible)."""


class NoFeasibleConfig(ValueError):
    """No sweep cell satisfies the selection constraint."""


@dataclass(frozen=True)
class PartitionRule:
    method: str
    gamma: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "keyword_proximity":
            if self.gamma is None or not (0 < self.gamma < 1):
                raise ValueError("keyword_proximity needs 0 < gamma < 1")
        else:
            if self.k is None or self.k < 1:
                raise ValueError("top_terms needs k >= 1")

    def describe(self) -> str:
        if self.method == "keyword_proximity":
            return f"keyword_proximity(gamma={self.gamma})"
        return f"top_terms(k={self.k})"


@dataclass(frozen=True)
class ClassifierConfig:
    theta: float
    rule: PartitionRule
    model_ref: str = ""

    def __post_init__(self) -> None:
        if not (0 <= self.theta <= 1):
            raise ValueError("theta must be in [0, 1]")


@dataclass(frozen=True)
class Evidence:
    """What selected a topic: the keyword and its probability (and rank)."""

    keyword: str
    probability: float
    rank: Optional[int] = None


@dataclass(frozen=True)
class TopicPartition:
    relevant_topics: frozenset[int]
    evidence: Mapping[int, Evidence] = field(default_factory=dict)

    def __post_init__(self) -> None:
        assert set(self.evidence) == set(self.relevant_topics)


@dataclass(frozen=True)
class PredictionSet:
    source: str
    predictions: Mapping[str, int]
    explanations: Optional[Mapping[str, tuple[int, ...]]] = None

    def __post_init__(self) -> None:
        assert all(v in (0, 1) for v in self.predictions.values())

    def labels(self, doc_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.predictions[d] for d in doc_ids])


def partition_topics(
    model: TopicModel, fs: FeatureSpace, rule: PartitionRule
) -> TopicPartition:
    """Split topics into relevant/irrelevant around the keywords.

    keyword_proximity selects a topic iff some keyword's probability in
    it exceeds gamma (strict). top_terms selects a topic iff a keyword
    is among its k most probable features, ranked by probability with
    ties broken by feature index.
    """
    if fs.checksum() != model.feature_space_checksum:
        raise FeatureSpaceMismatch("feature space does not match the model")
    kw_indices = sorted(fs.keyword_indices)
    if not kw_indices:
        raise NoKeywordsInFeatureSpace("no keyword made it into the feature space")
    relevant = set()
    evidence: dict[int, Evidence] = {}
    for t in range(model.num_topics):
        row = model.p_feat[t]
        if rule.method == "keyword_proximity":
            best = None
            for i in kw_indices:
                if row[i] > rule.gamma and (best is None or row[i] > row[best]):
                    best = i
            if best is not None:
                relevant.add(t)
                evidence[t] = Evidence(fs.terms[best], float(row[best]))
        else:
            top = np.argsort(-row, kind="stable")[: rule.k]
            for rank, i in enumerate(top, start=1):
                if int(i) in fs.keyword_indices:
                    relevant.add(t)
                    evidence[t] = Evidence(fs.terms[i], float(row[i]), rank=rank)
                    break
    return TopicPartition(relevant_topics=frozenset(relevant), evidence=evidence)


def classify(
    model: TopicModel,
    partition: TopicPartition,
    cfg: ClassifierConfig,
    docs: Union[None, Sequence[str], DocTermMatrix] = None,
    source: str = "tm",
) -> PredictionSet:
    """Label documents: 1 iff some relevant topic reaches theta.

    ``docs`` may be training doc ids (stored rows are used), a matrix of
    term rows (unknown rows are folded in), or None for every training
    document. Documents with no features are always labeled 0.
    """
    relevant = sorted(partition.relevant_topics)
    if docs is None:
        docs = model.doc_ids
    if isinstance(docs, DocTermMatrix):
        doc_ids = docs.doc_ids
        p_topic = infer_matrix(model, docs)
        empty = set(docs.empty_rows)
    else:
        index = model.doc_index()
        missing = [d for d in docs if d not in index]
        if missing:
            raise KeyError(f"unknown document ids: {missing[:5]}")
        doc_ids = tuple(docs)
        rows = [index[d] for d in docs]
        p_topic = model.p_topic[rows]
        empty = {i for i, r in enumerate(rows) if r in model.empty_docs}

    predictions: dict[str, int] = {}
    explanations: dict[str, tuple[int, ...]] = {}
    for i, doc_id in enumerate(doc_ids):
        if i in empty or not relevant:
            predictions[doc_id] = 0
            explanations[doc_id] = ()
            continue
        triggers = tuple(t for t in relevant if p_topic[i, t] >= cfg.theta)
        predictions[doc_id] = 1 if triggers else 0
        explanations[doc_id] = triggers
    return PredictionSet(source=source, predictions=predictions, explanations=explanations)


# --------------------------------------------------------------------------
# Sweep


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid over model-side and rule-side hyperparameters."""

    kinds: tuple[str, ...] = ("lda", "nmf")
    num_topics: tuple[int, ...] = DEFAULT_NUM_TOPICS
    min_doc_freq: tuple[int, ...] = DEFAULT_MIN_DOC_FREQ
    pos_sets: tuple[Optional[frozenset[str]], ...] = DEFAULT_POS_SETS
    methods: tuple[str, ...] = METHODS
    thetas: tuple[float, ...] = DEFAULT_THETA_GRID
    gammas: tuple[float, ...] = DEFAULT_GAMMA_GRID
    ks: tuple[int, ...] = DEFAULT_K_GRID
    keyword_mode: str = "exact"

    def __post_init__(self) -> None:
        axes = {
            "kinds": self.kinds,
            "num_topics": self.num_topics,
            "min_doc_freq": self.min_doc_freq,
            "pos_sets": self.pos_sets,
            "methods": self.methods,
            "thetas": self.thetas,
        }
        for name, axis in axes.items():
            if not axis:
                raise EmptyGrid(f"grid axis {name} is empty")
        if "keyword_proximity" in self.methods and not self.gammas:
            raise EmptyGrid("keyword_proximity requested but gamma grid is empty")
        if "top_terms" in self.methods and not self.ks:
            raise EmptyGrid("top_terms requested but k grid is empty")
        if any(k not in ("lda", "nmf") for k in self.kinds):
            raise ValueError(f"unknown model kind in {self.kinds}")

    def rules(self) -> list[PartitionRule]:
        out = []
        for method in self.methods:
            if method == "keyword_proximity":
                out.extend(PartitionRule(method, gamma=g) for g in self.gammas)
            else:
                out.extend(PartitionRule(method, k=k) for k in self.ks)
        return out


@dataclass(frozen=True)
class SweepResult:
    """One grid cell with its training metrics."""

    kind: str
    num_topics: int
    min_doc_freq: int
    pos_tags: Optional[frozenset[str]]
    method: str
    gamma: Optional[float]
    k: Optional[int]
    theta: float
    precision: float
    recall: float
    f1: float
    model_key: str

    def rule(self) -> PartitionRule:
        return PartitionRule(self.method, gamma=self.gamma, k=self.k)

    def classifier_config(self) -> ClassifierConfig:
        return ClassifierConfig(theta=self.theta, rule=self.rule(), model_ref=self.model_key)


@dataclass(frozen=True)
class SweepOutcome:
    results: tuple[SweepResult, ...]
    models: Mapping[str, tuple[TopicModel, FeatureSpace]]


def _binary_prf(pred: np.ndarray, gold: np.ndarray) -> tuple[float, float, float]:
    tp = int(((pred == 1) & (gold == 1)).sum())
    fp = int(((pred == 1) & (gold == 0)).sum())
    fn = int(((pred == 0) & (gold == 1)).sum())
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def model_key(kind: str, num_topics: int, min_doc_freq: int, pos: Optional[frozenset[str]]) -> str:
    pos_part = "+".join(sorted(pos)) if pos else "any"
    return f"{kind}-k{num_topics}-df{min_doc_freq}-{pos_part}"


def sweep(
    corpus: Sequence[TokenizedDocument],
    keywords: KeywordList,
    train_gold: Mapping[str, int],
    grid: SweepGrid,
    seed: int = 123,
    lda_passes: int = 20,
    lda_iterations: int = 400,
    nmf_max_iters: int = 200,
    debug: bool = False,
) -> SweepOutcome:
    """Fit every model cell on the full corpus, score rules on the train split.

    Infeasible cells (feature selection leaves nothing, or fewer documents
    than topics) are skipped with a warning; the grid must leave at least
    one scored cell.
    """
    if not train_gold:
        raise ValueError("train_gold is empty")
    doc_pos = {d.doc_id: i for i, d in enumerate(corpus)}
    missing = [d for d in train_gold if d not in doc_pos]
    if missing:
        raise KeyError(f"gold ids missing from corpus: {missing[:5]}")
    train_ids = sorted(train_gold)
    gold = np.array([train_gold[d] for d in train_ids])
    rules = [
        (rule, grid.thetas) for rule in sorted(grid.rules(), key=lambda r: r.describe())
    ]

    results: list[SweepResult] = []
    models: dict[str, tuple[TopicModel, FeatureSpace]] = {}
    for kind in grid.kinds:
        for mdf in grid.min_doc_freq:
            for pos in grid.pos_sets:
                try:
                    fs = build_feature_space(
                        corpus, keywords, mdf, pos, keyword_mode=grid.keyword_mode
                    )
                except EmptyFeatureSpace as exc:
                    log.warning("skipping df=%s pos=%s: %s", mdf, pos, exc)
                    continue
                weighting = "counts" if kind == "lda" else "tfidf"
                matrix = vectorize(corpus, fs, weighting)
                for k_topics in grid.num_topics:
                    key = model_key(kind, k_topics, mdf, pos)
                    try:
                        if kind == "lda":
                            cfg = LDAConfig(
                                num_topics=k_topics,
                                iterations=lda_iterations,
                                passes=lda_passes,
                                seed=seed,
                            )
                            model = fit_lda(matrix, cfg, debug=debug)
                        else:
                            model = fit_nmf(
                                matrix,
                                NMFConfig(num_topics=k_topics, max_iters=nmf_max_iters, seed=seed),
                            )
                    except DegenerateCorpus as exc:
                        log.warning("skipping %s: %s", key, exc)
                        continue
                    models[key] = (model, fs)
                    rows = [doc_pos[d] for d in train_ids]
                    p_topic = model.p_topic[rows]
                    empty = np.array(
                        [doc_pos[d] in model.empty_docs for d in train_ids]
                    )
                    for rule, thetas in rules:
                        try:
                            part = partition_topics(model, fs, rule)
                        except NoKeywordsInFeatureSpace:
                            log.warning("no keywords in %s; rule %s skipped", key, rule)
                            continue
                        relevant = sorted(part.relevant_topics)
                        score = (
                            p_topic[:, relevant].max(axis=1)
                            if relevant
                            else np.zeros(len(train_ids))
                        )
                        score = np.where(empty, -1.0, score)
                        for theta in thetas:
                            pred = (score >= theta).astype(int)
                            p, r, f1 = _binary_prf(pred, gold)
                            results.append(
                                SweepResult(
                                    kind=kind,
                                    num_topics=k_topics,
                                    min_doc_freq=mdf,
                                    pos_tags=pos,
                                    method=rule.method,
                                    gamma=rule.gamma,
                                    k=rule.k,
                                    theta=theta,
                                    precision=p,
                                    recall=r,
                                    f1=f1,
                                    model_key=key,
                                )
                            )
    if not results:
        raise EmptyGrid("no feasible grid cell produced a result")
    return SweepOutcome(results=tuple(results), models=models)


def select_variants(
    results: Sequence[SweepResult],
    recall_floor: float = DEFAULT_RECALL_FLOOR,
    balanced: str = "min",
    strict: bool = False,
) -> dict[str, SweepResult]:
    """Pick the three named configurations from sweep results.

    tm_f1 maximizes F1. tm_b maximizes min(P, R) (or minimizes |P - R|
    with balanced="absdiff"), ties broken by F1 then by fewer topics.
    tm_p maximizes precision among cells with recall >= recall_floor,
    ties by recall then F1; without any feasible cell it warns and falls
    back to the overall precision maximum (or raises when strict=True).
    """
    if not results:
        raise ValueError("no sweep results to select from")
    if balanced not in ("min", "absdiff"):
        raise ValueError(f"unknown balanced criterion {balanced!r}")
    indexed = list(enumerate(results))

    def pick(key):
        return max(indexed, key=lambda pair: key(pair[1]) + (-pair[0],))[1]

    tm_f1 = pick(lambda r: (r.f1, -r.num_topics))
    if balanced == "min":
        tm_b = pick(lambda r: (min(r.precision, r.recall), r.f1, -r.num_topics))
    else:
        tm_b = pick(lambda r: (-abs(r.precision - r.recall), r.f1, -r.num_topics))
    feasible = [(i, r) for i, r in indexed if r.recall >= recall_floor]
    if feasible:
        tm_p = max(
            feasible,
            key=lambda pair: (pair[1].precision, pair[1].recall, pair[1].f1, -pair[0]),
        )[1]
    else:
        if strict:
            raise NoFeasibleConfig(f"no cell reaches recall >= {recall_floor}")
        warnings.warn(
            f"no sweep cell reaches recall >= {recall_floor}; "
            "falling back to the overall precision maximum",
            stacklevel=2,
        )
        tm_p = pick(lambda r: (r.precision, r.recall, r.f1))
    return {"tm_f1": tm_f1, "tm_b": tm_b, "tm_p": tm_p}


# --------------------------------------------------------------------------
# Serialization


_SWEEP_HEADER = [
    "kind", "num_topics", "min_doc_freq", "pos_tags", "method",
    "gamma", "k", "theta", "precision", "recall", "f1", "model_key",
]


def save_sweep_results(results: Sequence[SweepResult], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SWEEP_HEADER)
        for r in results:
            writer.writerow(
                [
                    r.kind,
                    r.num_topics,
                    r.min_doc_freq,
                    "+".join(sorted(r.pos_tags)) if r.pos_tags else "",
                    r.method,
                    "" if r.gamma is None else r.gamma,
                    "" if r.k is None else r.k,
                    r.theta,
                    f"{r.precision:.6f}",
                    f"{r.recall:.6f}",
                    f"{r.f1:.6f}",
                    r.model_key,
                ]
            )


def load_sweep_results(path: str | Path) -> tuple[SweepResult, ...]:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _SWEEP_HEADER:
            raise ValueError(f"{path}: unexpected header")
        for row in reader:
            rec = dict(zip(_SWEEP_HEADER, row))
            out.append(
                SweepResult(
                    kind=rec["kind"],
                    num_topics=int(rec["num_topics"]),
                    min_doc_freq=int(rec["min_doc_freq"]),
                    pos_tags=frozenset(rec["pos_tags"].split("+")) if rec["pos_tags"] else None,
                    method=rec["method"],
                    gamma=float(rec["gamma"]) if rec["gamma"] else None,
                    k=int(rec["k"]) if rec["k"] else None,
                    theta=float(rec["theta"]),
                    precision=float(rec["precision"]),
                    recall=float(rec["recall"]),
                    f1=float(rec["f1"]),
                    model_key=rec["model_key"],
                )
            )
    return tuple(out)


def save_variant_manifest(
    variants: Mapping[str, SweepResult],
    path: str | Path,
    model_paths: Optional[Mapping[str, str]] = None,
) -> None:
    """Write the selected variants as a structured config file.

    Each entry names the model artifact (via model_key, optionally a
    file path), the partition rule, theta, and the training metrics.
    """
    doc = {}
    for name, r in sorted(variants.items()):
        doc[name] = {
            "model_key": r.model_key,
            "model_path": (model_paths or {}).get(r.model_key),
            "kind": r.kind,
            "num_topics": r.num_topics,
            "min_doc_freq": r.min_doc_freq,
            "pos_tags": sorted(r.pos_tags) if r.pos_tags else None,
            "method": r.method,
            "gamma": r.gamma,
            "k": r.k,
            "theta": r.theta,
            "train": {"precision": r.precision, "recall": r.recall, "f1": r.f1},
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


def load_variant_manifest(path: str | Path) -> dict[str, SweepResult]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    out = {}
    for name, rec in doc.items():
        out[name] = SweepResult(
            kind=rec["kind"],
            num_topics=rec["num_topics"],
            min_doc_freq=rec["min_doc_freq"],
            pos_tags=frozenset(rec["pos_tags"]) if rec["pos_tags"] else None,
            method=rec["method"],
            gamma=rec["gamma"],
            k=rec["k"],
            theta=rec["theta"],
            precision=rec["train"]["precision"],
            recall=rec["train"]["recall"],
            f1=rec["train"]["f1"],
            model_key=rec["model_key"],
        )
    return out


def save_predictions(preds: PredictionSet, path: str | Path) -> None:
    """CSV rows (doc_id, label, topics); topics are ';'-joined triggers."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "label", "topics"])
        for doc_id in sorted(preds.predictions):
            topics = ""
            if preds.explanations and doc_id in preds.explanations:
                topics = ";".join(str(t) for t in preds.explanations[doc_id])
            writer.writerow([doc_id, preds.predictions[doc_id], topics])
