"""Synthetic hazard corpus with known ground truth.

Documents are drawn from a mixture of disjoint-support pseudo-word
topics: one hazard topic that concentrates a fixed share of its mass on
the query keywords, and several background topics. Relevant documents
give the hazard topic a large mixture weight; irrelevant ones give it
zero but usually carry a single stray keyword token, mimicking a
keyword-retrieved corpus where matching alone does not imply relevance.

Every document also mentions one gazetteer country and stays inside the
ingest filter bounds, so the generated corpus passes apply_filters
unchanged. The generator is fully determined by its seed.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .corpus import Gazetteer, KeywordList, RawDocument, save_jsonl
from .evaluation import GoldLabel, save_gold
from .features import load_stopwords

_OUTLETS = ("Tagesblick", "Morgenkurier", "Landpost")


@dataclass(frozen=True)
class SynthConfig:
    num_docs: int = 1000
    relevant_fraction: float = 0.30
    num_topics: int = 8
    vocab_per_topic: int = 40
    num_keywords: int = 4
    keyword_mass: float = 0.25
    doc_len_min: int = 80
    doc_len_max: int = 200
    hazard_weight_low: float = 0.55
    hazard_weight_high: float = 0.90
    main_threshold: float = 0.75
    stray_keyword_prob: float = 0.90
    train_fraction: float = 0.70
    hazard: str = "synthstorm"
    seed: int = 123

    def __post_init__(self) -> None:
        if self.num_docs < 10:
            raise ValueError("num_docs must be >= 10")
        if not (0 < self.relevant_fraction < 1):
            raise ValueError("relevant_fraction must be in (0, 1)")
        if self.num_topics < 2:
            raise ValueError("need at least one background topic")
        if self.num_keywords >= self.vocab_per_topic:
            raise ValueError("keywords must leave room for background terms")
        if not (0 < self.keyword_mass < 1):
            raise ValueError("keyword_mass must be in (0, 1)")
        if not (0 < self.hazard_weight_low <= self.hazard_weight_high < 1):
            raise ValueError("hazard weight range invalid")
        if self.doc_len_min < 30 or self.doc_len_max > 1700:
            raise ValueError("doc lengths must stay inside the ingest bounds")


@dataclass(frozen=True)
class SynthBundle:
    config: SynthConfig
    documents: tuple[RawDocument, ...]
    gold: tuple[GoldLabel, ...]
    keywords: KeywordList
    hazard_weights: Mapping[str, float]
    topic_vocab: tuple[tuple[str, ...], ...]


def _pseudo_words(rng, count, taken, min_len=5, max_len=9):
    words = []
    letters = string.ascii_lowercase
    while len(words) < count:
        length = int(rng.integers(min_len, max_len + 1))
        word = "".join(letters[i] for i in rng.integers(0, 26, size=length))
        if word in taken:
            continue
        taken.add(word)
        words.append(word)
    return words


def _single_token_countries(limit=24):
    gaz = Gazetteer.default()
    usable = sorted(c for c in gaz.countries if c.isalpha() and len(c) >= 4)
    return usable[:limit]


def generate(cfg: SynthConfig) -> SynthBundle:
    rng = np.random.default_rng(cfg.seed)
    countries = _single_token_countries()
    if not countries:
        raise RuntimeError("packaged gazetteer has no usable country tokens")
    # pseudo-words may collide with neither stopwords nor location tokens
    taken = set(load_stopwords()) | set(countries)

    topic_vocab = [
        tuple(_pseudo_words(rng, cfg.vocab_per_topic, taken))
        for _ in range(cfg.num_topics)
    ]
    keywords = topic_vocab[0][: cfg.num_keywords]

    # hazard topic: keyword_mass shared equally by keywords, flat remainder
    dists = []
    hazard_dist = np.empty(cfg.vocab_per_topic)
    hazard_dist[: cfg.num_keywords] = cfg.keyword_mass / cfg.num_keywords
    rest = rng.dirichlet(np.full(cfg.vocab_per_topic - cfg.num_keywords, 5.0))
    hazard_dist[cfg.num_keywords:] = (1 - cfg.keyword_mass) * rest
    dists.append(hazard_dist)
    for _ in range(1, cfg.num_topics):
        dists.append(rng.dirichlet(np.full(cfg.vocab_per_topic, 5.0)))

    n_rel = round(cfg.num_docs * cfg.relevant_fraction)
    relevant_flags = np.zeros(cfg.num_docs, dtype=bool)
    relevant_flags[rng.permutation(cfg.num_docs)[:n_rel]] = True

    background = list(range(1, cfg.num_topics))
    documents = []
    weights_out = {}
    prominences = {}
    for d in range(cfg.num_docs):
        doc_id = f"synth-{d:04d}"
        length = int(rng.integers(cfg.doc_len_min, cfg.doc_len_max + 1))
        mix = np.zeros(cfg.num_topics)
        if relevant_flags[d]:
            w = float(rng.uniform(cfg.hazard_weight_low, cfg.hazard_weight_high))
            mix[0] = w
            chosen = rng.choice(background, size=2, replace=False)
            mix[chosen] = (1 - w) * rng.dirichlet(np.ones(2))
            weights_out[doc_id] = w
            prominences[doc_id] = "main" if w >= cfg.main_threshold else "mention"
        else:
            chosen = rng.choice(background, size=3, replace=False)
            mix[chosen] = rng.dirichlet(np.ones(3))
            weights_out[doc_id] = 0.0
            prominences[doc_id] = "none"

        per_topic = rng.multinomial(length, mix)
        tokens = []
        for t, n in enumerate(per_topic):
            if n:
                tokens.extend(rng.choice(topic_vocab[t], size=n, p=dists[t]))
        if not relevant_flags[d] and rng.random() < cfg.stray_keyword_prob:
            tokens.append(str(rng.choice(keywords)))
        tokens.append(countries[d % len(countries)])
        order = rng.permutation(len(tokens))
        text = " ".join(tokens[i] for i in order)

        documents.append(
            RawDocument(
                id=doc_id,
                text=text,
                outlet=_OUTLETS[d % len(_OUTLETS)],
                date=f"2023-{1 + d % 12:02d}-{1 + d % 28:02d}",
                ressort="politik",
                hazard=cfg.hazard,
            )
        )

    # stratified split keeps the positive rate equal across train/test
    rel_ids = [doc.id for doc, r in zip(documents, relevant_flags) if r]
    irr_ids = [doc.id for doc, r in zip(documents, relevant_flags) if not r]
    train_ids = set()
    for ids in (rel_ids, irr_ids):
        shuffled = [ids[i] for i in rng.permutation(len(ids))]
        train_ids.update(shuffled[: round(len(ids) * cfg.train_fraction)])

    gold = tuple(
        GoldLabel(
            doc_id=doc.id,
            relevant=int(relevant_flags[d]),
            prominence=prominences[doc.id],
            hazard=cfg.hazard,
            split="train" if doc.id in train_ids else "test",
        )
        for d, doc in enumerate(documents)
    )
    keyword_list = KeywordList(hazard=cfg.hazard, keywords=frozenset(keywords))
    return SynthBundle(
        config=cfg,
        documents=tuple(documents),
        gold=gold,
        keywords=keyword_list,
        hazard_weights=weights_out,
        topic_vocab=tuple(topic_vocab),
    )


def write_bundle(bundle: SynthBundle, outdir: str | Path) -> dict[str, Path]:
    """Write corpus.jsonl, gold.csv and keywords.json; return their paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": outdir / "corpus.jsonl",
        "gold": outdir / "gold.csv",
        "keywords": outdir / "keywords.json",
    }
    save_jsonl(bundle.documents, paths["corpus"])
    save_gold(bundle.gold, paths["gold"])
    import json

    paths["keywords"].write_text(
        json.dumps(
            {
                "hazard": bundle.keywords.hazard,
                "keywords": sorted(bundle.keywords.keywords),
                "intruders": sorted(bundle.keywords.intruders),
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )
    return paths
