"""Non-negative matrix factorization with multiplicative Frobenius updates.

Factorizes the TF-IDF matrix V (docs x terms) as W @ H with W, H >= 0.
Row-normalized H plays the role of p_feat, row-normalized W of p_topic;
scores are not probabilities but live on the same simplex interface.

The squared Frobenius objective is evaluated through the trace identity

    ||V - WH||^2 = ||V||^2 - 2<V, WH> + tr((W'W)(HH'))

so the dense D x V reconstruction is never formed. Multiplicative
updates keep the objective non-increasing; that is asserted on every
iteration (with round-off slack) rather than trusted.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .features import DocTermMatrix
from .topicmodel import (
    DegenerateCorpus,
    NMFConfig,
    NonNegativityViolation,
    TopicModel,
    uniform_row,
)

_EPS = 1e-12
_MONOTONE_SLACK = 1e-10


def _objective(v: sp.csr_matrix, w: np.ndarray, h: np.ndarray, v_norm2: float) -> float:
    wv = w.T @ v  # (K, V) dense, small
    cross = float(np.sum(wv * h))
    gram = float(np.sum((w.T @ w) * (h @ h.T)))
    return v_norm2 - 2.0 * cross + gram


def _normalize_rows(m: np.ndarray) -> tuple[np.ndarray, list[int]]:
    sums = m.sum(axis=1)
    degenerate = [int(i) for i in np.nonzero(sums <= 0)[0]]
    out = np.empty_like(m)
    for i, s in enumerate(sums):
        out[i] = m[i] / s if s > 0 else uniform_row(m.shape[1])
    return out, degenerate


def fit_nmf(
    m: DocTermMatrix,
    cfg: NMFConfig,
    debug: bool = False,
    trace: list[float] | None = None,
) -> TopicModel:
    """Factorize with seeded random init; deterministic for a fixed seed.

    Stops when the relative objective decrease falls below cfg.tol or
    after cfg.max_iters updates. When ``trace`` is given, the objective
    value of the init and of every accepted update is appended to it.
    """
    if m.weighting != "tfidf":
        raise ValueError("NMF expects a tfidf matrix")
    v = m.matrix.tocsr()
    if (v.data < 0).any():
        raise ValueError("matrix has negative entries")
    num_docs, num_terms = v.shape
    non_empty = num_docs - len(m.empty_rows)
    if non_empty < cfg.num_topics:
        raise DegenerateCorpus(f"{non_empty} non-empty documents < {cfg.num_topics} topics")

    rng = np.random.default_rng(cfg.seed)
    scale = np.sqrt(v.data.mean() / cfg.num_topics) if v.nnz else 1.0
    w = rng.uniform(_EPS, scale, size=(num_docs, cfg.num_topics))
    h = rng.uniform(_EPS, scale, size=(cfg.num_topics, num_terms))

    v_norm2 = float((v.data**2).sum())
    objective = _objective(v, w, h, v_norm2)
    history = [objective]
    for _ in range(cfg.max_iters):
        # H <- H * (W'V) / (W'W H)
        h *= (w.T @ v) / (w.T @ w @ h + _EPS)
        # W <- W * (V H') / (W H H')
        w *= (v @ h.T) / (w @ (h @ h.T) + _EPS)
        if (w < 0).any() or (h < 0).any():
            raise NonNegativityViolation("negative factor entry after update")
        previous, objective = objective, _objective(v, w, h, v_norm2)
        if objective > previous + _MONOTONE_SLACK:
            raise AssertionError(
                f"objective increased: {previous:.12g} -> {objective:.12g}"
            )
        history.append(objective)
        if previous > 0 and (previous - objective) / previous < cfg.tol:
            break

    if trace is not None:
        trace.extend(history)

    p_feat, _ = _normalize_rows(h)
    p_topic, zero_rows = _normalize_rows(w)
    return TopicModel(
        kind="nmf",
        p_feat=p_feat,
        p_topic=p_topic,
        doc_ids=m.doc_ids,
        empty_docs=frozenset(m.empty_rows) | frozenset(zero_rows),
        feature_space_checksum=m.feature_space_checksum,
        config=cfg,
        alpha=None,
        eta=None,
    )


def reconstruction_error(m: DocTermMatrix, w: np.ndarray, h: np.ndarray) -> float:
    v = m.matrix.tocsr()
    return _objective(v, w, h, float((v.data**2).sum()))


def infer_row(model: TopicModel, row: np.ndarray) -> np.ndarray:
    """Non-negative regression of one row against the fitted basis.

    Runs the W-update with H fixed from a uniform start; deterministic,
    no randomness involved.
    """
    cfg = model.config
    h = model.p_feat
    hht = h @ h.T
    v = row[None, :]
    w = np.full((1, model.num_topics), max(row.sum(), 1.0) / model.num_topics)
    prev = None
    for _ in range(cfg.max_iters):
        w *= (v @ h.T) / (w @ hht + _EPS)
        err = float(((v - w @ h) ** 2).sum())
        if prev is not None and prev > 0 and (prev - err) / prev < cfg.tol:
            break
        prev = err
    total = w.sum()
    if total <= 0:
        return uniform_row(model.num_topics)
    return (w / total).ravel()
