"""Latent Dirichlet Allocation via collapsed Gibbs sampling.

The sampler integrates out the topic and word multinomials and resamples
one token-topic assignment at a time from

    p(z=k) ~ (n_tw[k,w] + eta) / (n_t[k] + V*eta) * (n_dt[d,k] + alpha_k)

Training runs `passes` full sweeps over all tokens. `iterations` is the
inference-time budget: folding in an unseen document resamples its
tokens for that many sweeps (minus burn-in, which is discarded before
averaging). The two constants are configuration defaults carried over
from the training regime this mirrors; no equivalence with variational
implementations is claimed.

With alpha="auto"/eta="auto", an asymmetric alpha over topics and a
symmetric eta over terms are re-estimated between passes by Minka's
fixed-point update.

The inner loop is compiled with numba and draws from an inlined
splitmix64 generator, so a fixed seed gives bitwise-identical models
on any machine.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import psi

from .features import DocTermMatrix
from .topicmodel import DegenerateCorpus, LDAConfig, TopicModel, uniform_row

_ALPHA_FLOOR = 1e-6
_ETA_FLOOR = 1e-8

_U64 = np.uint64


@njit(cache=True)
def _rand_uniform(state):
    # splitmix64: state is a 1-element uint64 array
    state[0] += _U64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
    z = z ^ (z >> _U64(31))
    return (z >> _U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _init_assignments(doc_tokens, doc_starts, z, n_dt, n_tw, n_t, state):
    num_topics = n_tw.shape[0]
    for d in range(doc_starts.shape[0] - 1):
        for i in range(doc_starts[d], doc_starts[d + 1]):
            k = int(_rand_uniform(state) * num_topics)
            if k == num_topics:
                k = num_topics - 1
            z[i] = k
            n_dt[d, k] += 1
            n_tw[k, doc_tokens[i]] += 1
            n_t[k] += 1


@njit(cache=True)
def _gibbs_sweep(doc_tokens, doc_starts, z, n_dt, n_tw, n_t, alpha, eta, state):
    num_topics, num_terms = n_tw.shape
    eta_sum = eta * num_terms
    cum = np.empty(num_topics, dtype=np.float64)
    for d in range(doc_starts.shape[0] - 1):
        for i in range(doc_starts[d], doc_starts[d + 1]):
            w = doc_tokens[i]
            k_old = z[i]
            n_dt[d, k_old] -= 1
            n_tw[k_old, w] -= 1
            n_t[k_old] -= 1
            total = 0.0
            for k in range(num_topics):
                total += (
                    (n_tw[k, w] + eta) / (n_t[k] + eta_sum) * (n_dt[d, k] + alpha[k])
                )
                cum[k] = total
            r = _rand_uniform(state) * total
            k_new = num_topics - 1
            for k in range(num_topics):
                if r < cum[k]:
                    k_new = k
                    break
            z[i] = k_new
            n_dt[d, k_new] += 1
            n_tw[k_new, w] += 1
            n_t[k_new] += 1


@njit(cache=True)
def _fold_in_sweeps(tokens, p_feat, alpha, iterations, burn_in, state):
    num_topics = p_feat.shape[0]
    n_k = np.zeros(num_topics, dtype=np.int64)
    z = np.empty(tokens.shape[0], dtype=np.int32)
    for i in range(tokens.shape[0]):
        k = int(_rand_uniform(state) * num_topics)
        if k == num_topics:
            k = num_topics - 1
        z[i] = k
        n_k[k] += 1
    acc = np.zeros(num_topics, dtype=np.float64)
    cum = np.empty(num_topics, dtype=np.float64)
    for sweep in range(iterations):
        for i in range(tokens.shape[0]):
            w = tokens[i]
            k_old = z[i]
            n_k[k_old] -= 1
            total = 0.0
            for k in range(num_topics):
                total += p_feat[k, w] * (n_k[k] + alpha[k])
                cum[k] = total
            r = _rand_uniform(state) * total
            k_new = num_topics - 1
            for k in range(num_topics):
                if r < cum[k]:
                    k_new = k
                    break
            z[i] = k_new
            n_k[k_new] += 1
        if sweep >= burn_in:
            for k in range(num_topics):
                acc[k] += n_k[k]
    return acc


def _expand_tokens(m: DocTermMatrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flatten count rows into one token-index stream per document."""
    data = m.matrix.tocsr()
    counts = data.data
    if not np.allclose(counts, np.round(counts)):
        raise ValueError("LDA needs integer counts; got fractional entries")
    non_empty = np.array(
        [d for d in range(data.shape[0]) if d not in m.empty_rows], dtype=np.int64
    )
    tokens = []
    starts = np.zeros(len(non_empty) + 1, dtype=np.int64)
    for j, d in enumerate(non_empty):
        row = data.getrow(d)
        expanded = np.repeat(row.indices, row.data.astype(np.int64))
        tokens.append(expanded)
        starts[j + 1] = starts[j] + expanded.shape[0]
    doc_tokens = (
        np.concatenate(tokens).astype(np.int32) if tokens else np.empty(0, np.int32)
    )
    return doc_tokens, starts, non_empty


def _update_alpha(alpha: np.ndarray, n_dt: np.ndarray, doc_lens: np.ndarray) -> np.ndarray:
    num = psi(n_dt + alpha[None, :]) - psi(alpha[None, :])
    den = (psi(doc_lens + alpha.sum()) - psi(alpha.sum())).sum()
    return np.maximum(alpha * num.sum(axis=0) / den, _ALPHA_FLOOR)


def _update_eta(eta: float, n_tw: np.ndarray, n_t: np.ndarray) -> float:
    num_terms = n_tw.shape[1]
    nonzero = n_tw[n_tw > 0]
    num = (psi(nonzero + eta) - psi(eta)).sum()
    den = num_terms * (psi(n_t + num_terms * eta) - psi(num_terms * eta)).sum()
    return max(float(eta * num / den), _ETA_FLOOR)


def _check_counts(n_dt, n_tw, n_t, doc_lens):
    assert (n_dt >= 0).all() and (n_tw >= 0).all() and (n_t >= 0).all()
    assert (n_dt.sum(axis=1) == doc_lens).all(), "document token counts drifted"
    assert (n_tw.sum(axis=1) == n_t).all(), "topic token counts drifted"
    assert n_t.sum() == doc_lens.sum(), "total token count drifted"


def fit_lda(m: DocTermMatrix, cfg: LDAConfig, debug: bool = False) -> TopicModel:
    """Fit by collapsed Gibbs sampling; deterministic for a fixed seed.

    With debug=True, count conservation is asserted after every sweep.
    """
    if m.weighting != "counts":
        raise ValueError("LDA requires a counts matrix")
    doc_tokens, doc_starts, non_empty = _expand_tokens(m)
    num_docs_trained = len(non_empty)
    if num_docs_trained < cfg.num_topics:
        raise DegenerateCorpus(
            f"{num_docs_trained} non-empty documents < {cfg.num_topics} topics"
        )
    num_topics = cfg.num_topics
    num_terms = m.matrix.shape[1]
    doc_lens = np.diff(doc_starts)

    alpha = (
        np.full(num_topics, 1.0 / num_topics)
        if cfg.alpha == "auto"
        else np.full(num_topics, float(cfg.alpha))
    )
    eta = 1.0 / num_topics if cfg.eta == "auto" else float(cfg.eta)

    n_dt = np.zeros((num_docs_trained, num_topics), dtype=np.int64)
    n_tw = np.zeros((num_topics, num_terms), dtype=np.int64)
    n_t = np.zeros(num_topics, dtype=np.int64)
    z = np.empty(doc_tokens.shape[0], dtype=np.int32)
    state = np.array([cfg.seed], dtype=np.uint64)

    _init_assignments(doc_tokens, doc_starts, z, n_dt, n_tw, n_t, state)
    if debug:
        _check_counts(n_dt, n_tw, n_t, doc_lens)
    for sweep in range(cfg.passes):
        _gibbs_sweep(doc_tokens, doc_starts, z, n_dt, n_tw, n_t, alpha, eta, state)
        if debug:
            _check_counts(n_dt, n_tw, n_t, doc_lens)
        if sweep < cfg.passes - 1:
            if cfg.alpha == "auto":
                alpha = _update_alpha(alpha, n_dt, doc_lens)
            if cfg.eta == "auto":
                eta = _update_eta(eta, n_tw, n_t)

    p_feat = (n_tw + eta) / (n_t + num_terms * eta)[:, None]
    p_topic = np.empty((m.matrix.shape[0], num_topics))
    trained = (n_dt + alpha[None, :]) / (doc_lens + alpha.sum())[:, None]
    p_topic[non_empty] = trained
    for d in m.empty_rows:
        p_topic[d] = uniform_row(num_topics)
    return TopicModel(
        kind="lda",
        p_feat=p_feat,
        p_topic=p_topic,
        doc_ids=m.doc_ids,
        empty_docs=frozenset(m.empty_rows),
        feature_space_checksum=m.feature_space_checksum,
        config=cfg,
        alpha=alpha,
        eta=eta,
    )


def fold_in(model: TopicModel, row: np.ndarray) -> np.ndarray:
    """Topic distribution of an unseen count row with p_feat frozen.

    The fold-in RNG is seeded from the model seed and the row content,
    so inference is deterministic per document and independent of the
    order documents are presented in.
    """
    cfg = model.config
    counts = np.round(row).astype(np.int64)
    tokens = np.repeat(
        np.nonzero(counts)[0].astype(np.int32), counts[np.nonzero(counts)[0]]
    )
    if tokens.size == 0:
        return uniform_row(model.num_topics)
    alpha = model.alpha
    mask = (1 << 64) - 1
    mix = cfg.seed & mask
    for w in np.nonzero(counts)[0]:
        mix = (mix * 1000003 + int(w) * 2 + int(counts[w])) & mask
    state = np.array([mix], dtype=np.uint64)
    acc = _fold_in_sweeps(
        tokens, model.p_feat, alpha, cfg.iterations, cfg.burn_in, state
    )
    mean_counts = acc / (cfg.iterations - cfg.burn_in)
    return (mean_counts + alpha) / (tokens.size + alpha.sum())
