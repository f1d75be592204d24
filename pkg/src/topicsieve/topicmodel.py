"""Shared topic-model types, persistence, and inference dispatch.

A fitted model, whatever its family, is reduced to the two distributions
the classifier layer consumes: p_feat (term given topic) and p_topic
(topic given document). Everything downstream (partitioning, θ
thresholding, sweeps) only ever touches these two matrices, so LDA and
NMF are interchangeable behind this type.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .features import DocTermMatrix, FeatureSpace

_MODEL_MAGIC = b"TSTM"
_MODEL_VERSION = 1
_KINDS = ("lda", "nmf")

SIMPLEX_ATOL = 1e-6


class DegenerateCorpus(ValueError):
    """Fewer non-empty documents than topics requested."""


class NonNegativityViolation(AssertionError):
    """A factor matrix picked up a negative entry (internal bug guard)."""


class FeatureSpaceMismatch(ValueError):
    """Model and input were built over different feature spaces."""


@dataclass(frozen=True)
class LDAConfig:
    num_topics: int
    alpha: Union[str, float] = "auto"
    eta: Union[str, float] = "auto"
    iterations: int = 400
    passes: int = 20
    seed: int = 123
    burn_in: int = 50

    def __post_init__(self) -> None:
        # single-topic models are legal degenerate cases: p_topic is all 1
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if self.iterations < 1 or self.passes < 1:
            raise ValueError("iterations and passes must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("need 0 <= burn_in < iterations")
        for name in ("alpha", "eta"):
            v = getattr(self, name)
            if isinstance(v, str):
                if v != "auto":
                    raise ValueError(f"{name} must be 'auto' or a positive number")
            elif v <= 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return {
            "num_topics": self.num_topics,
            "alpha": self.alpha,
            "eta": self.eta,
            "iterations": self.iterations,
            "passes": self.passes,
            "seed": self.seed,
            "burn_in": self.burn_in,
        }


@dataclass(frozen=True)
class NMFConfig:
    num_topics: int
    max_iters: int = 200
    tol: float = 1e-4
    seed: int = 123

    def __post_init__(self) -> None:
        if self.num_topics < 1:
            raise ValueError("num_topics must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be > 0")

    def to_dict(self) -> dict:
        return {
            "num_topics": self.num_topics,
            "max_iters": self.max_iters,
            "tol": self.tol,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TopicModel:
    """p_feat rows are topics over terms; p_topic rows are docs over topics."""

    kind: str
    p_feat: np.ndarray
    p_topic: np.ndarray
    doc_ids: tuple[str, ...]
    empty_docs: frozenset[int]
    feature_space_checksum: str
    config: Union[LDAConfig, NMFConfig]
    alpha: Optional[np.ndarray] = None
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        assert self.kind in _KINDS
        assert self.p_feat.shape[0] == self.num_topics
        assert self.p_topic.shape == (len(self.doc_ids), self.num_topics)
        assert (self.p_feat >= 0).all() and (self.p_topic >= 0).all()
        np.testing.assert_allclose(self.p_feat.sum(axis=1), 1.0, atol=SIMPLEX_ATOL)
        np.testing.assert_allclose(self.p_topic.sum(axis=1), 1.0, atol=SIMPLEX_ATOL)

    @property
    def num_topics(self) -> int:
        return self.config.num_topics

    @property
    def num_terms(self) -> int:
        return self.p_feat.shape[1]

    def doc_index(self) -> dict[str, int]:
        return {d: i for i, d in enumerate(self.doc_ids)}


def top_terms(
    model: TopicModel, fs: FeatureSpace, topic: int, n: int = 10
) -> list[tuple[str, float]]:
    """The n most probable feature terms of a topic, ties by feature index."""
    if fs.checksum() != model.feature_space_checksum:
        raise FeatureSpaceMismatch("feature space does not match the model")
    row = model.p_feat[topic]
    # stable sort on -p keeps the lower feature index first on ties
    order = np.argsort(-row, kind="stable")[:n]
    return [(fs.terms[i], float(row[i])) for i in order]


def dump_topics(model: TopicModel, fs: FeatureSpace, path: str | Path, n: int = 10) -> None:
    """CSV of the top-n terms per topic: topic_id, rank, term, probability."""
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["topic_id", "rank", "term", "probability"])
        for t in range(model.num_topics):
            for rank, (term, prob) in enumerate(top_terms(model, fs, t, n), start=1):
                writer.writerow([t, rank, term, f"{prob:.8f}"])


def uniform_row(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def infer_topics(
    model: TopicModel,
    doc: Union[str, sp.spmatrix, np.ndarray],
    matrix: Optional[DocTermMatrix] = None,
) -> np.ndarray:
    """Topic distribution for one document.

    A training document (given by id) returns its stored p_topic row. A
    new document is given as a term-count row over the model's feature
    space: LDA folds it in by Gibbs sampling with p_feat frozen, NMF
    solves the non-negative row regression against its factor basis.
    """
    if isinstance(doc, str):
        idx = model.doc_index().get(doc)
        if idx is None:
            raise KeyError(f"unknown document id {doc!r}")
        return model.p_topic[idx].copy()

    row = np.asarray(doc.todense() if sp.issparse(doc) else doc, dtype=np.float64).ravel()
    if row.shape[0] != model.num_terms:
        raise FeatureSpaceMismatch(
            f"row has {row.shape[0]} terms, model has {model.num_terms}"
        )
    if matrix is not None and matrix.feature_space_checksum != model.feature_space_checksum:
        raise FeatureSpaceMismatch("matrix feature space does not match the model")
    if row.sum() == 0:
        return uniform_row(model.num_topics)
    if model.kind == "lda":
        from .lda import fold_in

        return fold_in(model, row)
    from .nmf import infer_row

    return infer_row(model, row)


def infer_matrix(model: TopicModel, m: DocTermMatrix) -> np.ndarray:
    """p_topic rows for every document of a matrix, stored rows reused."""
    known = model.doc_index()
    out = np.empty((len(m.doc_ids), model.num_topics))
    for i, doc_id in enumerate(m.doc_ids):
        if doc_id in known:
            out[i] = model.p_topic[known[doc_id]]
        elif i in m.empty_rows:
            out[i] = uniform_row(model.num_topics)
        else:
            out[i] = infer_topics(model, m.matrix.getrow(i), matrix=m)
    return out


# --------------------------------------------------------------------------
# Persistence


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_model(model: TopicModel, path: str | Path) -> None:
    k, v, d = model.num_topics, model.num_terms, len(model.doc_ids)
    with open(path, "wb") as fh:
        fh.write(_MODEL_MAGIC)
        fh.write(struct.pack("<HBIII", _MODEL_VERSION, _KINDS.index(model.kind), k, v, d))
        fh.write(_pack_str(model.feature_space_checksum))
        fh.write(_pack_str(json.dumps(model.config.to_dict(), sort_keys=True)))
        alpha = model.alpha if model.alpha is not None else np.array([])
        fh.write(struct.pack("<I", alpha.size))
        fh.write(np.ascontiguousarray(alpha, dtype=np.float64).tobytes())
        fh.write(struct.pack("<d", model.eta if model.eta is not None else np.nan))
        empties = sorted(model.empty_docs)
        fh.write(struct.pack("<I", len(empties)))
        fh.write(np.asarray(empties, dtype=np.uint32).tobytes())
        for doc_id in model.doc_ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        fh.write(np.ascontiguousarray(model.p_feat, dtype=np.float64).tobytes())
        fh.write(np.ascontiguousarray(model.p_topic, dtype=np.float64).tobytes())


def load_model(path: str | Path) -> TopicModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MODEL_MAGIC:
            raise ValueError(f"{path}: not a model file")
        version, kind_code, k, v, d = struct.unpack("<HBIII", fh.read(15))
        if version != _MODEL_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        kind = _KINDS[kind_code]
        checksum = _read_str(fh)
        cfg_raw = json.loads(_read_str(fh))
        config = LDAConfig(**cfg_raw) if kind == "lda" else NMFConfig(**cfg_raw)
        (alpha_n,) = struct.unpack("<I", fh.read(4))
        alpha = np.frombuffer(fh.read(8 * alpha_n), dtype=np.float64).copy() if alpha_n else None
        (eta,) = struct.unpack("<d", fh.read(8))
        (n_empty,) = struct.unpack("<I", fh.read(4))
        empties = np.frombuffer(fh.read(4 * n_empty), dtype=np.uint32)
        doc_ids = []
        for _ in range(d):
            (id_len,) = struct.unpack("<H", fh.read(2))
            doc_ids.append(fh.read(id_len).decode("utf-8"))
        p_feat = np.frombuffer(fh.read(8 * k * v), dtype=np.float64).reshape(k, v).copy()
        p_topic = np.frombuffer(fh.read(8 * d * k), dtype=np.float64).reshape(d, k).copy()
    return TopicModel(
        kind=kind,
        p_feat=p_feat,
        p_topic=p_topic,
        doc_ids=tuple(doc_ids),
        empty_docs=frozenset(int(i) for i in empties),
        feature_space_checksum=checksum,
        config=config,
        alpha=alpha,
        eta=None if np.isnan(eta) else float(eta),
    )
