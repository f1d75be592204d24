"""Tokenization, normalization, feature selection, and matrix building.

The feature space F is a subset of the corpus vocabulary chosen by
document frequency and part-of-speech tag; hazard keywords are always
kept as features so they can anchor a topic even when rare. Counts feed
the LDA sampler, TF-IDF feeds NMF.

Lemmas and POS tags come from an optional pre-annotated layer on the
input documents. Without annotations a plain word tokenizer is used and
the POS criterion is skipped.
"""

from __future__ import annotations

import hashlib
import math
import re
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .corpus import KeywordList, RawDocument

_TOKEN_RE = re.compile(r"\w+")
_FS_HEADER = "topicsieve-features v1"
_MTX_MAGIC = b"TMTX"
_MTX_VERSION = 1
_WEIGHTINGS = ("counts", "tfidf")


class EmptyFeatureSpace(ValueError):
    """No term passed the selection criteria."""


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens; the shared tokenizer for filters and features."""
    return _TOKEN_RE.findall(text.lower())


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Stopword set from a one-token-per-line file; '#' lines are comments."""
    if path is None:
        path = Path(__file__).parent / "data" / "stopwords_de.txt"
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line.lower())
    return frozenset(words)


@dataclass(frozen=True)
class TokenizedDocument:
    doc_id: str
    tokens: tuple[tuple[str, Optional[str], Optional[str]], ...]
    kept_terms: tuple[str, ...]


def normalize_tokens(
    doc: RawDocument,
    annotations: Optional[Sequence[tuple[str, Optional[str], Optional[str]]]] = None,
    stopwords: frozenset[str] = frozenset(),
) -> TokenizedDocument:
    """Normalize one document into its feature-candidate terms.

    A token survives as lowercase(lemma or surface) when that form is at
    least 3 characters, purely alphabetic, and not a stopword. Original
    order is preserved; the full token layer is kept alongside.
    """
    if annotations is None:
        annotations = doc.annotations
    if annotations is None:
        annotations = tuple((surface, None, None) for surface in tokenize(doc.text))
    tokens = tuple((s, l, p.lower() if p else p) for s, l, p in annotations)
    kept = []
    for surface, lemma, _pos in tokens:
        form = (lemma or surface).lower()
        if len(form) >= 3 and form.isalpha() and form not in stopwords:
            kept.append(form)
    return TokenizedDocument(doc_id=doc.id, tokens=tokens, kept_terms=tuple(kept))


@dataclass(frozen=True)
class FeatureConfig:
    min_doc_freq: int = 5
    allowed_pos: Optional[frozenset[str]] = None
    keyword_mode: str = "exact"

    def __post_init__(self) -> None:
        if self.min_doc_freq < 1:
            raise ValueError("min_doc_freq must be >= 1")
        if self.keyword_mode not in ("exact", "substring"):
            raise ValueError(f"unknown keyword_mode {self.keyword_mode!r}")
        if self.allowed_pos is not None:
            object.__setattr__(
                self, "allowed_pos", frozenset(p.lower() for p in self.allowed_pos) or None
            )


@dataclass(frozen=True)
class FeatureSpace:
    """The selected terms F, with the keyword subset K marked by index."""

    terms: tuple[str, ...]
    keyword_indices: frozenset[int]
    doc_freq: tuple[int, ...]
    num_docs: int
    config: FeatureConfig

    def __post_init__(self) -> None:
        assert len(self.terms) == len(set(self.terms))
        assert len(self.doc_freq) == len(self.terms)
        assert all(0 <= i < len(self.terms) for i in self.keyword_indices)

    def __len__(self) -> int:
        return len(self.terms)

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}

    def keywords(self) -> tuple[str, ...]:
        return tuple(self.terms[i] for i in sorted(self.keyword_indices))

    def checksum(self) -> str:
        return hashlib.sha256(self._canonical().encode("utf-8")).hexdigest()

    def _canonical(self) -> str:
        lines = [_FS_HEADER]
        lines.append(f"num_docs={self.num_docs}")
        lines.append(f"min_doc_freq={self.config.min_doc_freq}")
        pos = ",".join(sorted(self.config.allowed_pos)) if self.config.allowed_pos else ""
        lines.append(f"allowed_pos={pos}")
        lines.append(f"keyword_mode={self.config.keyword_mode}")
        for i, (term, df) in enumerate(zip(self.terms, self.doc_freq)):
            flag = 1 if i in self.keyword_indices else 0
            lines.append(f"{term}\t{df}\t{flag}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self._canonical(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "FeatureSpace":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or lines[0] != _FS_HEADER:
            raise ValueError(f"{path}: not a feature-space file")
        meta = {}
        body_start = 1
        for line in lines[1:5]:
            key, _, value = line.partition("=")
            meta[key] = value
            body_start += 1
        pos = frozenset(meta["allowed_pos"].split(",")) if meta["allowed_pos"] else None
        terms, dfs, kw = [], [], set()
        for i, line in enumerate(lines[body_start:]):
            term, df, flag = line.split("\t")
            terms.append(term)
            dfs.append(int(df))
            if flag == "1":
                kw.add(i)
        return cls(
            terms=tuple(terms),
            keyword_indices=frozenset(kw),
            doc_freq=tuple(dfs),
            num_docs=int(meta["num_docs"]),
            config=FeatureConfig(
                min_doc_freq=int(meta["min_doc_freq"]),
                allowed_pos=pos,
                keyword_mode=meta["keyword_mode"],
            ),
        )


def _majority_pos(tag_counts: Counter) -> Optional[str]:
    if not tag_counts:
        return None
    best = max(tag_counts.values())
    return min(t for t, c in tag_counts.items() if c == best)


def build_feature_space(
    corpus: Sequence[TokenizedDocument],
    keywords: KeywordList,
    min_doc_freq: int,
    allowed_pos: Optional[Iterable[str]] = None,
    keyword_mode: str = "exact",
) -> FeatureSpace:
    """Select feature terms by document frequency and POS tag.

    A term qualifies when its doc frequency meets min_doc_freq and, when
    tagged occurrences exist, its majority POS tag is allowed. Keywords
    observed at least once are kept regardless. Terms are ordered by
    descending doc frequency, ties lexicographic.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    config = FeatureConfig(
        min_doc_freq=min_doc_freq,
        allowed_pos=frozenset(allowed_pos) if allowed_pos else None,
        keyword_mode=keyword_mode,
    )
    df: Counter = Counter()
    pos_counts: dict[str, Counter] = {}
    for doc in corpus:
        df.update(set(doc.kept_terms))
        for surface, lemma, pos in doc.tokens:
            if pos is None:
                continue
            form = (lemma or surface).lower()
            pos_counts.setdefault(form, Counter())[pos] += 1

    def pos_ok(term: str) -> bool:
        if config.allowed_pos is None:
            return True
        tag = _majority_pos(pos_counts.get(term, Counter()))
        return tag is None or tag in config.allowed_pos

    selected = {t for t, n in df.items() if n >= config.min_doc_freq and pos_ok(t)}
    selected |= {k for k in keywords.keywords if df[k] > 0}
    if not selected:
        raise EmptyFeatureSpace(
            f"no term passes min_doc_freq={min_doc_freq} with pos={allowed_pos}"
        )
    terms = tuple(sorted(selected, key=lambda t: (-df[t], t)))

    if keyword_mode == "exact":
        kw_idx = frozenset(i for i, t in enumerate(terms) if t in keywords.keywords)
    else:
        kw_idx = frozenset(
            i for i, t in enumerate(terms) if any(k in t for k in keywords.keywords)
        )
    return FeatureSpace(
        terms=terms,
        keyword_indices=kw_idx,
        doc_freq=tuple(df[t] for t in terms),
        num_docs=len(corpus),
        config=config,
    )


@dataclass(frozen=True)
class DocTermMatrix:
    """Sparse document-term matrix over a feature space."""

    matrix: sp.csr_matrix
    doc_ids: tuple[str, ...]
    weighting: str
    feature_space_checksum: str
    empty_rows: frozenset[int]

    def __post_init__(self) -> None:
        assert self.weighting in _WEIGHTINGS
        assert self.matrix.shape[0] == len(self.doc_ids)
        assert (self.matrix.data >= 0).all()

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def vectorize(
    corpus: Sequence[TokenizedDocument], fs: FeatureSpace, weighting: str = "counts"
) -> DocTermMatrix:
    """Bag-of-words rows over fs; terms outside fs contribute nothing.

    TF-IDF is count * ln(N/df) with N and df frozen from the feature
    space's build corpus, so weights do not drift when vectorizing a
    subset or new documents. Rows are not normalized.
    """
    if weighting not in _WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    index = fs.index()
    rows, cols, vals = [], [], []
    for r, doc in enumerate(corpus):
        counts = Counter(index[t] for t in doc.kept_terms if t in index)
        for c, n in sorted(counts.items()):
            rows.append(r)
            cols.append(c)
            vals.append(float(n))
    matrix = sp.csr_matrix(
        (vals, (rows, cols)), shape=(len(corpus), len(fs.terms)), dtype=np.float64
    )
    if weighting == "tfidf":
        idf = np.array(
            [math.log(fs.num_docs / df) if df > 0 else 0.0 for df in fs.doc_freq]
        )
        matrix = sp.csr_matrix(matrix.multiply(idf[None, :]))
        matrix.eliminate_zeros()
    # a row with no stored entries carries no signal for any model
    occupied = set(matrix.nonzero()[0])
    return DocTermMatrix(
        matrix=matrix,
        doc_ids=tuple(d.doc_id for d in corpus),
        weighting=weighting,
        feature_space_checksum=fs.checksum(),
        empty_rows=frozenset(r for r in range(len(corpus)) if r not in occupied),
    )


def save_matrix(m: DocTermMatrix, path: str | Path) -> None:
    """Triplet binary: header, length-prefixed ids, then (row, col, value)."""
    coo = m.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "wb") as fh:
        fh.write(_MTX_MAGIC)
        fh.write(
            struct.pack(
                "<HBIIQ",
                _MTX_VERSION,
                _WEIGHTINGS.index(m.weighting),
                m.matrix.shape[0],
                m.matrix.shape[1],
                coo.nnz,
            )
        )
        checksum = bytes.fromhex(m.feature_space_checksum)
        fh.write(struct.pack("<B", len(checksum)))
        fh.write(checksum)
        for doc_id in m.doc_ids:
            raw = doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
        for i in order:
            fh.write(struct.pack("<IId", coo.row[i], coo.col[i], coo.data[i]))


def load_matrix(path: str | Path) -> DocTermMatrix:
    with open(path, "rb") as fh:
        if fh.read(4) != _MTX_MAGIC:
            raise ValueError(f"{path}: not a matrix file")
        version, wcode, n_docs, n_terms, nnz = struct.unpack("<HBIIQ", fh.read(19))
        if version != _MTX_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        (ck_len,) = struct.unpack("<B", fh.read(1))
        checksum = fh.read(ck_len).hex()
        doc_ids = []
        for _ in range(n_docs):
            (id_len,) = struct.unpack("<H", fh.read(2))
            doc_ids.append(fh.read(id_len).decode("utf-8"))
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz, dtype=np.float64)
        for i in range(nnz):
            rows[i], cols[i], vals[i] = struct.unpack("<IId", fh.read(16))
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n_docs, n_terms))
    occupied = set(np.unique(rows)) if nnz else set()
    return DocTermMatrix(
        matrix=matrix,
        doc_ids=tuple(doc_ids),
        weighting=_WEIGHTINGS[wcode],
        feature_space_checksum=checksum,
        empty_rows=frozenset(r for r in range(n_docs) if r not in occupied),
    )
