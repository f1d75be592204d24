"""MinHash near-duplicate detection.

News wires get reprinted across outlets with light edits, so the same
story would otherwise enter topic-model training many times and could be
annotated twice. Signatures estimate Jaccard similarity over token
3-shingles; documents at estimated similarity >= 0.8 are grouped and one
representative per group is kept for training and annotation sampling.
Classification itself still runs over every document.

Candidate pairs come from banded LSH (32 bands x 4 rows over 128
hashes), so grouping avoids the full pairwise scan; every candidate is
verified against the signature estimate before an edge is added.
"""

from __future__ import annotations

import csv
import hashlib
import random
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

_SIG_MAGIC = b"TSIG"
_SIG_VERSION = 1

DEFAULT_NUM_HASHES = 128
DEFAULT_SHINGLE_SIZE = 3
DEFAULT_THRESHOLD = 0.8
LSH_BANDS = 32
LSH_ROWS = 4


class EmptyShingleSet(ValueError):
    """Cannot sign a document with no shingles (too short)."""


class SignatureMismatch(ValueError):
    """Signatures from different configurations cannot be compared."""


@dataclass(frozen=True)
class MinHashSignature:
    doc_id: str
    values: tuple[int, ...]
    seed: int
    num_hashes: int

    def __post_init__(self) -> None:
        assert len(self.values) == self.num_hashes


@dataclass(frozen=True)
class DuplicateGroups:
    """A partition of the input ids; every id is in exactly one group."""

    groups: tuple[frozenset[str], ...]
    representatives: tuple[str, ...]

    def __post_init__(self) -> None:
        assert len(self.groups) == len(self.representatives)
        for rep, members in zip(self.representatives, self.groups):
            assert rep in members

    def representative_ids(self) -> set[str]:
        return set(self.representatives)

    def representative_of(self, doc_id: str) -> str:
        for rep, members in zip(self.representatives, self.groups):
            if doc_id in members:
                return rep
        raise KeyError(doc_id)


def shingles(tokens: Sequence[str], n: int = DEFAULT_SHINGLE_SIZE) -> set[str]:
    """All contiguous n-token joins; empty when the text is shorter than n."""
    if n < 1:
        raise ValueError("shingle size must be >= 1")
    return {" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}


def _hash_family(num_hashes: int, seed: int) -> np.ndarray:
    # Mersenne Twister keeps the family stable across library versions
    rng = random.Random(seed)
    return np.array([rng.randrange(1 << 64) for _ in range(num_hashes)], dtype=np.uint64)


def _base_hashes(sh: Iterable[str]) -> np.ndarray:
    return np.array(
        [
            int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "little")
            for s in sh
        ],
        dtype=np.uint64,
    )


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; a bijection on 64-bit ints, so each xor key
    # yields a distinct permutation of the base-hash space
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def signature(sh: set[str], num_hashes: int = DEFAULT_NUM_HASHES, seed: int = 1) -> "MinHashSignature":
    if not sh:
        raise EmptyShingleSet("document has no shingles")
    return _signature_with_family(sh, _hash_family(num_hashes, seed), seed, doc_id="")


def _signature_with_family(
    sh: set[str], keys: np.ndarray, seed: int, doc_id: str
) -> MinHashSignature:
    base = _base_hashes(sorted(sh))
    # (num_hashes, |sh|) permuted values; min over shingles per hash
    permuted = _mix64(keys[:, None] ^ base[None, :])
    values = permuted.min(axis=1)
    return MinHashSignature(
        doc_id=doc_id, values=tuple(int(v) for v in values), seed=seed, num_hashes=len(keys)
    )


def sign_corpus(
    docs: Iterable[tuple[str, Sequence[str]]],
    num_hashes: int = DEFAULT_NUM_HASHES,
    seed: int = 1,
    shingle_size: int = DEFAULT_SHINGLE_SIZE,
) -> list[MinHashSignature]:
    """Signatures for (doc_id, tokens) pairs, hash family computed once.

    Documents too short to form a single shingle are skipped; they cannot
    be near-duplicates of anything at n-gram granularity.
    """
    family = _hash_family(num_hashes, seed)
    out = []
    for doc_id, tokens in docs:
        sh = shingles(tokens, shingle_size)
        if not sh:
            continue
        sig = _signature_with_family(sh, family, seed, doc_id)
        out.append(sig)
    return out


def estimate_jaccard(a: MinHashSignature, b: MinHashSignature) -> float:
    """Fraction of agreeing signature slots, an unbiased Jaccard estimate."""
    if a.num_hashes != b.num_hashes or a.seed != b.seed:
        raise SignatureMismatch(
            f"({a.num_hashes} hashes, seed {a.seed}) vs ({b.num_hashes} hashes, seed {b.seed})"
        )
    va = np.asarray(a.values, dtype=np.uint64)
    vb = np.asarray(b.values, dtype=np.uint64)
    return float(np.mean(va == vb))


class _UnionFind:
    def __init__(self, n: int) -> None:
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def group_duplicates(
    corpus: Sequence[MinHashSignature],
    threshold: float = DEFAULT_THRESHOLD,
    bands: int = LSH_BANDS,
    rows: int = LSH_ROWS,
) -> DuplicateGroups:
    """Partition ids into near-duplicate groups at the given threshold.

    Groups are connected components over verified candidate pairs from
    banded LSH. At 128 hashes the 32x4 banding has an S-curve midpoint
    near 0.42, so pairs at 0.8 are caught with probability > 0.999; every
    banding hit is still verified against estimate_jaccard before use.
    The representative of a group is its lexicographically smallest id.
    """
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    if not corpus:
        return DuplicateGroups(groups=(), representatives=())
    num_hashes = corpus[0].num_hashes
    if bands * rows != num_hashes:
        raise ValueError(f"bands*rows = {bands * rows} != num_hashes = {num_hashes}")
    ids = [s.doc_id for s in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate doc_ids among signatures")

    uf = _UnionFind(len(corpus))
    checked: set[tuple[int, int]] = set()
    for band in range(bands):
        lo, hi = band * rows, (band + 1) * rows
        buckets: dict[tuple[int, ...], list[int]] = {}
        for i, sig in enumerate(corpus):
            buckets.setdefault(tuple(sig.values[lo:hi]), []).append(i)
        for members in buckets.values():
            for j in range(1, len(members)):
                for k in range(j):
                    pair = (members[k], members[j])
                    if pair in checked:
                        continue
                    checked.add(pair)
                    if estimate_jaccard(corpus[pair[0]], corpus[pair[1]]) >= threshold:
                        uf.union(*pair)

    components: dict[int, set[str]] = {}
    for i, sig in enumerate(corpus):
        components.setdefault(uf.find(i), set()).add(sig.doc_id)
    groups = sorted((frozenset(g) for g in components.values()), key=lambda g: min(g))
    return DuplicateGroups(
        groups=tuple(groups), representatives=tuple(min(g) for g in groups)
    )


# --------------------------------------------------------------------------
# Persistence


def save_signatures(sigs: Sequence[MinHashSignature], path: str | Path) -> None:
    """Binary signature file: magic, version, num_hashes, seed, records.

    Each record is a u16 length-prefixed UTF-8 id followed by num_hashes
    u64 values (the id prefix is the one variable-width field).
    """
    if not sigs:
        raise ValueError("nothing to save")
    num_hashes, seed = sigs[0].num_hashes, sigs[0].seed
    with open(path, "wb") as fh:
        fh.write(_SIG_MAGIC)
        fh.write(struct.pack("<HIq", _SIG_VERSION, num_hashes, seed))
        for sig in sigs:
            if sig.num_hashes != num_hashes or sig.seed != seed:
                raise SignatureMismatch("mixed configurations in one file")
            raw_id = sig.doc_id.encode("utf-8")
            fh.write(struct.pack("<H", len(raw_id)))
            fh.write(raw_id)
            fh.write(struct.pack(f"<{num_hashes}Q", *sig.values))


def load_signatures(path: str | Path) -> list[MinHashSignature]:
    with open(path, "rb") as fh:
        if fh.read(4) != _SIG_MAGIC:
            raise ValueError(f"{path}: not a signature file")
        version, num_hashes, seed = struct.unpack("<HIq", fh.read(14))
        if version != _SIG_VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        out = []
        while True:
            raw_len = fh.read(2)
            if not raw_len:
                break
            (id_len,) = struct.unpack("<H", raw_len)
            doc_id = fh.read(id_len).decode("utf-8")
            values = struct.unpack(f"<{num_hashes}Q", fh.read(8 * num_hashes))
            out.append(MinHashSignature(doc_id, values, seed, num_hashes))
    return out


def save_groups(groups: DuplicateGroups, path: str | Path) -> None:
    """CSV rows (representative_id, member_id), one per membership."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["representative_id", "member_id"])
        for rep, members in zip(groups.representatives, groups.groups):
            for member in sorted(members):
                writer.writerow([rep, member])


def load_groups(path: str | Path) -> DuplicateGroups:
    by_rep: dict[str, set[str]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["representative_id", "member_id"]:
            raise ValueError(f"{path}: unexpected header {header}")
        for rep, member in reader:
            by_rep.setdefault(rep, set()).add(member)
    reps = sorted(by_rep)
    return DuplicateGroups(
        groups=tuple(frozenset(by_rep[r]) for r in reps), representatives=tuple(reps)
    )
