"""Document ingestion, cleaning, and rule-based inclusion filters.

Raw keyword-retrieved news arrives as JSONL. This module strips leftover
markup, splits documents that are concatenations of several agency wires,
drops exact duplicates, and applies the inclusion rules that weed out
local news, too-short/too-long items, noisy OCR, and documents whose only
hazard keyword is an "intruder" (a word derived from a keyword but
unrelated to the hazard, e.g. a floodlight matched by a flood query).

All per-document operations are pure; ingest output is sorted by id so
runs are reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

log = logging.getLogger(__name__)

DEFAULT_AGENCY_MARKERS = frozenset({"dpa", "afp", "ap", "rtr", "epd", "kna"})

_MARKUP_RE = re.compile(r"<.*?>", re.DOTALL)
_FIRST_TOKEN_RE = re.compile(r"^\s*([^\s.]+)\s*\.")


class MissingGazetteer(ValueError):
    """Location requirement is on but no gazetteer entries were supplied."""


@dataclass(frozen=True)
class RawDocument:
    """One news item as retrieved from the database export.

    ``annotations`` optionally carries pre-computed (surface, lemma, pos)
    triples from an external tagger; lemma and pos may be None.
    """

    id: str
    text: str
    outlet: str = ""
    date: str = ""
    ressort: Optional[str] = None
    hazard: str = ""
    annotations: Optional[tuple[tuple[str, Optional[str], Optional[str]], ...]] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text:
            raise ValueError(f"document {self.id!r} has empty text")

    def record_hash(self) -> str:
        """Hash over all metadata fields, used for exact-duplicate removal."""
        payload = json.dumps(
            [self.text, self.outlet, self.date, self.ressort, self.hazard],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class KeywordList:
    """Hazard query keywords plus known intruder words.

    Keywords match case-insensitively as substrings of tokens (German
    compounds), intruders match whole tokens only. Both sets are stored
    lowercase; intruders may not overlap keywords.
    """

    hazard: str
    keywords: frozenset[str]
    intruders: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "keywords", frozenset(k.lower() for k in self.keywords))
        object.__setattr__(self, "intruders", frozenset(i.lower() for i in self.intruders))
        if not self.keywords:
            raise ValueError(f"keyword list for {self.hazard!r} is empty")
        clash = self.keywords & self.intruders
        if clash:
            raise ValueError(f"intruders overlap keywords: {sorted(clash)}")

    @classmethod
    def from_json(cls, path: str | Path) -> "KeywordList":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            hazard=raw["hazard"],
            keywords=frozenset(raw["keywords"]),
            intruders=frozenset(raw.get("intruders", [])),
        )


@dataclass(frozen=True)
class Gazetteer:
    """Location word lists for the internationality filters.

    Countries and cities match whole tokens; nationalities match as token
    prefixes so that adjective inflections ("französischen") still hit.
    """

    countries: frozenset[str] = frozenset()
    nationalities: frozenset[str] = frozenset()
    cities: frozenset[str] = frozenset()

    def __bool__(self) -> bool:
        return bool(self.countries or self.nationalities or self.cities)

    @classmethod
    def default(cls) -> "Gazetteer":
        path = Path(__file__).parent / "data" / "gazetteer_de.json"
        return cls.from_json(path)

    @classmethod
    def from_json(cls, path: str | Path) -> "Gazetteer":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            countries=frozenset(w.lower() for w in raw.get("countries", [])),
            nationalities=frozenset(w.lower() for w in raw.get("nationalities", [])),
            cities=frozenset(w.lower() for w in raw.get("cities", [])),
        )

    def mentions_location(self, tokens: Sequence[str]) -> bool:
        for tok in tokens:
            if tok in self.countries or tok in self.cities:
                return True
            # inflected nationality adjectives ("französische", "-ischen")
            for nat in self.nationalities:
                if tok.startswith(nat):
                    return True
        return False


@dataclass(frozen=True)
class FilterRules:
    """Thresholds and switches for the inclusion filters."""

    min_tokens: int = 30
    max_tokens: int = 1700
    max_nonalpha_ratio: float = 0.11
    forbidden_ressort_substrings: tuple[str, ...] = ("lokal",)
    require_location: bool = True
    location_gazetteer: Gazetteer = field(default_factory=Gazetteer)
    agency_markers: frozenset[str] = DEFAULT_AGENCY_MARKERS

    def __post_init__(self) -> None:
        if not (0 < self.min_tokens < self.max_tokens):
            raise ValueError("need 0 < min_tokens < max_tokens")
        if not (0 < self.max_nonalpha_ratio < 1):
            raise ValueError("max_nonalpha_ratio must be in (0, 1)")

    @classmethod
    def from_json(cls, path: str | Path) -> "FilterRules":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if "gazetteer" in raw:
            g = raw["gazetteer"]
            gaz = Gazetteer(
                countries=frozenset(w.lower() for w in g.get("countries", [])),
                nationalities=frozenset(w.lower() for w in g.get("nationalities", [])),
                cities=frozenset(w.lower() for w in g.get("cities", [])),
            )
        elif "gazetteer_path" in raw:
            gaz = Gazetteer.from_json(raw["gazetteer_path"])
        else:
            gaz = Gazetteer.default()
        return cls(
            min_tokens=raw.get("min_tokens", 30),
            max_tokens=raw.get("max_tokens", 1700),
            max_nonalpha_ratio=raw.get("max_nonalpha_ratio", 0.11),
            forbidden_ressort_substrings=tuple(
                raw.get("forbidden_ressort_substrings", ["lokal"])
            ),
            require_location=raw.get("require_location", True),
            location_gazetteer=gaz,
            agency_markers=frozenset(
                m.lower() for m in raw.get("agency_markers", DEFAULT_AGENCY_MARKERS)
            ),
        )


class FilterReason(str, Enum):
    """Rejection codes, one per inclusion rule."""

    NO_KEYWORD = "NoKeyword"
    INTRUDER_ONLY = "IntruderOnly"
    FORBIDDEN_RESSORT = "ForbiddenRessort"
    TOO_SHORT = "TooShort"
    TOO_LONG = "TooLong"
    NON_ALPHA_RATIO = "NonAlphaRatio"
    NO_LOCATION = "NoLocation"
    CITY_FIRST_TOKEN = "CityFirstToken"


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reasons: tuple[FilterReason, ...]

    def __post_init__(self) -> None:
        assert self.keep == (not self.reasons)


def strip_markup(text: str) -> str:
    """Remove leftover ``<...>`` markup fragments, shortest match first."""
    return _MARKUP_RE.sub("", text)


def split_concatenated(text: str, agency_markers: Iterable[str] = DEFAULT_AGENCY_MARKERS) -> list[str]:
    """Split a text at parenthesized news-agency markers like ``(dpa)``.

    Database exports sometimes glue several wire items into one record,
    each closed by its agency abbreviation. Each returned segment keeps
    the marker that closed it; the segments concatenate back to the
    input exactly. Text after the final marker becomes a last segment of
    its own; with no marker the text is returned whole.
    """
    markers = sorted({m.lower() for m in agency_markers}, key=len, reverse=True)
    if not markers:
        return [text]
    pattern = re.compile(
        r"\((?:" + "|".join(re.escape(m) for m in markers) + r")\)", re.IGNORECASE
    )
    segments: list[str] = []
    start = 0
    for match in pattern.finditer(text):
        segments.append(text[start : match.end()])
        start = match.end()
    if start < len(text):
        segments.append(text[start:])
    return segments if segments else [text]


def keyword_matches(token: str, kw: KeywordList) -> bool:
    """True if the token counts as a genuine keyword occurrence.

    Keywords match as substrings (compound nouns), but a token that is
    itself a known intruder never counts, no matter what it contains.
    """
    if token in kw.intruders:
        return False
    return any(k in token for k in kw.keywords)


def contains_any_keyword(tokens: Sequence[str], kw: KeywordList) -> bool:
    """Raw keyword presence, intruder occurrences included.

    This mirrors what the database query matched on, so a document whose
    only hit is an intruder still "contains" the keyword here and gets
    rejected by the intruder rule instead, keeping rejection reasons
    disjoint.
    """
    return any(any(k in tok for k in kw.keywords) for tok in tokens)


def intruder_only(tokens: Sequence[str], kw: KeywordList) -> bool:
    """True iff an intruder occurs and no genuine keyword occurrence does."""
    has_intruder = any(tok in kw.intruders for tok in tokens)
    if not has_intruder:
        return False
    return not any(keyword_matches(tok, kw) for tok in tokens)


def nonalpha_ratio(text: str) -> float:
    """Share of non-alphabetic characters among the non-whitespace ones.

    Whitespace is neutral: ordinary prose is about one-sixth spaces, so
    counting them would push every text over any sane bound.
    """
    relevant = [c for c in text if not c.isspace()]
    if not relevant:
        return 1.0
    non_alpha = sum(1 for c in relevant if not c.isalpha())
    return non_alpha / len(relevant)


def _city_dateline(text: str, cities: frozenset[str]) -> bool:
    match = _FIRST_TOKEN_RE.match(text)
    return bool(match) and match.group(1).lower() in cities


def apply_filters(
    doc: RawDocument,
    tokens: Sequence[str],
    kw: KeywordList,
    rules: FilterRules,
) -> FilterVerdict:
    """Run all inclusion rules over one document.

    ``tokens`` must be the lowercase token list produced by the features
    tokenizer from ``doc.text``. Every failed rule contributes its own
    reason code, so recall loss stays auditable per rule.
    """
    if rules.require_location and not rules.location_gazetteer:
        raise MissingGazetteer(
            "require_location is set but the gazetteer has no entries"
        )

    reasons: list[FilterReason] = []

    if not contains_any_keyword(tokens, kw):
        reasons.append(FilterReason.NO_KEYWORD)
    elif intruder_only(tokens, kw):
        reasons.append(FilterReason.INTRUDER_ONLY)

    if doc.ressort:
        ressort = doc.ressort.lower()
        if any(bad in ressort for bad in rules.forbidden_ressort_substrings):
            reasons.append(FilterReason.FORBIDDEN_RESSORT)

    if len(tokens) < rules.min_tokens:
        reasons.append(FilterReason.TOO_SHORT)
    elif len(tokens) > rules.max_tokens:
        reasons.append(FilterReason.TOO_LONG)

    if nonalpha_ratio(doc.text) >= rules.max_nonalpha_ratio:
        reasons.append(FilterReason.NON_ALPHA_RATIO)

    if rules.require_location and not rules.location_gazetteer.mentions_location(tokens):
        reasons.append(FilterReason.NO_LOCATION)

    if rules.location_gazetteer.cities:
        if _city_dateline(doc.text, rules.location_gazetteer.cities):
            reasons.append(FilterReason.CITY_FIRST_TOKEN)
    else:
        log.warning("gazetteer has no city list; dateline rule skipped")

    return FilterVerdict(keep=not reasons, reasons=tuple(reasons))


# --------------------------------------------------------------------------
# JSONL ingest


def _doc_from_record(record: dict) -> RawDocument:
    annotations = None
    if record.get("tokens"):
        annotations = tuple(
            (t[0], t[1] if len(t) > 1 else None, t[2] if len(t) > 2 else None)
            for t in record["tokens"]
        )
    return RawDocument(
        id=str(record["id"]),
        text=record["text"],
        outlet=record.get("outlet", ""),
        date=record.get("date", ""),
        ressort=record.get("ressort"),
        hazard=record.get("hazard", ""),
        annotations=annotations,
    )


def load_jsonl(path: str | Path) -> list[RawDocument]:
    """Read documents from JSONL, one object per line."""
    docs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                docs.append(_doc_from_record(json.loads(line)))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad document record: {exc}") from exc
    ids = [d.id for d in docs]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate document ids in {path}: {dupes[:5]}")
    return docs


def save_jsonl(docs: Iterable[RawDocument], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            record = {
                "id": doc.id,
                "text": doc.text,
                "outlet": doc.outlet,
                "date": doc.date,
                "ressort": doc.ressort,
                "hazard": doc.hazard,
            }
            if doc.annotations is not None:
                record["tokens"] = [list(t) for t in doc.annotations]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def clean_and_split(docs: Iterable[RawDocument], rules: FilterRules) -> list[RawDocument]:
    """Strip markup, split concatenated wires, and drop exact duplicates.

    Split segments get ids ``{id}.s{n}``. Documents whose every metadata
    field matches an earlier one are dropped (same text from a different
    outlet or date is kept; those count separately toward attention).
    Output is sorted by id.
    """
    seen_hashes: set[str] = set()
    out: list[RawDocument] = []
    for doc in docs:
        h = doc.record_hash()
        if h in seen_hashes:
            continue
        seen_hashes.add(h)
        text = strip_markup(doc.text)
        if not text.strip():
            continue
        segments = split_concatenated(text, rules.agency_markers)
        if len(segments) == 1:
            out.append(
                RawDocument(doc.id, text, doc.outlet, doc.date, doc.ressort,
                            doc.hazard, doc.annotations)
            )
        else:
            for i, seg in enumerate(segments):
                if not seg.strip():
                    continue
                # token annotations cannot be carried across a text split
                out.append(
                    RawDocument(f"{doc.id}.s{i}", seg, doc.outlet, doc.date,
                                doc.ressort, doc.hazard, None)
                )
    out.sort(key=lambda d: d.id)
    return out


def write_rejection_log(
    rows: Iterable[tuple[str, Sequence[FilterReason]]], path: str | Path
) -> None:
    """CSV of rejected ids with their reason codes, ';'-joined."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "reasons"])
        for doc_id, reasons in rows:
            writer.writerow([doc_id, ";".join(r.value for r in reasons)])
