"""Evaluation quantities for the relevance classifiers.

Binary precision/recall/F1 of the positive class, the recall-1
all-positive baseline, Cohen's kappa for annotator agreement, main-topic
hit counts, per-hazard breakdowns, and majority voting over three
prediction sets (including ones imported from external CSV files).

Zero-denominator metrics come back as 0 with the metric name recorded in
the report's ``degenerate`` set instead of raising: sweeps legitimately
produce all-negative predictors. Rendered reports round to 3 decimals;
stored values keep full precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .classifier import PredictionSet

PROMINENCE = ("main", "mention", "none")
SPLITS = ("train", "test")


class MissingPrediction(KeyError):
    """Gold documents in the split that the prediction set does not cover."""

    def __init__(self, ids: Sequence[str]):
        self.ids = tuple(sorted(ids))
        preview = ", ".join(self.ids[:5])
        super().__init__(f"{len(self.ids)} gold docs lack predictions: {preview}")


class DegenerateMarginals(ValueError):
    """Chance agreement is 1; kappa is undefined."""


class IdSetMismatch(ValueError):
    """Prediction sets to be ensembled cover different documents."""


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class DuplicateId(ValueError):
    pass


@dataclass(frozen=True)
class GoldLabel:
    doc_id: str
    relevant: int
    prominence: str
    hazard: str
    split: str

    def __post_init__(self) -> None:
        if self.relevant not in (0, 1):
            raise ValueError(f"{self.doc_id}: relevant must be 0 or 1")
        if self.prominence not in PROMINENCE:
            raise ValueError(f"{self.doc_id}: unknown prominence {self.prominence!r}")
        if self.split not in SPLITS:
            raise ValueError(f"{self.doc_id}: unknown split {self.split!r}")
        if (self.prominence == "none") != (self.relevant == 0):
            raise ValueError(
                f"{self.doc_id}: prominence {self.prominence!r} inconsistent "
                f"with relevant={self.relevant}"
            )


@dataclass(frozen=True)
class EvalReport:
    source: str
    split: str
    tp: int
    fp: int
    fn: int
    tn: int
    precision: float
    recall: float
    f1: float
    n_main_correct: int
    degenerate: frozenset[str] = frozenset()
    per_hazard: Mapping[str, "EvalReport"] = field(default_factory=dict)

    @property
    def n_docs(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float, frozenset[str]]:
    degenerate = set()
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        degenerate.add("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        degenerate.add("recall")
    if precision + recall:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.add("f1")
    return precision, recall, f1, frozenset(degenerate)


def _report(source, split, gold, predictions, with_hazards=True) -> EvalReport:
    tp = fp = fn = tn = 0
    n_main_correct = 0
    for g in gold:
        pred = predictions[g.doc_id]
        if pred == 1 and g.relevant == 1:
            tp += 1
        elif pred == 1:
            fp += 1
        elif g.relevant == 1:
            fn += 1
        else:
            tn += 1
        if g.prominence == "main" and pred == 1:
            n_main_correct += 1
    precision, recall, f1, degenerate = _prf(tp, fp, fn)
    per_hazard = {}
    if with_hazards:
        for hz in sorted({g.hazard for g in gold}):
            per_hazard[hz] = _report(
                source, split, [g for g in gold if g.hazard == hz],
                predictions, with_hazards=False,
            )
    return EvalReport(
        source=source,
        split=split,
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
        precision=precision,
        recall=recall,
        f1=f1,
        n_main_correct=n_main_correct,
        degenerate=degenerate,
        per_hazard=per_hazard,
    )


def evaluate(pred: PredictionSet, gold: Sequence[GoldLabel], split: str) -> EvalReport:
    """Score a prediction set against the gold labels of one split."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}")
    in_split = [g for g in gold if g.split == split]
    if not in_split:
        raise ValueError(f"no gold labels in split {split!r}")
    missing = [g.doc_id for g in in_split if g.doc_id not in pred.predictions]
    if missing:
        raise MissingPrediction(missing)
    return _report(pred.source, split, in_split, pred.predictions)


def baseline(gold: Sequence[GoldLabel], split: str) -> EvalReport:
    """The all-positive predictor: recall 1, precision = positive rate."""
    ids = {g.doc_id for g in gold if g.split == split}
    if not ids:
        raise ValueError(f"no gold labels in split {split!r}")
    pred = PredictionSet(source="baseline", predictions={d: 1 for d in ids})
    return evaluate(pred, gold, split)


def cohen_kappa(a: Mapping[str, int], b: Mapping[str, int]) -> tuple[float, float]:
    """Observed agreement and chance-corrected kappa of two labelings."""
    if set(a) != set(b):
        raise IdSetMismatch("label sets cover different ids")
    if not a:
        raise ValueError("empty label sets")
    n = len(a)
    ids = sorted(a)
    p_o = sum(1 for d in ids if a[d] == b[d]) / n
    classes = set(a.values()) | set(b.values())
    p_e = sum(
        (sum(1 for d in ids if a[d] == c) / n) * (sum(1 for d in ids if b[d] == c) / n)
        for c in classes
    )
    if p_e >= 1.0 - 1e-12:
        raise DegenerateMarginals("both labelings are constant and identical")
    kappa = (p_o - p_e) / (1 - p_e)
    return p_o, kappa


def majority_vote(preds: Sequence[PredictionSet]) -> PredictionSet:
    """Per-document majority label over exactly three prediction sets."""
    if len(preds) != 3:
        raise ValueError(f"majority vote needs exactly 3 prediction sets, got {len(preds)}")
    ids = set(preds[0].predictions)
    for p in preds[1:]:
        if set(p.predictions) != ids:
            raise IdSetMismatch("prediction sets cover different documents")
    merged = {
        d: 1 if sum(p.predictions[d] for p in preds) >= 2 else 0 for d in ids
    }
    return PredictionSet(source="majority", predictions=merged)


# --------------------------------------------------------------------------
# File formats


def import_external(path: str | Path, source: str) -> PredictionSet:
    """Read predictions from a CSV with header doc_id,label (extra columns ignored)."""
    predictions: dict[str, int] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["doc_id", "label"]:
            raise ParseError(path, 1, "expected header starting doc_id,label")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise ParseError(path, line_no, "expected at least 2 columns")
            doc_id = row[0].strip()
            if not doc_id:
                raise ParseError(path, line_no, "empty doc_id")
            if row[1].strip() not in ("0", "1"):
                raise ParseError(path, line_no, f"label must be 0 or 1, got {row[1]!r}")
            if doc_id in predictions:
                raise DuplicateId(f"{path}:{line_no}: duplicate doc_id {doc_id!r}")
            predictions[doc_id] = int(row[1])
    return PredictionSet(source=source, predictions=predictions)


_GOLD_HEADER = ["doc_id", "relevant", "prominence", "hazard", "split"]


def load_gold(path: str | Path) -> tuple[GoldLabel, ...]:
    out = []
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _GOLD_HEADER:
            raise ParseError(path, 1, f"expected header {','.join(_GOLD_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(path, line_no, "expected 5 columns")
            if row[0] in seen:
                raise DuplicateId(f"{path}:{line_no}: duplicate doc_id {row[0]!r}")
            seen.add(row[0])
            try:
                out.append(
                    GoldLabel(
                        doc_id=row[0],
                        relevant=int(row[1]),
                        prominence=row[2],
                        hazard=row[3],
                        split=row[4],
                    )
                )
            except ValueError as exc:
                raise ParseError(path, line_no, str(exc)) from exc
    return tuple(out)


def save_gold(gold: Sequence[GoldLabel], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_GOLD_HEADER)
        for g in gold:
            writer.writerow([g.doc_id, g.relevant, g.prominence, g.hazard, g.split])


def report_to_dict(report: EvalReport) -> dict:
    doc = {
        "source": report.source,
        "split": report.split,
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "tn": report.tn,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "n_main_correct": report.n_main_correct,
        "degenerate": sorted(report.degenerate),
    }
    if report.per_hazard:
        doc["per_hazard"] = {
            hz: report_to_dict(sub) for hz, sub in sorted(report.per_hazard.items())
        }
    return doc


def save_report_json(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")


def render_report(report: EvalReport) -> str:
    """Human-readable table, metrics rounded to 3 decimals."""
    rows = [("all", report)] + sorted(report.per_hazard.items())
    lines = [
        f"source: {report.source}   split: {report.split}   docs: {report.n_docs}",
        f"{'hazard':<12} {'P':>6} {'R':>6} {'F1':>6} {'tp':>5} {'fp':>5} {'fn':>5} {'tn':>5} {'main+':>6}",
    ]
    for name, r in rows:
        lines.append(
            f"{name:<12} {r.precision:>6.3f} {r.recall:>6.3f} {r.f1:>6.3f} "
            f"{r.tp:>5} {r.fp:>5} {r.fn:>5} {r.tn:>5} {r.n_main_correct:>6}"
        )
    if report.degenerate:
        lines.append(f"degenerate: {', '.join(sorted(report.degenerate))}")
    return "\n".join(lines)


def export_theta_sensitivity(
    model,
    topic: int,
    gold: Sequence[GoldLabel],
    path: str | Path,
    split: Optional[str] = None,
) -> None:
    """Per-document probability of one topic vs gold label, as CSV."""
    if not (0 <= topic < model.num_topics):
        raise ValueError(f"topic {topic} out of range")
    index = model.doc_index()
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["doc_id", "topic_probability", "gold_label"])
        for g in gold:
            if split is not None and g.split != split:
                continue
            if g.doc_id not in index:
                continue
            prob = float(model.p_topic[index[g.doc_id], topic])
            writer.writerow([g.doc_id, f"{prob:.10f}", g.relevant])
