"""Matching-based detection metrics plus the area-based IOU-cutoff analysis.

Matching is greedy by descending IOU and one-to-one per page/class. AP
follows the COCO convention: score-ranked matching, 101-point interpolated
precision, averaged over IOU thresholds 0.50..0.95 in steps of 0.05.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box, excess_lost, iou

DEFAULT_THRESHOLDS = (0.1, 0.6, 0.8, 0.9)
COCO_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


class NoCompliantPairs(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    box: Box
    cls: str
    page_id: str = ""


@dataclass(frozen=True)
class ScoredBox:
    box: Box
    cls: str
    score: float = 1.0
    page_id: str = ""


@dataclass(frozen=True)
class MatchRecord:
    outcome: str  # "TP" | "FP" | "FN"
    iou: float = 0.0
    truth: GroundTruth | None = None
    found: ScoredBox | None = None


def match(truths: list[GroundTruth], founds: list[ScoredBox], iou_thresh: float) -> list[MatchRecord]:
    """Greedy one-to-one matching by descending IOU for one page and class."""
    pairs = []
    for ti, t in enumerate(truths):
        for fi, f in enumerate(founds):
            v = iou(t.box, f.box)
            if v >= iou_thresh:
                pairs.append((v, ti, fi))
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used_t: set[int] = set()
    used_f: set[int] = set()
    records = []
    for v, ti, fi in pairs:
        if ti in used_t or fi in used_f:
            continue
        used_t.add(ti)
        used_f.add(fi)
        records.append(MatchRecord("TP", iou=v, truth=truths[ti], found=founds[fi]))
    for fi, f in enumerate(founds):
        if fi not in used_f:
            records.append(MatchRecord("FP", found=f))
    for ti, t in enumerate(truths):
        if ti not in used_t:
            records.append(MatchRecord("FN", truth=t))
    return records


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def add(self, records: list[MatchRecord]):
        for r in records:
            if r.outcome == "TP":
                self.tp += 1
            elif r.outcome == "FP":
                self.fp += 1
            else:
                self.fn += 1


def prf(counts: Counts) -> tuple[float, float, float, bool]:
    """(precision, recall, f1, empty_flag); an empty page scores (1,1,1)."""
    if counts.tp == counts.fp == counts.fn == 0:
        return (1.0, 1.0, 1.0, True)
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return (precision, recall, f1, False)


def _ap_at_threshold(truths: list[GroundTruth], founds: list[ScoredBox], thresh: float) -> float:
    """101-point interpolated AP with COCO-style score-ranked matching."""
    n_truth = len(truths)
    if n_truth == 0:
        return 0.0
    order = sorted(range(len(founds)), key=lambda i: (-founds[i].score, i))
    matched: set[int] = set()
    tp_flags = []
    for fi in order:
        best_iou, best_ti = 0.0, -1
        for ti, t in enumerate(truths):
            if ti in matched:
                continue
            v = iou(t.box, founds[fi].box)
            if v > best_iou:
                best_iou, best_ti = v, ti
        if best_ti >= 0 and best_iou >= thresh:
            matched.add(best_ti)
            tp_flags.append(True)
        else:
            tp_flags.append(False)
    precisions, recalls = [], []
    tp = fp = 0
    for flag in tp_flags:
        tp += flag
        fp += not flag
        precisions.append(tp / (tp + fp))
        recalls.append(tp / n_truth)
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        best = max((p for p, rec in zip(precisions, recalls) if rec >= r - 1e-12), default=0.0)
        ap += best
    return ap / 101.0


def coco_ap(truths: list[GroundTruth], founds: list[ScoredBox]) -> float:
    """Mean AP over IOU thresholds 0.50:0.95:0.05 for one class."""
    return float(np.mean([_ap_at_threshold(truths, founds, t) for t in COCO_THRESHOLDS]))


@dataclass(frozen=True)
class CutoffAnalysis:
    cutoff: float
    n_pairs: int
    n_compliant: int
    rows: tuple[tuple[float, float, float], ...]  # (iou, excess_frac, lost_frac)


def excess_lost_analysis(
    pairs: list[tuple[Box, Box]],
    excess_cut: float = 0.10,
    lost_cut: float = 0.05,
    percentile: float = 10.0,
    mode: str = "percentile_of_compliant",
) -> CutoffAnalysis:
    """Derive the "highly localized" IOU cutoff from matched true/found pairs.

    Default reading: the given percentile of IOU among pairs satisfying both
    area cuts. mode="compliance_threshold" instead returns the largest IOU t
    such that at least (100-percentile)% of pairs with IOU >= t comply.
    """
    rows = [
        (ap.iou, ap.excess_frac, ap.lost_frac)
        for ap in (excess_lost(t, f) for t, f in pairs)
    ]
    compliant = [r for r in rows if r[1] <= excess_cut and r[2] <= lost_cut]
    if not compliant:
        raise NoCompliantPairs("no pairs satisfy the excess/lost cuts")
    if mode == "percentile_of_compliant":
        cutoff = float(np.percentile([r[0] for r in compliant], percentile))
    elif mode == "compliance_threshold":
        ious = sorted({r[0] for r in rows})
        cutoff = ious[-1]
        target = (100.0 - percentile) / 100.0
        for t in ious:
            above = [r for r in rows if r[0] >= t]
            ok = [r for r in above if r[1] <= excess_cut and r[2] <= lost_cut]
            if above and len(ok) / len(above) >= target:
                cutoff = t
                break
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return CutoffAnalysis(
        cutoff=cutoff, n_pairs=len(rows), n_compliant=len(compliant), rows=tuple(rows)
    )


@dataclass
class EvalReport:
    per_class: dict = field(default_factory=dict)  # cls -> thresh -> metrics dict
    ap: dict = field(default_factory=dict)  # cls -> AP
    per_decade: dict = field(default_factory=dict)  # decade -> cls -> f1 (at first thresh)

    def to_json(self) -> str:
        return json.dumps(
            {"per_class": self.per_class, "coco_ap": self.ap, "per_decade": self.per_decade},
            indent=1,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["class", "iou_thresh", "tp", "fp", "fn", "precision", "recall", "f1"])
        for cls in sorted(self.per_class):
            for thresh in sorted(self.per_class[cls]):
                m = self.per_class[cls][thresh]
                writer.writerow(
                    [cls, thresh, m["tp"], m["fp"], m["fn"],
                     f"{m['precision']:.4f}", f"{m['recall']:.4f}", f"{m['f1']:.4f}"]
                )
        return buf.getvalue()


def report(
    truths: list[GroundTruth],
    founds: list[ScoredBox],
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
    years: dict[str, int] | None = None,
) -> EvalReport:
    """Aggregate matching metrics per class/threshold (and decade, with years).

    Matching runs per page and class; pages are identified by page_id.
    """
    classes = sorted({t.cls for t in truths} | {f.cls for f in founds})
    pages = sorted({t.page_id for t in truths} | {f.page_id for f in founds})
    rep = EvalReport()
    for cls in classes:
        rep.per_class[cls] = {}
        for thresh in thresholds:
            counts = Counts()
            for pid in pages:
                counts.add(
                    match(
                        [t for t in truths if t.cls == cls and t.page_id == pid],
                        [f for f in founds if f.cls == cls and f.page_id == pid],
                        thresh,
                    )
                )
            precision, recall, f1, empty = prf(counts)
            rep.per_class[cls][thresh] = {
                "tp": counts.tp, "fp": counts.fp, "fn": counts.fn,
                "precision": precision, "recall": recall, "f1": f1, "empty": empty,
            }
        rep.ap[cls] = coco_ap([t for t in truths if t.cls == cls],
                              [f for f in founds if f.cls == cls])
    if years:
        decades = defaultdict(set)
        for pid in pages:
            year = years.get(pid)
            decade = "unknown" if year is None else f"{(year // 10) * 10}s"
            decades[decade].add(pid)
        for decade in sorted(decades):
            rep.per_decade[decade] = {}
            for cls in classes:
                counts = Counts()
                for pid in decades[decade]:
                    counts.add(
                        match(
                            [t for t in truths if t.cls == cls and t.page_id == pid],
                            [f for f in founds if f.cls == cls and f.page_id == pid],
                            thresholds[0],
                        )
                    )
                rep.per_decade[decade][cls] = prf(counts)[2]
    return rep


# --- ground-truth readers -------------------------------------------------

def truths_from_normalized_text(
    text: str, page_width: int, page_height: int, page_id: str = "",
    class_names: tuple[str, ...] = ("figure", "figure_caption", "table", "math_formula"),
) -> list[GroundTruth]:
    """Read "class cx cy w h" lines with fractional page coordinates."""
    out = []
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        idx, cx, cy, w, h = int(parts[0]), *map(float, parts[1:5])
        out.append(
            GroundTruth(
                box=Box(
                    (cx - w / 2) * page_width,
                    (cy - h / 2) * page_height,
                    (cx + w / 2) * page_width,
                    (cy + h / 2) * page_height,
                ),
                cls=class_names[idx],
                page_id=page_id,
            )
        )
    return out


def truths_from_json(text: str, page_id: str = "") -> list[GroundTruth]:
    """Read [{bbox:[x0,y0,x1,y1], class:str}] ground truth."""
    return [
        GroundTruth(box=Box(*item["bbox"]), cls=item["class"],
                    page_id=item.get("page_id", page_id))
        for item in json.loads(text)
    ]
