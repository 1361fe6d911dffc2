"""Ten-step refinement of raw detections into figure/caption pairs.

Steps, in order: NMS, cross-class dedup, mined-caption adoption, heuristic
caption search, caption growth over OCR boxes, merge with image-processing
rectangles, oversized-caption drop, caption-figure pairing, vertical and
horizontal figure extension to the paired caption. A run can stop early
(e.g. at step 5 when post-processing foreign models' detections).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .geometry import Box, expand_to_include, iou, overlap_area
from .hocr import Page
from .mining import MinedObject
from .rects import RectCandidate

CLASSES = ("figure", "figure_caption", "table", "math_formula")
DEFAULT_KEYWORDS = ("Fig.", "Figure", "Plate")


@dataclass(frozen=True)
class Detection:
    box: Box
    cls: str
    score: float
    origin: str = "model"  # "model" | "heuristic" | "mined"

    def __post_init__(self):
        if self.cls not in CLASSES:
            raise ValueError(f"unknown class {self.cls!r}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must lie in [0, 1]")


@dataclass(frozen=True)
class PairedResult:
    figure: Detection
    caption: Detection | None
    page_id: str = ""


@dataclass(frozen=True)
class PipelineConfig:
    last_step: int = 10
    nms_iou: float = 0.5
    score_thresh: float = 0.25
    dedup_iou: float = 0.25
    caption_area_max_frac: float = 0.75
    grow_max_iters: int = 5
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS
    fuzz_max_edits: int = 1

    def __post_init__(self):
        if not (1 <= self.last_step <= 10):
            raise ValueError("last_step must lie in 1..10")


def _canonical_sort(dets: list[Detection]) -> list[Detection]:
    return sorted(
        dets,
        key=lambda d: (-d.score, d.box.y0, d.box.x0, d.box.y1, d.box.x1, d.cls, d.origin),
    )


def step1_nms(raw: list[Detection], iou_thresh: float = 0.5, score_thresh: float = 0.25) -> list[Detection]:
    """Class-wise greedy NMS after dropping low-score detections."""
    dets = _canonical_sort([d for d in raw if d.score >= score_thresh])
    kept: list[Detection] = []
    for d in dets:
        if any(k.cls == d.cls and iou(k.box, d.box) >= iou_thresh for k in kept):
            continue
        kept.append(d)
    return kept


def step2_cross_dedupe(dets: list[Detection], dedup_iou: float = 0.25) -> list[Detection]:
    """Across classes: of two boxes with IOU >= dedup_iou, drop the lower score.

    Score ties are broken by larger area, then by upper-left position.
    """
    def priority(d: Detection):
        return (-d.score, -d.box.area, d.box.y0, d.box.x0)

    ordered = sorted(dets, key=priority)
    kept: list[Detection] = []
    for d in ordered:
        if any(iou(k.box, d.box) >= dedup_iou for k in kept):
            continue
        kept.append(d)
    return _canonical_sort(kept)


def step3_adopt_mined_captions(dets: list[Detection], mined: list[MinedObject]) -> list[Detection]:
    """Mined caption geometry replaces overlapping model captions."""
    mined_boxes = [m.caption_box for m in mined if m.caption_box is not None]
    out = []
    for d in dets:
        if d.cls == "figure_caption" and d.origin == "model":
            for mb in mined_boxes:
                if overlap_area(d.box, mb) > 0:
                    d = replace(d, box=mb, origin="mined")
                    break
        out.append(d)
    return out


def _edit_distance(a: str, b: str, limit: int) -> int:
    if abs(len(a) - len(b)) > limit:
        return limit + 1
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        if min(cur) > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def _is_keyword(text: str, keywords: tuple[str, ...], max_edits: int) -> bool:
    norm = text.strip().strip(".").lower()
    if not norm:
        return False
    for kw in keywords:
        if _edit_distance(norm, kw.strip(".").lower(), max_edits) <= max_edits:
            return True
    return False


def step4_heuristic_captions(
    dets: list[Detection],
    page: Page,
    keywords: tuple[str, ...] = DEFAULT_KEYWORDS,
    fuzz_max_edits: int = 1,
) -> list[Detection]:
    """Find caption blocks by blurring a word-box mask and tracing contours.

    A contour whose bounding box contains the center of a keyword-matching
    word (edit distance <= fuzz_max_edits, case- and dot-insensitive)
    becomes a heuristic caption snapped to the word boxes inside it. When
    it overlaps a model caption the merged box takes the heuristic top and
    the min/max of left/right/bottom.
    """
    if not page.words:
        return dets
    keyword_words = [w for w in page.words if _is_keyword(w.text, keywords, fuzz_max_edits)]
    if not keyword_words:
        return dets

    mask = np.zeros((page.height_px, page.width_px), dtype=np.uint8)
    heights = []
    for w in page.words:
        x0, y0, x1, y1 = (int(v) for v in w.box.clamped(page.width_px, page.height_px).rounded())
        mask[y0:y1, x0:x1] = 255
        heights.append(w.box.height)
    sigma = max(statistics.median(heights), 1.0)
    ksize = int(2 * round(2 * sigma) + 1)
    blurred = cv2.GaussianBlur(mask, (ksize, ksize), sigma)
    binary = (blurred >= 64).astype(np.uint8) * 255
    contours, _ = cv2.findContours(binary, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)

    heuristic: list[Box] = []
    for contour in contours:
        x, y, cw, ch = cv2.boundingRect(contour)
        cbox = Box(x, y, x + cw, y + ch)
        if not any(cbox.contains_point(*kw.box.center) for kw in keyword_words):
            continue
        inside = [w.box for w in page.words if cbox.contains_point(*w.box.center)]
        snapped = inside[0] if inside else cbox
        for b in inside[1:]:
            snapped = expand_to_include(snapped, b)
        heuristic.append(snapped)

    out = list(dets)
    for hbox in heuristic:
        merged = False
        for i, d in enumerate(out):
            if d.cls == "figure_caption" and overlap_area(d.box, hbox) > 0:
                box = Box(
                    min(d.box.x0, hbox.x0),
                    hbox.y0,  # heuristic top tends to be the accurate edge
                    max(d.box.x1, hbox.x1),
                    max(d.box.y1, hbox.y1),
                )
                out[i] = replace(d, box=box, origin="heuristic")
                merged = True
                break
        if not merged:
            out.append(Detection(box=hbox, cls="figure_caption", score=1.0, origin="heuristic"))
    return _canonical_sort(out)


def step5_grow_captions(dets: list[Detection], page: Page, max_iters: int = 5) -> list[Detection]:
    """Expand captions over OCR word/paragraph boxes whose centers they contain."""
    boxes = [w.box for w in page.words] + [r.box for r in page.regions if r.kind == "paragraph"]
    out = []
    for d in dets:
        if d.cls != "figure_caption":
            out.append(d)
            continue
        box = d.box
        for _ in range(max_iters):
            grown = box
            for b in boxes:
                if box.contains_point(*b.center):
                    grown = expand_to_include(grown, b)
            if grown == box:
                break
            box = grown
        out.append(replace(d, box=box) if box != d.box else d)
    return out


def step6_merge_rects(dets: list[Detection], rects: list[RectCandidate]) -> list[Detection]:
    """Expand figures to include overlapping image-processing rectangles."""
    out = []
    for d in dets:
        if d.cls == "figure":
            box = d.box
            for r in rects:
                if overlap_area(box, r.box) > 0:
                    box = expand_to_include(box, r.box)
            if box != d.box:
                d = replace(d, box=box)
        out.append(d)
    return out


def step7_drop_large_captions(
    dets: list[Detection], page: Page, max_frac: float = 0.75
) -> list[Detection]:
    """Discard captions covering more than max_frac of the page."""
    page_area = page.width_px * page.height_px
    return [
        d for d in dets
        if d.cls != "figure_caption" or d.box.area <= max_frac * page_area
    ]


def _bottom_midpoint(box: Box, rotation: int) -> tuple[float, float]:
    cx, cy = box.center
    if rotation == 180:
        return (cx, box.y0)
    if rotation == 90:
        return (box.x1, cy)
    if rotation == 270:
        return (box.x0, cy)
    return (cx, box.y1)


def _page_rotation(page: Page) -> int:
    return page.rotation_deg


def step8_pair(dets: list[Detection], page: Page) -> list[PairedResult]:
    """Greedily pair captions to the figure whose bottom edge they sit nearest.

    The "bottom" is rotation-adjusted; captions left unpaired are dropped.
    """
    rotation = _page_rotation(page)
    figures = [d for d in dets if d.cls == "figure"]
    captions = [d for d in dets if d.cls == "figure_caption"]
    dists = []
    for ci, c in enumerate(captions):
        ccx, ccy = c.box.center
        for fi, f in enumerate(figures):
            bx, by = _bottom_midpoint(f.box, rotation)
            dists.append((math.hypot(ccx - bx, ccy - by), ci, fi))
    dists.sort()
    cap_of: dict[int, int] = {}
    used_c: set[int] = set()
    for _, ci, fi in dists:
        if ci in used_c or fi in cap_of:
            continue
        cap_of[fi] = ci
        used_c.add(ci)
    return [
        PairedResult(
            figure=f,
            caption=captions[cap_of[fi]] if fi in cap_of else None,
            page_id=page.source_id,
        )
        for fi, f in enumerate(figures)
    ]


def step9_extend_to_caption_top(pairs: list[PairedResult], page: Page) -> list[PairedResult]:
    """Extend each figure toward its caption's near edge; never shrink."""
    rotation = _page_rotation(page)
    out = []
    for p in pairs:
        if p.caption is None:
            out.append(p)
            continue
        f, c = p.figure.box, p.caption.box
        if rotation == 180:
            new = Box(f.x0, c.y1, f.x1, f.y1) if c.y1 < f.y0 else f
        elif rotation == 90:
            new = Box(f.x0, f.y0, c.x0, f.y1) if c.x0 > f.x1 else f
        elif rotation == 270:
            new = Box(c.x1, f.y0, f.x1, f.y1) if c.x1 < f.x0 else f
        else:
            new = Box(f.x0, f.y0, f.x1, c.y0) if c.y0 > f.y1 else f
        out.append(
            p if new == f else PairedResult(replace(p.figure, box=new), p.caption, p.page_id)
        )
    return out


def step10_extend_horizontal(pairs: list[PairedResult], page: Page) -> list[PairedResult]:
    """Widen each figure to its caption's extent along the rotated horizontal."""
    rotation = _page_rotation(page)
    out = []
    for p in pairs:
        if p.caption is None:
            out.append(p)
            continue
        f, c = p.figure.box, p.caption.box
        if rotation in (90, 270):
            new = Box(f.x0, min(f.y0, c.y0), f.x1, max(f.y1, c.y1))
        else:
            new = Box(min(f.x0, c.x0), f.y0, max(f.x1, c.x1), f.y1)
        out.append(
            p if new == f else PairedResult(replace(p.figure, box=new), p.caption, p.page_id)
        )
    return out


@dataclass
class PipelineOutput:
    detections: list[Detection]
    pairs: list[PairedResult] = field(default_factory=list)
    snapshots: dict[int, list[Detection]] = field(default_factory=dict)


def run_pipeline(
    raw: list[Detection],
    page: Page,
    mined: list[MinedObject] | None = None,
    rects: list[RectCandidate] | None = None,
    cfg: PipelineConfig = PipelineConfig(),
) -> PipelineOutput:
    """Apply steps 1..cfg.last_step in order, recording per-step snapshots.

    Pairs are only produced when the run reaches step 8.
    """
    mined = mined or []
    rects = rects or []
    dets = _canonical_sort(raw)
    snapshots: dict[int, list[Detection]] = {}
    pairs: list[PairedResult] = []

    for step in range(1, cfg.last_step + 1):
        if step == 1:
            dets = step1_nms(dets, cfg.nms_iou, cfg.score_thresh)
        elif step == 2:
            dets = step2_cross_dedupe(dets, cfg.dedup_iou)
        elif step == 3:
            dets = step3_adopt_mined_captions(dets, mined)
        elif step == 4:
            dets = step4_heuristic_captions(dets, page, cfg.keywords, cfg.fuzz_max_edits)
        elif step == 5:
            dets = step5_grow_captions(dets, page, cfg.grow_max_iters)
        elif step == 6:
            dets = step6_merge_rects(dets, rects)
        elif step == 7:
            dets = step7_drop_large_captions(dets, page, cfg.caption_area_max_frac)
        elif step == 8:
            pairs = step8_pair(dets, page)
        elif step == 9:
            pairs = step9_extend_to_caption_top(pairs, page)
        elif step == 10:
            pairs = step10_extend_horizontal(pairs, page)
        if step >= 8:
            dets = _dets_from_pairs(pairs)
        snapshots[step] = list(dets)

    return PipelineOutput(detections=dets, pairs=pairs, snapshots=snapshots)


def _dets_from_pairs(pairs: list[PairedResult]) -> list[Detection]:
    dets = []
    for p in pairs:
        dets.append(p.figure)
        if p.caption is not None:
            dets.append(p.caption)
    return dets
