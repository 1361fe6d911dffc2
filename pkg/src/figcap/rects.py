"""Heuristic figure-rectangle proposals from a word-masked page image.

The grayscale page (with OCR words painted over in the background color)
is pushed through a small family of filters; closed contours that
approximate a parallel-sided quadrilateral become candidates, which are
then culled by area, aspect ratio, and corner clustering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np
from sklearn.cluster import KMeans

from .geometry import Box, iou
from .hocr import Word

# tuning constants; the filter family is fixed for reproducibility
THRESHOLD_QUANTILES = (0.5, 0.7, 0.9)
POLY_TOLERANCE = 0.02          # fraction of contour perimeter
PARALLEL_TOLERANCE_DEG = 5.0
MIN_AREA_FRAC = 0.005          # candidates smaller than this page fraction are artifacts
COLORBAR_ASPECT = 8.0
DUP_GROUP_IOU = 0.8
KMEANS_SEED = 0
KMEANS_RESTARTS = 10


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class RectCandidate:
    box: Box
    source_filter: str
    corner_count: int = 4

    @property
    def aspect(self) -> float:
        return self.box.width / self.box.height


def mask_words(image: np.ndarray, words: tuple[Word, ...] | list[Word]) -> np.ndarray:
    """Fill every word box with the page's modal pixel value."""
    out = image.copy()
    if not words:
        return out
    vals, counts = np.unique(image, return_counts=True)
    modal = int(vals[np.argmax(counts)])
    h, w = image.shape[:2]
    for word in words:
        x0, y0, x1, y1 = (int(v) for v in word.box.clamped(w, h).rounded())
        out[y0:y1, x0:x1] = modal
    return out


def _filter_variants(image: np.ndarray):
    """Yield (name, binary image) pairs for the fixed filter family."""
    img = image.astype(np.uint8)
    for q in THRESHOLD_QUANTILES:
        t = float(np.quantile(img, q))
        yield f"thresh{q}", (img < t).astype(np.uint8) * 255
    # color reversal: bright-on-dark content
    t = float(np.quantile(img, 0.5))
    yield "invert", (255 - img < t).astype(np.uint8) * 255
    # dilation of the dark mask closes small gaps in frames
    dark = (img < float(np.quantile(img, 0.5))).astype(np.uint8) * 255
    yield "dilate", cv2.dilate(dark, np.ones((3, 3), np.uint8))
    # gradient magnitude highlights frame edges
    gx = cv2.Sobel(img, cv2.CV_32F, 1, 0)
    gy = cv2.Sobel(img, cv2.CV_32F, 0, 1)
    mag = cv2.magnitude(gx, gy)
    t = float(np.quantile(mag, 0.98))
    if t <= 0:
        t = 1.0
    yield "gradient", (mag >= t).astype(np.uint8) * 255


def _angle_deg(p0, p1) -> float:
    return math.degrees(math.atan2(p1[1] - p0[1], p1[0] - p0[0]))


def _is_parallel_quad(pts: np.ndarray) -> bool:
    """Opposite sides within PARALLEL_TOLERANCE_DEG of parallel."""
    angles = [_angle_deg(pts[i], pts[(i + 1) % 4]) for i in range(4)]
    for i in (0, 1):
        d = abs(angles[i] - angles[i + 2]) % 180
        d = min(d, 180 - d)
        if d > PARALLEL_TOLERANCE_DEG:
            return False
    return True


def find_rectangles(image: np.ndarray) -> list[RectCandidate]:
    """Propose rectangle candidates from a word-masked grayscale page."""
    h, w = image.shape[:2]
    out: list[RectCandidate] = []
    for name, binary in _filter_variants(image):
        contours, _ = cv2.findContours(binary, cv2.RETR_LIST, cv2.CHAIN_APPROX_SIMPLE)
        for contour in contours:
            perim = cv2.arcLength(contour, True)
            if perim < 8:
                continue
            approx = cv2.approxPolyDP(contour, POLY_TOLERANCE * perim, True)
            if len(approx) != 4:
                continue
            pts = approx.reshape(4, 2).astype(float)
            if not _is_parallel_quad(pts):
                continue
            x0, y0 = pts.min(axis=0)
            x1, y1 = pts.max(axis=0)
            x0, y0 = max(x0, 0.0), max(y0, 0.0)
            x1, y1 = min(x1 + 1, w), min(y1 + 1, h)  # contour coords are inclusive
            if x1 - x0 < 2 or y1 - y0 < 2:
                continue
            if (x1 - x0) * (y1 - y0) >= 0.95 * w * h:
                # the page border itself, not a figure frame
                continue
            out.append(RectCandidate(box=Box(x0, y0, x1, y1), source_filter=name))
    return out


def _greedy_group_count(cands: list[RectCandidate]) -> int:
    """Number of distinct boxes under greedy IOU grouping; used as K."""
    reps: list[Box] = []
    for c in cands:
        if not any(iou(c.box, r) >= DUP_GROUP_IOU for r in reps):
            reps.append(c.box)
    return len(reps)


def cull_candidates(
    cands: list[RectCandidate], page_width: int, page_height: int
) -> list[RectCandidate]:
    """Drop artifact and colorbar-shaped boxes, then collapse duplicates.

    Duplicates are merged by K-Means on the 4-corner coordinates with K set
    by greedy IOU grouping; each cluster is represented by its median
    corners.
    """
    page_area = page_width * page_height
    kept = [
        c
        for c in cands
        if c.box.area >= MIN_AREA_FRAC * page_area
        and 1.0 / COLORBAR_ASPECT <= c.aspect <= COLORBAR_ASPECT
    ]
    if not kept:
        return []
    k = _greedy_group_count(kept)
    corners = np.array([[c.box.x0, c.box.y0, c.box.x1, c.box.y1] for c in kept])
    if k >= len(kept):
        labels = np.arange(len(kept))
        k = len(kept)
    else:
        km = KMeans(n_clusters=k, n_init=KMEANS_RESTARTS, random_state=KMEANS_SEED)
        labels = km.fit_predict(corners)
    out = []
    for lbl in range(k):
        members = corners[labels == lbl]
        if len(members) == 0:
            continue
        med = np.median(members, axis=0)
        x0, y0 = max(med[0], 0.0), max(med[1], 0.0)
        x1, y1 = min(med[2], page_width), min(med[3], page_height)
        out.append(RectCandidate(box=Box(x0, y0, x1, y1), source_filter="kmeans"))
    out.sort(key=lambda c: (c.box.y0, c.box.x0, c.box.y1, c.box.x1))
    if _greedy_group_count(out) < len(out):
        # cluster medians can still collide; re-cull until stable
        return cull_candidates(out, page_width, page_height)
    return out


def propose(image: np.ndarray, words, page_width: int, page_height: int) -> list[RectCandidate]:
    """mask -> find -> cull, the full heuristic proposal chain."""
    if image.shape[:2] != (page_height, page_width):
        raise DimensionMismatch(f"image {image.shape[:2]} vs page {(page_height, page_width)}")
    masked = mask_words(image, words)
    return cull_candidates(find_rectangles(masked), page_width, page_height)
