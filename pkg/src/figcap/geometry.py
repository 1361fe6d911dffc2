"""Axis-aligned rectangle arithmetic shared by every other module.

All boxes live in fractional page pixels with the origin at the top-left.
IOU and the excess/lost area measures first round coordinates to integer
pixels so that scores match the precision of hand-annotated ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def round_half_away(v: float) -> int:
    """Round to the nearest integer, ties going away from zero."""
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


@dataclass(frozen=True)
class Box:
    """Rectangle with x0 < x1 and y0 < y1, coordinates finite and >= 0."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        for v in (self.x0, self.y0, self.x1, self.y1):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"coordinates must be finite and >= 0, got {self}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"zero/negative-area box: {self}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains_point(self, x: float, y: float) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def rounded(self) -> tuple[int, int, int, int]:
        return (
            round_half_away(self.x0),
            round_half_away(self.y0),
            round_half_away(self.x1),
            round_half_away(self.y1),
        )

    def clamped(self, width: float, height: float) -> "Box":
        """Clip to [0,width]x[0,height]; raises if nothing is left."""
        return Box(max(self.x0, 0.0), max(self.y0, 0.0), min(self.x1, width), min(self.y1, height))

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class AreaPair:
    """IOU plus found-box area in excess of / lost from the ground truth."""

    iou: float
    excess_frac: float
    lost_frac: float


def _intersection_area(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> int:
    w = min(a[2], b[2]) - max(a[0], b[0])
    h = min(a[3], b[3]) - max(a[1], b[1])
    if w <= 0 or h <= 0:
        return 0
    return w * h


def _pixel_area(r: tuple[int, int, int, int]) -> int:
    return max(r[2] - r[0], 0) * max(r[3] - r[1], 0)


def iou(a: Box, b: Box) -> float:
    """Intersection over union after rounding both boxes to integer pixels.

    Boxes that collapse to zero area under rounding score 0.
    """
    ra, rb = a.rounded(), b.rounded()
    area_a, area_b = _pixel_area(ra), _pixel_area(rb)
    if area_a == 0 or area_b == 0:
        return 0.0
    inter = _intersection_area(ra, rb)
    union = area_a + area_b - inter
    return inter / union


def excess_lost(truth: Box, found: Box) -> AreaPair:
    """Area of the found box outside/inside the truth, as truth-area fractions."""
    rt, rf = truth.rounded(), found.rounded()
    area_t, area_f = _pixel_area(rt), _pixel_area(rf)
    if area_t == 0:
        # sliver truth: nothing to measure against
        return AreaPair(iou=0.0, excess_frac=0.0, lost_frac=0.0)
    if area_f == 0:
        return AreaPair(iou=0.0, excess_frac=0.0, lost_frac=1.0)
    inter = _intersection_area(rt, rf)
    union = area_t + area_f - inter
    return AreaPair(
        iou=inter / union,
        excess_frac=(area_f - inter) / area_t,
        lost_frac=(area_t - inter) / area_t,
    )


def expand_to_include(a: Box, b: Box) -> Box:
    """Minimal box containing both inputs."""
    return Box(min(a.x0, b.x0), min(a.y0, b.y0), max(a.x1, b.x1), max(a.y1, b.y1))


def overlap_area(a: Box, b: Box) -> float:
    """Raw (un-rounded) intersection area; 0 when disjoint."""
    w = min(a.x1, b.x1) - max(a.x0, b.x0)
    h = min(a.y1, b.y1) - max(a.y0, b.y0)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h
