"""Synthetic scanned-page fixtures with known figure/caption geometry.

Pages carry framed figures with "Figure N." captions underneath plus a block
of body text. Word boxes go into the Page object (standing in for OCR
output) and the frames are drawn into a grayscale image for the rectangle
finder. Ground truth follows the annotation conventions: captions cover
their word boxes; figures extend down to the caption top and horizontally
to the caption edges.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .evaluate import GroundTruth
from .geometry import Box, expand_to_include
from .hocr import Page, Region, Word

PAGE_W, PAGE_H = 1275, 1650
WORD_H = 22
WORD_GAP = 10
LINE_GAP = 12

_BODY_TEXT = (
    "The quick brown fox jumps over the lazy dog while seventeen "
    "astronomers measure the brightness of a distant variable star "
    "during the long northern winter of observation and analysis"
).split()

_CAPTION_TAIL = "shows the measured relation between the plotted quantities".split()


@dataclass(frozen=True)
class SynthPage:
    page: Page
    image: np.ndarray  # grayscale uint8, page dimensions
    truths: list[GroundTruth]


def _layout_words(texts, x, y, max_width, rng) -> list[Word]:
    words = []
    cx = x
    for t in texts:
        w = max(8, 9 * len(t) + int(rng.integers(0, 4)))
        if cx + w > x + max_width:
            cx = x
            y += WORD_H + LINE_GAP
        words.append(
            Word(
                box=Box(cx, y, cx + w, y + WORD_H),
                text=t,
                confidence=float(rng.integers(70, 100)),
                fontsize=float(rng.normal(10, 0.5)),
                ascenders=float(rng.normal(3, 0.3)),
                descenders=float(rng.normal(2, 0.3)),
            )
        )
        cx += w + WORD_GAP
    return words


def _words_hull(words: list[Word]) -> Box:
    box = words[0].box
    for w in words[1:]:
        box = expand_to_include(box, w.box)
    return box


def make_page(seed: int, n_figures: int | None = None, source_id: str | None = None) -> SynthPage:
    """Render one synthetic page; layout is a pure function of the seed."""
    rng = np.random.default_rng(seed)
    if n_figures is None:
        n_figures = int(rng.integers(1, 3))
    source_id = source_id or f"synth-{seed:04d}"

    image = np.full((PAGE_H, PAGE_W), 245, dtype=np.uint8)
    words: list[Word] = []
    regions: list[Region] = []
    truths: list[GroundTruth] = []

    margin = 90
    y = margin
    for i in range(n_figures):
        fig_w = int(rng.integers(500, 900))
        fig_h = int(rng.integers(280, 420)) if n_figures > 1 else int(rng.integers(350, 600))
        fx = margin + int(rng.integers(0, PAGE_W - fig_w - 2 * margin))
        fy = y
        # frame (3 px border) plus some interior strokes
        image[fy : fy + 3, fx : fx + fig_w] = 20
        image[fy + fig_h - 3 : fy + fig_h, fx : fx + fig_w] = 20
        image[fy : fy + fig_h, fx : fx + 3] = 20
        image[fy : fy + fig_h, fx + fig_w - 3 : fx + fig_w] = 20
        for _ in range(4):
            ly = fy + 20 + int(rng.integers(0, fig_h - 40))
            image[ly : ly + 2, fx + 30 : fx + fig_w - 30] = 120
        frame = Box(fx, fy, fx + fig_w, fy + fig_h)

        cap_y = fy + fig_h + 28
        cap_texts = [f"Figure", f"{i + 1}."] + list(_CAPTION_TAIL[: int(rng.integers(4, 8))])
        cap_words = _layout_words(cap_texts, fx + 10, cap_y, fig_w - 20, rng)
        words.extend(cap_words)
        cap_box = _words_hull(cap_words)
        regions.append(Region(box=cap_box, kind="paragraph"))

        # truth mirrors the annotation codebook: figure reaches the caption
        # top and spans at least the caption's width
        truth_fig = Box(
            min(frame.x0, cap_box.x0), frame.y0, max(frame.x1, cap_box.x1), cap_box.y0
        )
        truths.append(GroundTruth(box=truth_fig, cls="figure", page_id=source_id))
        truths.append(GroundTruth(box=cap_box, cls="figure_caption", page_id=source_id))
        y = int(cap_box.y1) + 60

    # body paragraph well below the figures
    body_y = max(y + 40, PAGE_H - 360)
    if body_y + 3 * (WORD_H + LINE_GAP) < PAGE_H - margin:
        n_body = int(rng.integers(15, len(_BODY_TEXT)))
        body_words = _layout_words(_BODY_TEXT[:n_body], margin, body_y, PAGE_W - 2 * margin, rng)
        words.extend(body_words)
        regions.append(Region(box=_words_hull(body_words), kind="paragraph"))

    # paint word boxes as gray text blocks so masking has something to hide
    for w in words:
        x0, y0, x1, y1 = (int(v) for v in w.box.rounded())
        image[y0:y1, x0:x1] = 90

    page = Page(
        width_px=PAGE_W,
        height_px=PAGE_H,
        rotation_deg=0,
        words=tuple(words),
        regions=tuple(regions),
        source_id=source_id,
    )
    return SynthPage(page=page, image=image, truths=truths)


def make_corpus(n_pages: int, seed: int = 0) -> list[SynthPage]:
    return [make_page(seed + i) for i in range(n_pages)]
