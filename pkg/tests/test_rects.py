import numpy as np
import pytest

from figcap.geometry import Box, iou
from figcap.hocr import Word
from figcap.rects import (
    DimensionMismatch,
    RectCandidate,
    cull_candidates,
    find_rectangles,
    mask_words,
    propose,
)
from figcap.synth import make_page


def blank_page(w=800, h=600, value=245):
    return np.full((h, w), value, dtype=np.uint8)


def draw_frame(img, x0, y0, x1, y1, thickness=3, value=20):
    img[y0:y0 + thickness, x0:x1] = value
    img[y1 - thickness:y1, x0:x1] = value
    img[y0:y1, x0:x0 + thickness] = value
    img[y0:y1, x1 - thickness:x1] = value


def word_at(x0, y0, x1, y1):
    return Word(box=Box(x0, y0, x1, y1), text="w", confidence=90)


class TestMaskWords:
    def test_no_words_unchanged(self):
        img = blank_page()
        assert (mask_words(img, []) == img).all()

    def test_word_region_becomes_modal(self):
        img = blank_page()
        img[100:120, 100:200] = 30  # drawn "text"
        out = mask_words(img, [word_at(100, 100, 200, 120)])
        assert (out[100:120, 100:200] == 245).all()

    def test_text_only_page_mostly_modal(self):
        sp = make_page(2, n_figures=1)
        img = sp.image.copy()
        # blank out the figure so only text remains
        img[:, :] = 245
        for w in sp.page.words:
            x0, y0, x1, y1 = (int(v) for v in w.box.rounded())
            img[y0:y1, x0:x1] = 90
        out = mask_words(img, sp.page.words)
        assert (out == 245).mean() >= 0.99


class TestFindRectangles:
    def test_blank_image_empty(self):
        assert find_rectangles(blank_page()) == []

    def test_single_frame_recovered(self):
        img = blank_page()
        draw_frame(img, 100, 80, 500, 380)
        cands = find_rectangles(img)
        assert cands
        target = Box(100, 80, 500, 380)
        best = max(cands, key=lambda c: iou(c.box, target))
        assert abs(best.box.x0 - 100) <= 2
        assert abs(best.box.y0 - 80) <= 2
        assert abs(best.box.x1 - 500) <= 2
        assert abs(best.box.y1 - 380) <= 2

    def test_nested_frames_give_two_groups(self):
        img = blank_page()
        draw_frame(img, 50, 50, 700, 550)
        draw_frame(img, 200, 200, 500, 400)
        culled = cull_candidates(find_rectangles(img), 800, 600)
        assert len(culled) == 2


class TestCull:
    def test_small_artifact_dropped(self):
        cands = [RectCandidate(box=Box(0, 0, 10, 10), source_filter="t")]
        assert cull_candidates(cands, 2550, 3300) == []

    def test_colorbar_dropped(self):
        cands = [RectCandidate(box=Box(0, 0, 2000, 100), source_filter="t")]
        assert cull_candidates(cands, 2550, 3300) == []

    def test_near_duplicates_collapse(self):
        base = (300, 300, 900, 800)
        cands = [
            RectCandidate(
                box=Box(base[0] + d, base[1] + d, base[2] + d, base[3] + d),
                source_filter=f"v{d}",
            )
            for d in range(5)
        ]
        out = cull_candidates(cands, 2550, 3300)
        assert len(out) == 1
        assert iou(out[0].box, Box(*base)) > 0.95

    def test_idempotent(self):
        cands = [
            RectCandidate(box=Box(300, 300, 900, 800), source_filter="a"),
            RectCandidate(box=Box(302, 301, 903, 799), source_filter="b"),
            RectCandidate(box=Box(1200, 1200, 2000, 2000), source_filter="c"),
        ]
        once = cull_candidates(cands, 2550, 3300)
        twice = cull_candidates(once, 2550, 3300)
        assert [c.box for c in once] == [c.box for c in twice]

    def test_stays_inside_page(self):
        cands = [RectCandidate(box=Box(2000, 2800, 2540, 3290), source_filter="t")]
        out = cull_candidates(cands, 2550, 3300)
        for c in out:
            assert c.box.x1 <= 2550 and c.box.y1 <= 3300


def test_propose_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        propose(blank_page(100, 100), [], 200, 200)


def test_recall_on_synthetic_frames():
    # framed figures >=5% page area, text masked out: every frame recovered
    # with per-edge error <= 2 px
    rng = np.random.default_rng(13)
    for _ in range(10):
        w, h = 1275, 1650
        img = blank_page(w, h)
        frames = []
        y = 100
        for _ in range(int(rng.integers(1, 3))):
            fw = int(rng.integers(450, 900))
            fh = int(rng.integers(350, 550))
            fx = 80 + int(rng.integers(0, w - fw - 160))
            draw_frame(img, fx, y, fx + fw, y + fh)
            frames.append(Box(fx, y, fx + fw, y + fh))
            y += fh + 80
        words = [word_at(100, y + 20, 400, y + 40)]
        for word in words:
            x0, y0, x1, y1 = (int(v) for v in word.box.rounded())
            img[y0:y1, x0:x1] = 90
        cands = propose(img, words, w, h)
        assert len(cands) == len(frames)
        for frame in frames:
            best = max(cands, key=lambda c: iou(c.box, frame))
            for got, want in zip(best.box.as_list(), frame.as_list()):
                assert abs(got - want) <= 2


def test_full_synth_pages_one_candidate_per_figure():
    for seed in range(6):
        sp = make_page(seed)
        cands = propose(sp.image, sp.page.words, sp.page.width_px, sp.page.height_px)
        n_figures = sum(t.cls == "figure" for t in sp.truths)
        assert len(cands) == n_figures
