import pytest

from figcap.geometry import Box
from figcap.hocr import (
    MalformedDocument,
    MissingPageElement,
    Page,
    Word,
    page_from_json,
    page_to_json,
    parse_hocr,
    snap_annotation_to_words,
)


def hocr_doc(body, page_bbox="0 0 5100 6600"):
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<html xmlns="http://www.w3.org/1999/xhtml">
 <body>
  <div class='ocr_page' id='page_1' title='image "p.tif"; bbox {page_bbox}; ppageno 0'>
   {body}
  </div>
 </body>
</html>"""


SINGLE_WORD = hocr_doc(
    """<div class='ocr_carea' title='bbox 5 10 300 60'>
     <p class='ocr_par' title='bbox 8 15 290 55'>
      <span class='ocrx_word' title='bbox 10 20 110 45; x_wconf 93'>Hello</span>
     </p></div>"""
)


def test_single_word():
    page = parse_hocr(SINGLE_WORD, source_id="p1")
    assert page.width_px == 5100 and page.height_px == 6600
    assert len(page.words) == 1
    w = page.words[0]
    assert w.box == Box(10, 20, 110, 45)
    assert w.confidence == 93
    assert w.text == "Hello"
    assert w.missing_typo  # no x_size/x_ascenders/x_descenders supplied
    kinds = sorted(r.kind for r in page.regions)
    assert kinds == ["carea", "paragraph"]


def test_full_word_metadata():
    doc = hocr_doc(
        "<span class='ocrx_word' title='bbox 10 20 110 45; x_wconf 80; "
        "x_size 30.5; x_ascenders 6.1; x_descenders 7.2; textangle 180'>word</span>"
    )
    w = parse_hocr(doc).words[0]
    assert w.rotation_deg == 180
    assert w.fontsize == 30.5
    assert w.ascenders == 6.1
    assert w.descenders == 7.2
    assert not w.missing_typo


def test_empty_page():
    page = parse_hocr(hocr_doc(""))
    assert (page.width_px, page.height_px) == (5100, 6600)
    assert page.words == ()


def test_word_without_bbox_dropped():
    doc = hocr_doc(
        "<span class='ocrx_word' title='x_wconf 10'>lost</span>"
        "<span class='ocrx_word' title='bbox 1 1 5 5; x_wconf 10'>kept</span>"
    )
    page = parse_hocr(doc)
    assert len(page.words) == 1
    assert page.dropped_words == 1


def test_confidence_clamped():
    doc = hocr_doc("<span class='ocrx_word' title='bbox 1 1 5 5; x_wconf 130'>w</span>")
    assert parse_hocr(doc).words[0].confidence == 100


def test_malformed_markup():
    with pytest.raises(MalformedDocument):
        parse_hocr("<html><body><div class='ocr_page'")


def test_missing_page_element():
    with pytest.raises(MissingPageElement):
        parse_hocr("<html><body><p>no page here</p></body></html>")


def test_page_rotation_from_modal_word_angle():
    doc = hocr_doc(
        "<span class='ocrx_word' title='bbox 1 1 5 5; textangle 180'>a</span>"
        "<span class='ocrx_word' title='bbox 6 1 9 5; textangle 180'>b</span>"
        "<span class='ocrx_word' title='bbox 1 6 5 9'>c</span>"
    )
    assert parse_hocr(doc).rotation_deg == 180


def test_roundtrip_canonical_json():
    page = parse_hocr(SINGLE_WORD, source_id="p1")
    text = page_to_json(page)
    again = page_from_json(text)
    assert again == page
    assert page_to_json(again) == text


def test_word_count_matches_bboxed_elements():
    body = "".join(
        f"<span class='ocrx_word' title='bbox {i * 10} 5 {i * 10 + 8} 15'>w{i}</span>"
        for i in range(7)
    )
    assert len(parse_hocr(hocr_doc(body)).words) == 7


def make_page(words):
    return Page(width_px=1000, height_px=1000, words=tuple(words))


def word_at(x0, y0, x1, y1, text="w"):
    return Word(box=Box(x0, y0, x1, y1), text=text, confidence=90)


class TestSnapAnnotation:
    def test_already_snapped(self):
        words = [word_at(10, 10, 50, 30), word_at(55, 10, 90, 30), word_at(95, 10, 130, 30)]
        ann = Box(10, 10, 130, 30)
        assert snap_annotation_to_words(ann, make_page(words)) == ann

    def test_clipped_word_recovered(self):
        words = [word_at(10, 10, 50, 30), word_at(55, 10, 100, 30)]
        ann = Box(10, 10, 98, 30)  # clips the last word by 2 px
        assert snap_annotation_to_words(ann, make_page(words)) == Box(10, 10, 100, 30)

    def test_wordless_area_unchanged(self):
        ann = Box(500, 500, 600, 600)
        words = [word_at(10, 10, 50, 30)]
        assert snap_annotation_to_words(ann, make_page(words)) == ann
