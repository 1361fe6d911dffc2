"""hOCR parsing into an immutable Page plus the canonical page JSON codec.

The OCR engine itself is external; we only consume its hOCR (XHTML) output.
Coordinates stay in the raster's native pixel frame -- any rescaling happens
downstream when features are rasterized.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field

from .geometry import Box, expand_to_include

VALID_ROTATIONS = (0, 90, 180, 270)


class MalformedDocument(ValueError):
    """The markup could not be parsed at all."""


class MissingPageElement(ValueError):
    """Parsed markup contains no ocr_page element."""


@dataclass(frozen=True)
class Word:
    box: Box
    text: str
    confidence: float  # percent, clamped to [0, 100]
    fontsize: float = 0.0
    ascenders: float = 0.0
    descenders: float = 0.0
    rotation_deg: int = 0
    # parse diagnostic, not part of the word's identity
    missing_typo: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.rotation_deg not in VALID_ROTATIONS:
            raise ValueError(f"rotation must be one of {VALID_ROTATIONS}")
        if not (0 <= self.confidence <= 100):
            raise ValueError("confidence out of range")


@dataclass(frozen=True)
class Region:
    box: Box
    kind: str  # "paragraph" | "carea"

    def __post_init__(self):
        if self.kind not in ("paragraph", "carea"):
            raise ValueError(f"unknown region kind {self.kind!r}")


@dataclass(frozen=True)
class Page:
    width_px: int
    height_px: int
    rotation_deg: int = 0
    dpi_effective: int = 300
    words: tuple[Word, ...] = ()
    regions: tuple[Region, ...] = ()
    source_id: str = ""
    # ocrx_word elements without a usable bbox; parse diagnostic only
    dropped_words: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("page dimensions must be positive")


def _parse_title_props(title: str) -> dict:
    """Split an hOCR title attribute into its semicolon-separated properties."""
    props = {}
    for chunk in title.split(";"):
        parts = chunk.strip().split()
        if parts:
            props[parts[0]] = parts[1:]
    return props


def _bbox_from_props(props: dict) -> Box | None:
    vals = props.get("bbox")
    if not vals or len(vals) < 4:
        return None
    try:
        x0, y0, x1, y1 = (float(v) for v in vals[:4])
    except ValueError:
        return None
    if not (x0 < x1 and y0 < y1) or min(x0, y0) < 0:
        return None
    return Box(x0, y0, x1, y1)


def _float_prop(props: dict, key: str, default: float = 0.0) -> float:
    vals = props.get(key)
    if not vals:
        return default
    try:
        return float(vals[0])
    except ValueError:
        return default


_CLASS_RE = {
    "page": re.compile(r"\bocr_page\b"),
    "carea": re.compile(r"\bocr_carea\b"),
    "par": re.compile(r"\bocr_par\b"),
    "word": re.compile(r"\bocrx_word\b"),
}


def _iter_by_class(root: ET.Element, which: str):
    pat = _CLASS_RE[which]
    for el in root.iter():
        if pat.search(el.get("class", "")):
            yield el


def _element_text(el: ET.Element) -> str:
    return "".join(el.itertext()).strip()


def _snap_rotation(angle: float) -> int:
    best = min(VALID_ROTATIONS, key=lambda r: min(abs(angle - r), abs(angle - r + 360), abs(angle - r - 360)))
    return best


def parse_hocr(data: bytes | str, source_id: str = "") -> Page:
    """Parse one hOCR document into a Page.

    Words missing size/ascender/descender metadata get 0 and are flagged;
    words without a usable bbox are dropped and counted. Raises
    MalformedDocument / MissingPageElement; callers batching many files
    should catch these per document.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    # strip XML namespaces so class lookups are uniform
    data = re.sub(r'\sxmlns(:\w+)?="[^"]*"', "", data, count=2)
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedDocument(str(exc)) from exc

    pages = list(_iter_by_class(root, "page"))
    if not pages:
        raise MissingPageElement("no ocr_page element found")
    page_el = pages[0]

    page_props = _parse_title_props(page_el.get("title", ""))
    page_box = _bbox_from_props(page_props)
    if page_box is None:
        raise MissingPageElement("ocr_page carries no bbox")
    width, height = int(page_box.x1), int(page_box.y1)

    words: list[Word] = []
    dropped = 0
    for el in _iter_by_class(page_el, "word"):
        props = _parse_title_props(el.get("title", ""))
        box = _bbox_from_props(props)
        if box is None:
            dropped += 1
            continue
        box = box.clamped(width, height)
        missing = not any(k in props for k in ("x_size", "x_ascenders", "x_descenders"))
        conf = min(max(_float_prop(props, "x_wconf", 0.0), 0.0), 100.0)
        angle = _snap_rotation(_float_prop(props, "textangle", 0.0))
        words.append(
            Word(
                box=box,
                text=_element_text(el),
                confidence=conf,
                fontsize=_float_prop(props, "x_size"),
                ascenders=_float_prop(props, "x_ascenders"),
                descenders=_float_prop(props, "x_descenders"),
                rotation_deg=angle,
                missing_typo=missing,
            )
        )

    regions: list[Region] = []
    for which, kind in (("par", "paragraph"), ("carea", "carea")):
        for el in _iter_by_class(page_el, which):
            box = _bbox_from_props(_parse_title_props(el.get("title", "")))
            if box is not None:
                regions.append(Region(box=box.clamped(width, height), kind=kind))

    # page orientation: page-level OSD when present, else modal word angle
    if "textangle" in page_props or "rot" in page_props:
        rotation = _snap_rotation(_float_prop(page_props, "textangle", _float_prop(page_props, "rot", 0.0)))
    elif words:
        rotation = Counter(w.rotation_deg for w in words).most_common(1)[0][0]
    else:
        rotation = 0

    return Page(
        width_px=width,
        height_px=height,
        rotation_deg=rotation,
        words=tuple(words),
        regions=tuple(regions),
        source_id=source_id,
        dropped_words=dropped,
    )


def snap_annotation_to_words(ann: Box, page: Page) -> Box:
    """Grow a hand annotation to fully cover the OCR words it targets.

    A word belongs to the annotation when its center lies inside the
    annotation box. With no such words the annotation is returned as-is.
    """
    out = ann
    for w in page.words:
        cx, cy = w.box.center
        if ann.contains_point(cx, cy):
            out = expand_to_include(out, w.box)
    return out


# --- canonical page JSON -------------------------------------------------

def page_to_json(page: Page) -> str:
    doc = {
        "source_id": page.source_id,
        "width_px": page.width_px,
        "height_px": page.height_px,
        "rotation_deg": page.rotation_deg,
        "words": [
            {
                "bbox": w.box.as_list(),
                "text": w.text,
                "conf": w.confidence,
                "fontsize": w.fontsize,
                "asc": w.ascenders,
                "desc": w.descenders,
                "angle": w.rotation_deg,
            }
            for w in page.words
        ],
        "regions": [{"bbox": r.box.as_list(), "kind": r.kind} for r in page.regions],
    }
    return json.dumps(doc, indent=1)


def page_from_json(text: str) -> Page:
    doc = json.loads(text)
    return Page(
        width_px=doc["width_px"],
        height_px=doc["height_px"],
        rotation_deg=doc["rotation_deg"],
        words=tuple(
            Word(
                box=Box(*w["bbox"]),
                text=w["text"],
                confidence=w["conf"],
                fontsize=w["fontsize"],
                ascenders=w["asc"],
                descenders=w["desc"],
                rotation_deg=w["angle"],
            )
            for w in doc["words"]
        ),
        regions=tuple(Region(box=Box(*r["bbox"]), kind=r["kind"]) for r in doc["regions"]),
        source_id=doc["source_id"],
    )
