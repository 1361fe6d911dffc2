"""OCR-derived feature channels rasterized into 512x512 8-bit stacks.

Fourteen channels are defined; any subset can be rasterized. Word-derived
channels reserve byte 0 for "no word here" (the true zero), so scaled values
start at 1 (z-scored channels) or 125 (character-class channels). The
grayscale channel is the page image area-averaged down to 512x512 and
inverted.
"""

from __future__ import annotations

import io
import logging
import statistics
import string
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import cv2
import numpy as np

from .geometry import round_half_away
from .hocr import Page, Word

log = logging.getLogger(__name__)

STACK_SIZE = 512

CHANNEL_IDS = (
    "gs", "fs", "asc", "dec", "wc", "pct_num", "pct_let",
    "punct", "t_ang", "sp_pos", "sp_tag", "sp_dep", "p_b", "c_b",
)

# best-performing feature set from the ablation study
M12_CHANNELS = ("gs", "asc", "dec", "wc", "pct_num", "pct_let", "punct", "t_ang", "sp_pos")

POS_CARDINALITY = 19
TAG_CARDINALITY = 57
DEP_CARDINALITY = 51

ROTATION_BYTES = {0: 85, 90: 170, 180: 170, 270: 255}

# word tags: (pos_id, tag_id, dep_id) per word, ids within the cardinalities
TagProvider = Callable[[Sequence[str]], Sequence[tuple[int, int, int]]]


class DimensionMismatch(ValueError):
    pass


class ProviderCardinalityViolation(ValueError):
    pass


class UnknownChannel(ValueError):
    pass


@dataclass(frozen=True)
class FeatureStack:
    source_id: str
    channels: tuple[tuple[str, np.ndarray], ...]  # (channel id, 512x512 uint8)

    @property
    def channel_ids(self) -> tuple[str, ...]:
        return tuple(cid for cid, _ in self.channels)

    def plane(self, cid: str) -> np.ndarray:
        for c, p in self.channels:
            if c == cid:
                return p
        raise KeyError(cid)


def _scale_z(z: float) -> int:
    """Map a clipped z-score in [-5, 5] to [1, 255]; 0 stays reserved."""
    z = min(max(z, -5.0), 5.0)
    return round_half_away(128 + 127 * z / 5.0)


def normalize_fontsize(page: Page) -> list[int]:
    """Per-word fontsize byte: z-scored against the page, 5-sigma outliers → 0."""
    sizes = [w.fontsize for w in page.words]
    if not sizes:
        return []
    med = statistics.median(sizes)
    std = statistics.pstdev(sizes)
    out = []
    for w in page.words:
        if std == 0:
            out.append(128)
            continue
        z = (w.fontsize - med) / std
        out.append(0 if abs(z) > 5 else _scale_z(z))
    return out


def normalize_typo(page: Page, which: str) -> list[int]:
    """Per-word ascender/descender byte: median-subtracted, clipped to ±5 units."""
    if which not in ("asc", "dec"):
        raise ValueError("which must be 'asc' or 'dec'")
    vals = [w.ascenders if which == "asc" else w.descenders for w in page.words]
    if not vals:
        return []
    med = statistics.median(vals)
    return [_scale_z(v - med) for v in vals]


def char_class_bytes(word: Word) -> tuple[int, int, int]:
    """(pct_let, pct_num, punct) bytes for one word; empty text is all zeros."""
    text = word.text
    if not text:
        return (0, 0, 0)
    n = len(text)
    letters = sum(c.isalpha() for c in text)
    digits = sum(c.isdigit() for c in text)
    pct_let = round_half_away(125 + 130 * letters / n)
    pct_num = round_half_away(125 + 130 * digits / n)
    punct = 250 if any(c in string.punctuation for c in text) else 125
    return (pct_let, pct_num, punct)


def rotation_byte(word: Word) -> int:
    return ROTATION_BYTES[word.rotation_deg]


def _tag_byte(tag_id: int, cardinality: int) -> int:
    if not (0 <= tag_id < cardinality):
        raise ProviderCardinalityViolation(f"tag id {tag_id} outside cardinality {cardinality}")
    return round_half_away(255 * (tag_id + 1) / cardinality)


def fallback_tagger(texts: Sequence[str]) -> list[tuple[int, int, int]]:
    """Hermetic stand-in for an external NLP tagger.

    Buckets words into number-like / noun-like / other so the pipeline can
    run without any language model; uses 3 of the 19/57/51 available ids.
    """
    out = []
    for t in texts:
        if any(c.isdigit() for c in t):
            ids = (0, 0, 0)
        elif any(c.isalpha() for c in t):
            ids = (1, 1, 1)
        else:
            ids = (2, 2, 2)
        out.append(ids)
    return out


def linguistic_bytes(page: Page, provider: TagProvider | None = None) -> list[tuple[int, int, int]]:
    """Per-word (sp_pos, sp_tag, sp_dep) bytes from the injected tagger."""
    provider = provider or fallback_tagger
    tags = provider([w.text for w in page.words])
    out = []
    for pos_id, tag_id, dep_id in tags:
        out.append(
            (
                _tag_byte(pos_id, POS_CARDINALITY),
                _tag_byte(tag_id, TAG_CARDINALITY),
                _tag_byte(dep_id, DEP_CARDINALITY),
            )
        )
    return out


def _fill_boxes(plane: np.ndarray, page: Page, boxes_values, sx: float, sy: float):
    """Paint each (box, byte) pair, resolving overlap with per-pixel maximum."""
    for box, value in boxes_values:
        if value == 0:
            continue
        x0 = round_half_away(box.x0 * sx)
        y0 = round_half_away(box.y0 * sy)
        x1 = max(round_half_away(box.x1 * sx), x0 + 1)
        y1 = max(round_half_away(box.y1 * sy), y0 + 1)
        x0, y0 = min(x0, STACK_SIZE - 1), min(y0, STACK_SIZE - 1)
        x1, y1 = min(x1, STACK_SIZE), min(y1, STACK_SIZE)
        region = plane[y0:y1, x0:x1]
        np.maximum(region, value, out=region)


def rasterize(
    page: Page,
    grayscale: np.ndarray | None,
    channels: Sequence[str] = M12_CHANNELS,
    provider: TagProvider | None = None,
) -> FeatureStack:
    """Rasterize the selected channels into a 512x512 uint8 stack.

    `grayscale` must match the page dimensions and is only required when
    the "gs" channel is requested.
    """
    for cid in channels:
        if cid not in CHANNEL_IDS:
            raise UnknownChannel(cid)

    sx = STACK_SIZE / page.width_px
    sy = STACK_SIZE / page.height_px
    words = page.words

    per_word: dict[str, list[int]] = {}
    needed = set(channels)
    if "fs" in needed:
        per_word["fs"] = normalize_fontsize(page)
    if "asc" in needed:
        per_word["asc"] = normalize_typo(page, "asc")
    if "dec" in needed:
        per_word["dec"] = normalize_typo(page, "dec")
    if "wc" in needed:
        per_word["wc"] = [round_half_away(w.confidence / 100 * 254) + 1 for w in words]
    if needed & {"pct_let", "pct_num", "punct"}:
        ccs = [char_class_bytes(w) for w in words]
        per_word["pct_let"] = [c[0] for c in ccs]
        per_word["pct_num"] = [c[1] for c in ccs]
        per_word["punct"] = [c[2] for c in ccs]
    if "t_ang" in needed:
        if any(w.rotation_deg == 90 for w in words):
            # 90° rotations are binned with 180°; flag rather than guess
            log.warning("page %s: 90-degree word rotation binned as 180", page.source_id)
        per_word["t_ang"] = [rotation_byte(w) for w in words]
    if needed & {"sp_pos", "sp_tag", "sp_dep"}:
        ling = linguistic_bytes(page, provider)
        per_word["sp_pos"] = [t[0] for t in ling]
        per_word["sp_tag"] = [t[1] for t in ling]
        per_word["sp_dep"] = [t[2] for t in ling]

    planes = []
    for cid in channels:
        plane = np.zeros((STACK_SIZE, STACK_SIZE), dtype=np.uint8)
        if cid == "gs":
            if grayscale is None:
                raise DimensionMismatch("gs channel requested without a page image")
            if grayscale.shape[:2] != (page.height_px, page.width_px):
                raise DimensionMismatch(
                    f"image {grayscale.shape[:2]} vs page {(page.height_px, page.width_px)}"
                )
            small = cv2.resize(grayscale, (STACK_SIZE, STACK_SIZE), interpolation=cv2.INTER_AREA)
            plane = (255 - small).astype(np.uint8)
        elif cid in ("p_b", "c_b"):
            kind = "paragraph" if cid == "p_b" else "carea"
            _fill_boxes(plane, page, ((r.box, 255) for r in page.regions if r.kind == kind), sx, sy)
        else:
            vals = per_word[cid]
            _fill_boxes(plane, page, zip((w.box for w in words), vals), sx, sy)
        planes.append((cid, plane))

    return FeatureStack(source_id=page.source_id, channels=tuple(planes))


# --- FSTK binary container ------------------------------------------------

FSTK_MAGIC = b"FSTK1"


def write_fstk(stack: FeatureStack) -> bytes:
    """Serialize: magic, u16 channel count, (u8 id, 16-byte name) manifest,
    then raw row-major 512*512 planes."""
    buf = io.BytesIO()
    buf.write(FSTK_MAGIC)
    buf.write(struct.pack("<H", len(stack.channels)))
    for cid, _ in stack.channels:
        buf.write(struct.pack("<B", CHANNEL_IDS.index(cid)))
        buf.write(cid.encode("ascii").ljust(16, b"\x00"))
    for _, plane in stack.channels:
        buf.write(plane.tobytes())
    return buf.getvalue()


def read_fstk(data: bytes, source_id: str = "") -> FeatureStack:
    if data[:5] != FSTK_MAGIC:
        raise ValueError("not an FSTK container")
    (count,) = struct.unpack_from("<H", data, 5)
    offset = 7
    ids = []
    for _ in range(count):
        (idx,) = struct.unpack_from("<B", data, offset)
        name = data[offset + 1 : offset + 17].rstrip(b"\x00").decode("ascii")
        if CHANNEL_IDS[idx] != name:
            raise ValueError(f"manifest id/name mismatch: {idx} vs {name}")
        ids.append(name)
        offset += 17
    planes = []
    plane_bytes = STACK_SIZE * STACK_SIZE
    for name in ids:
        arr = np.frombuffer(data[offset : offset + plane_bytes], dtype=np.uint8)
        planes.append((name, arr.reshape(STACK_SIZE, STACK_SIZE).copy()))
        offset += plane_bytes
    return FeatureStack(source_id=source_id, channels=tuple(planes))
