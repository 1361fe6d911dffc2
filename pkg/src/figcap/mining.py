"""PDF-miner output ingestion and corpus parsability estimation.

An article counts as "parsable" for a kind (figure or table) when its
mined labels, read either all as whole numbers or all as strict roman
numerals, form exactly the sequence 1..N. Schemes are never mixed within
a kind, but figures and tables may use different schemes.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from dataclasses import dataclass

from .geometry import Box


class NotRoman(ValueError):
    pass


class SchemaError(ValueError):
    pass


_ROMAN_VALUES = [
    (1000, "M"), (900, "CM"), (500, "D"), (400, "CD"),
    (100, "C"), (90, "XC"), (50, "L"), (40, "XL"),
    (10, "X"), (9, "IX"), (5, "V"), (4, "IV"), (1, "I"),
]


def int_to_roman(n: int) -> str:
    """Canonical roman numeral for n >= 1."""
    if n < 1:
        raise ValueError("roman numerals start at 1")
    out = []
    for value, sym in _ROMAN_VALUES:
        while n >= value:
            out.append(sym)
            n -= value
    return "".join(out)


def roman_to_int(s: str) -> int:
    """Strict parse: only canonical standard-form numerals are accepted."""
    if not s or not re.fullmatch(r"[MDCLXVI]+", s):
        raise NotRoman(s)
    total = 0
    rest = s
    for value, sym in _ROMAN_VALUES:
        while rest.startswith(sym):
            total += value
            rest = rest[len(sym) :]
    if rest or int_to_roman(total) != s:
        raise NotRoman(s)
    return total


def sequence_parsable(numbers: list[int]) -> bool:
    """True iff the numbers are a permutation of 1..N (N = count, N >= 1)."""
    return bool(numbers) and sorted(numbers) == list(range(1, len(numbers) + 1))


@dataclass(frozen=True)
class MinedObject:
    kind: str  # "figure" | "table"
    label_raw: str
    number_whole: int | None = None
    number_roman: int | None = None
    caption_box: Box | None = None
    figure_box: Box | None = None
    page_index: int = 0


@dataclass(frozen=True)
class ParsabilityVerdict:
    article_id: str
    figures_parsable: bool
    tables_parsable: bool
    figure_scheme: str  # "whole" | "roman" | "none"
    table_scheme: str


_LABEL_NUM_RE = re.compile(r"^\s*(?:fig(?:ure)?|tab(?:le)?|plate)?\.?\s*(\S+?)\.?\s*$", re.I)


def parse_label_numbers(label: str) -> tuple[int | None, int | None]:
    """Extract (whole, roman) readings of a label's numbering token.

    Sub-figure suffixes ("4a") and anything else non-standard yield
    (None, None).
    """
    m = _LABEL_NUM_RE.match(label)
    if not m:
        return (None, None)
    token = m.group(1)
    whole = int(token) if token.isdigit() else None
    try:
        roman = roman_to_int(token.upper())
    except NotRoman:
        roman = None
    return (whole, roman)


def _scheme_numbers(objs: list[MinedObject], scheme: str) -> list[int] | None:
    """All numbers of one kind under one scheme, or None if any label fails."""
    nums = []
    for o in objs:
        n = o.number_whole if scheme == "whole" else o.number_roman
        if n is None:
            return None
        nums.append(n)
    return nums


def _kind_parsability(objs: list[MinedObject]) -> tuple[bool, str]:
    if not objs:
        return (False, "none")
    for scheme in ("whole", "roman"):
        nums = _scheme_numbers(objs, scheme)
        if nums is not None and sequence_parsable(nums):
            return (True, scheme)
    return (False, "none")


def article_parsability(article_id: str, objs: list[MinedObject]) -> ParsabilityVerdict:
    """Evaluate both numbering schemes per kind; parsable if either passes."""
    figs = [o for o in objs if o.kind == "figure"]
    tabs = [o for o in objs if o.kind == "table"]
    fig_ok, fig_scheme = _kind_parsability(figs)
    tab_ok, tab_scheme = _kind_parsability(tabs)
    return ParsabilityVerdict(
        article_id=article_id,
        figures_parsable=fig_ok,
        tables_parsable=tab_ok,
        figure_scheme=fig_scheme,
        table_scheme=tab_scheme,
    )


def corpus_report(
    verdicts: list[ParsabilityVerdict],
    years: dict[str, int | None],
    tools: dict[str, str] | None = None,
) -> list[dict]:
    """Per-decade, per-tool parsability percentages.

    `years` maps article_id to publication year (None bins as "unknown");
    `tools` maps article_id to the mining tool name (default "miner").
    Empty bins are omitted.
    """
    bins: dict[tuple[str, str], list[ParsabilityVerdict]] = defaultdict(list)
    for v in verdicts:
        year = years.get(v.article_id)
        decade = "unknown" if year is None else f"{(year // 10) * 10}s"
        tool = (tools or {}).get(v.article_id, "miner")
        bins[(decade, tool)].append(v)
    rows = []
    for (decade, tool) in sorted(bins):
        group = bins[(decade, tool)]
        n = len(group)
        rows.append(
            {
                "decade": decade,
                "tool": tool,
                "articles": n,
                "pct_figures_parsable": 100.0 * sum(v.figures_parsable for v in group) / n,
                "pct_tables_parsable": 100.0 * sum(v.tables_parsable for v in group) / n,
            }
        )
    return rows


def parse_pdffigures2(data: str | bytes, dpi_effective: int = 300) -> list[MinedObject]:
    """Read a pdffigures2-style figure list, converting 72-dpi points to pixels.

    "Plate"-labeled objects are treated as figures for sequencing.
    """
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(str(exc)) from exc
    if isinstance(doc, dict):
        doc = doc.get("figures", [])
    if not isinstance(doc, list):
        raise SchemaError("expected a figure list")
    scale = dpi_effective / 72.0

    def to_box(b) -> Box | None:
        if not b:
            return None
        try:
            return Box(b["x1"] * scale, b["y1"] * scale, b["x2"] * scale, b["y2"] * scale)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad boundary {b!r}") from exc

    out = []
    for item in doc:
        if not isinstance(item, dict):
            raise SchemaError(f"bad figure entry {item!r}")
        fig_type = str(item.get("figType", "Figure")).lower()
        kind = "table" if fig_type == "table" else "figure"
        label = str(item.get("name", ""))
        whole, roman = parse_label_numbers(label)
        out.append(
            MinedObject(
                kind=kind,
                label_raw=label,
                number_whole=whole,
                number_roman=roman,
                figure_box=to_box(item.get("regionBoundary")),
                caption_box=to_box(item.get("captionBoundary")),
                page_index=int(item.get("page", 0)),
            )
        )
    return out
