"""Toolkit for localizing figure/figure-caption boxes in OCR'd page scans."""

from .geometry import AreaPair, Box, excess_lost, expand_to_include, iou
from .hocr import Page, Region, Word, parse_hocr, snap_annotation_to_words
from .pipeline import Detection, PairedResult, PipelineConfig, run_pipeline

__all__ = [
    "AreaPair",
    "Box",
    "Detection",
    "Page",
    "PairedResult",
    "PipelineConfig",
    "Region",
    "Word",
    "excess_lost",
    "expand_to_include",
    "iou",
    "parse_hocr",
    "run_pipeline",
    "snap_annotation_to_words",
]

__version__ = "0.1.0"
