"""Sentence segmentation and embedding for bilingual stock-day bundles."""

__version__ = "0.1.0"
