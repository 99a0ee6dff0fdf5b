"""Skin image triage: lesion segmentation and measurements, prompt rules, case workflow and evaluation."""

import json

from ._core import (
    DermflowError,
    IllegalTransition,
    InvalidArgument,
    NoLesionError,
    ProviderError,
    UnsupportedFormat,
    analyze_lesion,
    bert_score,
    circularity,
    condition_prompt,
    cosine_similarity,
    decode_image,
    encode_png,
    lesion_labels,
    lesion_prompt,
    load_image,
    nli_label,
    parse_assessment,
    parse_send2lab,
    parse_technical_report,
    segment_lesion,
    weighted_row,
)
from . import _core


def evaluate(corpus, reviews=None, fixtures=None, workers=4, context_weight=1.5, entity_weight=1.0):
    """Score a corpus with mock providers. Returns (report dict, table text)."""
    report, table = _core._evaluate(str(corpus), None if reviews is None else str(reviews),
                                    None if fixtures is None else str(fixtures), workers, context_weight, entity_weight)
    return json.loads(report), table


def run_case(image_bytes, fixtures):
    """Run one image through the whole workflow with mock providers; returns the case document."""
    return json.loads(_core._run_case(image_bytes, str(fixtures)))


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
