"""Detector families: day-level thresholds, CART/forest, sequence models.

Every model serialises to a versioned JSON text format via
``save_model``/``load_model``; parameters round-trip at full precision.
"""

from __future__ import annotations

import json

from .sequence import SequenceModel, fit_sequence, posterior_dense, predict_sequence
from .thresholds import (
    ThresholdDetector,
    denoise,
    detect_weeksscale,
    fit_threshold,
    qualifying_runs,
)
from .trees import ForestModel, TreeModel, fit_forest, fit_tree

__all__ = [
    "ThresholdDetector",
    "fit_threshold",
    "detect_weeksscale",
    "qualifying_runs",
    "denoise",
    "TreeModel",
    "ForestModel",
    "fit_tree",
    "fit_forest",
    "SequenceModel",
    "fit_sequence",
    "predict_sequence",
    "posterior_dense",
    "save_model",
    "load_model",
]

_MODEL_CLASSES = {
    "threshold": ThresholdDetector,
    "tree": TreeModel,
    "forest": ForestModel,
    "sequence": SequenceModel,
}


def save_model(model, sink) -> None:
    data = model.to_dict()
    assert data.get("model") in _MODEL_CLASSES
    text = json.dumps(data, indent=1)
    if isinstance(sink, (str, bytes)):
        with open(sink, "w") as f:
            f.write(text)
    else:
        sink.write(text)


def load_model(source):
    if isinstance(source, (str, bytes)):
        with open(source) as f:
            data = json.load(f)
    else:
        data = json.load(source)
    kind = data.get("model")
    if kind not in _MODEL_CLASSES:
        raise ValueError(f"unknown model type {kind!r}")
    return _MODEL_CLASSES[kind].from_dict(data)
