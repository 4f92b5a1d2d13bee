"""Interval-level scoring of binary anomaly label tracks.

A label track is a binary vector whose maximal runs of 1s form "label
intervals".  Detections are judged at interval granularity: a true
interval counts as found if any predicted interval touches it, and a
predicted interval that touches nothing is a false alarm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Sentinel for rates that have no defined value (for example sensitivity
# when the truth track contains no anomaly at all).
NOT_APPLICABLE = float("nan")


@dataclass(frozen=True)
class IntervalSet:
    """Disjoint, sorted, closed integer intervals in track units.

    Intervals are 0-based and inclusive on both ends: a track
    ``[0, 1, 1, 1, 0, 0, 1, 1, 0]`` yields ``[1, 3]`` and ``[6, 7]``.
    """

    intervals: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        prev_end = -math.inf
        for start, end in self.intervals:
            if start > end:
                raise ValueError(f"interval [{start}, {end}] has start > end")
            if start <= prev_end:
                raise ValueError("intervals must be disjoint and sorted")
            prev_end = end

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def to_array(self, length: int) -> np.ndarray:
        """Expand back to a dense 0/1 vector of the given length."""
        y = np.zeros(length, dtype=np.int8)
        for start, end in self.intervals:
            if end >= length:
                raise ValueError(f"interval [{start}, {end}] exceeds track length {length}")
            y[start : end + 1] = 1
        return y


def label_intervals(y: np.ndarray | list[int]) -> IntervalSet:
    """Extract maximal runs of 1s as 0-based closed intervals."""
    arr = np.asarray(y, dtype=np.int8)
    if arr.ndim != 1:
        raise ValueError("label track must be one-dimensional")
    if arr.size == 0:
        return IntervalSet(())
    padded = np.concatenate(([0], arr, [0]))
    diff = np.diff(padded)
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1) - 1
    return IntervalSet(tuple(zip(starts.tolist(), ends.tolist())))


@dataclass(frozen=True)
class ScoreReport:
    """All track-level and interval-level scores for one detector output.

    ``mal`` follows the exclusive length convention ``e - s`` for an
    interval ``[s, e]``; ``mal_inclusive`` reports ``e - s + 1`` alongside
    it because a single-unit alarm otherwise scores length zero.
    Undefined rates (no truth intervals, or no predicted intervals) are
    reported as NaN rather than zero.
    """

    raw_precision: float
    raw_recall: float
    interval_precision: float
    sensitivity: float
    far_per_day: float
    mal: float
    mal_inclusive: float
    denoise_threshold: float
    n_true_intervals: int
    n_pred_intervals: int

    CSV_HEADER = (
        "raw_precision,raw_recall,interval_precision,sensitivity,"
        "far_per_day,mal,mal_inclusive,denoise_threshold,"
        "n_true_intervals,n_pred_intervals"
    )

    def csv_row(self) -> str:
        def fmt(v: float) -> str:
            if isinstance(v, float) and math.isnan(v):
                return "n/a"
            return repr(float(v)) if isinstance(v, float) else str(v)

        return ",".join(
            fmt(v)
            for v in (
                self.raw_precision,
                self.raw_recall,
                self.interval_precision,
                self.sensitivity,
                self.far_per_day,
                self.mal,
                self.mal_inclusive,
                self.denoise_threshold,
                self.n_true_intervals,
                self.n_pred_intervals,
            )
        )


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return max(a[0], b[0]) <= min(a[1], b[1])


def _interval_hits(truth: IntervalSet, pred: IntervalSet) -> tuple[int, int]:
    """Count (true intervals touched by any prediction,
    predicted intervals touching any truth).

    Both interval sets are sorted, so a single sweep suffices.
    """
    hit_true = 0
    hit_pred = [False] * len(pred)
    j = 0
    pred_list = pred.intervals
    for ts, te in truth:
        while j < len(pred_list) and pred_list[j][1] < ts:
            j += 1
        k = j
        touched = False
        while k < len(pred_list) and pred_list[k][0] <= te:
            touched = True
            hit_pred[k] = True
            k += 1
        if touched:
            hit_true += 1
    return hit_true, sum(hit_pred)


def score(
    truth: np.ndarray | IntervalSet,
    pred: np.ndarray | IntervalSet,
    days: float,
    denoise_threshold: float = 0.0,
    track_length: int | None = None,
) -> ScoreReport:
    """Score a prediction track against the truth track.

    Accepts either dense binary vectors or pre-extracted ``IntervalSet``s
    (the latter requires ``track_length`` for the pointwise metrics).
    ``denoise_threshold`` is applied here when > 0: predicted runs of
    fewer than ``denoise_threshold`` units are discarded first.

    Raises ``ValueError`` on mismatched track lengths.
    """
    if isinstance(truth, IntervalSet):
        truth_iv = truth
        if track_length is None:
            raise ValueError("track_length required when passing IntervalSets")
        t_len = track_length
    else:
        arr = np.asarray(truth)
        truth_iv = label_intervals(arr)
        t_len = arr.size

    if isinstance(pred, IntervalSet):
        pred_iv = pred
        p_len = track_length if track_length is not None else t_len
    else:
        arr = np.asarray(pred)
        pred_iv = label_intervals(arr)
        p_len = arr.size

    if t_len != p_len:
        raise ValueError(f"track length mismatch: truth {t_len} vs pred {p_len}")
    if days <= 0:
        raise ValueError("days must be positive")

    if denoise_threshold > 0:
        kept = tuple(
            (s, e) for s, e in pred_iv if (e - s + 1) >= denoise_threshold
        )
        pred_iv = IntervalSet(kept)

    n_true = len(truth_iv)
    n_pred = len(pred_iv)

    # Pointwise counts straight from interval lengths: no dense expansion.
    true_units = sum(e - s + 1 for s, e in truth_iv)
    pred_units = sum(e - s + 1 for s, e in pred_iv)
    tp_units = 0
    j = 0
    pred_list = pred_iv.intervals
    for ts, te in truth_iv:
        while j < len(pred_list) and pred_list[j][1] < ts:
            j += 1
        k = j
        while k < len(pred_list) and pred_list[k][0] <= te:
            tp_units += min(te, pred_list[k][1]) - max(ts, pred_list[k][0]) + 1
            k += 1

    raw_precision = tp_units / pred_units if pred_units else NOT_APPLICABLE
    raw_recall = tp_units / true_units if true_units else NOT_APPLICABLE

    hit_true, hit_pred = _interval_hits(truth_iv, pred_iv)

    sensitivity = hit_true / n_true if n_true else NOT_APPLICABLE
    interval_precision = hit_pred / n_pred if n_pred else NOT_APPLICABLE
    far_per_day = (n_pred - hit_pred) / days
    if n_pred:
        mal = sum(e - s for s, e in pred_iv) / n_pred
        mal_inclusive = sum(e - s + 1 for s, e in pred_iv) / n_pred
    else:
        mal = NOT_APPLICABLE
        mal_inclusive = NOT_APPLICABLE

    return ScoreReport(
        raw_precision=raw_precision,
        raw_recall=raw_recall,
        interval_precision=interval_precision,
        sensitivity=sensitivity,
        far_per_day=far_per_day,
        mal=mal,
        mal_inclusive=mal_inclusive,
        denoise_threshold=denoise_threshold,
        n_true_intervals=n_true,
        n_pred_intervals=n_pred,
    )
