"""Day-level statistical threshold detectors and label denoising.

Semi-bedridden shows up as persistently long sleep, housebound as
persistently rare outings.  A daily value qualifies when it crosses
mean + c * sd (or mean - c * sd for the low side), and only runs of at
least seven consecutive qualifying days raise the label.
"""

from __future__ import annotations

import numpy as np

from ..features import LabelTrack
from ..metrics import IntervalSet, label_intervals

GRID_LO = -1.0
GRID_HI = 3.0
GRID_STEP = 0.05
MIN_RUN_DAYS = 7
FORMAT_VERSION = 1


class ThresholdDetector:
    """Mean/sd threshold with a minimum-run requirement.

    direction "above" flags values exceeding mu + c*sigma; "below" flags
    values under mu - c*sigma.
    """

    def __init__(
        self,
        mu: float,
        sigma: float,
        c: float,
        direction: str,
        min_run_days: int = MIN_RUN_DAYS,
    ):
        if direction not in ("above", "below"):
            raise ValueError("direction must be 'above' or 'below'")
        if not (GRID_LO <= c <= GRID_HI):
            raise ValueError(f"c must lie in [{GRID_LO}, {GRID_HI}]")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.c = float(c)
        self.direction = direction
        self.min_run_days = min_run_days

    @property
    def theta(self) -> float:
        if self.direction == "above":
            return self.mu + self.c * self.sigma
        return self.mu - self.c * self.sigma

    def qualifies(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.direction == "above":
            return values > self.theta
        return values < self.theta

    def predict_days(self, values: np.ndarray) -> np.ndarray:
        """Binary day labels after applying the minimum-run rule."""
        return qualifying_runs(self.qualifies(values), self.min_run_days)

    def to_dict(self) -> dict:
        return {
            "model": "threshold",
            "version": FORMAT_VERSION,
            "mu": self.mu,
            "sigma": self.sigma,
            "c": self.c,
            "direction": self.direction,
            "min_run_days": self.min_run_days,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ThresholdDetector":
        return cls(data["mu"], data["sigma"], data["c"], data["direction"], data["min_run_days"])


def qualifying_runs(qualifies: np.ndarray, min_run: int) -> np.ndarray:
    """Keep only runs of at least ``min_run`` consecutive qualifying days."""
    out = np.zeros(len(qualifies), dtype=np.int8)
    for s, e in label_intervals(qualifies.astype(np.int8)):
        if e - s + 1 >= min_run:
            out[s : e + 1] = 1
    return out


def c_grid() -> np.ndarray:
    n = int(round((GRID_HI - GRID_LO) / GRID_STEP)) + 1
    return np.round(GRID_LO + GRID_STEP * np.arange(n), 10)


def _f1(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = int(((pred == 1) & (truth == 1)).sum())
    fp = int(((pred == 1) & (truth == 0)).sum())
    fn = int(((pred == 0) & (truth == 1)).sum())
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def fit_threshold(
    values: np.ndarray,
    labels: LabelTrack | np.ndarray,
    direction: str,
    min_run_days: int = MIN_RUN_DAYS,
) -> ThresholdDetector:
    """Fit mu/sigma on all days and grid-search c for the best F1.

    The F1 is computed on the full day classification including the
    minimum-run rule; ties pick the smallest c.  Raises when the
    training labels contain no positive day (callers should skip the
    detector in that case).
    """
    values = np.asarray(values, dtype=float)
    truth = labels.to_array() if isinstance(labels, LabelTrack) else np.asarray(labels)
    if len(values) != len(truth):
        raise ValueError("daily values and labels differ in length")
    if truth.sum() == 0:
        raise ValueError(
            "training labels contain no positive day; skip this detector"
        )
    mu = float(values.mean())
    sigma = float(values.std(ddof=1)) if len(values) > 1 else 0.0

    best_c = None
    best_f1 = -1.0
    for c in c_grid():
        det = ThresholdDetector(mu, sigma, float(c), direction, min_run_days)
        f1 = _f1(det.predict_days(values), truth)
        if f1 > best_f1 + 1e-12:
            best_f1 = f1
            best_c = float(c)
    return ThresholdDetector(mu, sigma, best_c, direction, min_run_days)


def detect_weeksscale(
    sleep_hours: np.ndarray,
    outings: np.ndarray,
    sleep_detector: ThresholdDetector,
    outing_detector: ThresholdDetector,
) -> tuple[LabelTrack, LabelTrack]:
    """Joint day labels for semi-bedridden and housebound.

    Semi-bedridden wins conflicts: a day inside a long-sleep run is
    never also housebound, even if outings qualified.
    """
    semi = sleep_detector.predict_days(sleep_hours)
    house = outing_detector.predict_days(outings)
    house = np.where(semi == 1, 0, house).astype(np.int8)
    day = 86400
    return (
        LabelTrack(len(semi), day, label_intervals(semi)),
        LabelTrack(len(house), day, label_intervals(house)),
    )


def denoise(track: LabelTrack, threshold: float) -> LabelTrack:
    """Drop predicted runs shorter than ``threshold`` track units.

    A run of exactly ``threshold`` units survives; threshold 0 is the
    identity.  Never creates, extends or merges intervals, so it is
    idempotent.
    """
    if threshold < 0:
        raise ValueError("denoise threshold must be >= 0")
    kept = tuple((s, e) for s, e in track.intervals if (e - s + 1) >= threshold)
    return LabelTrack(track.length, track.unit_seconds, IntervalSet(kept))
