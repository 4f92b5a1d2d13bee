"""Motion timeline primitives shared by the simulator and sensor engine.

A resident's movement over time is a sequence of ``WalkSegment``s
(10 Hz-sampled straight walks) and ``Hold``s (staying at one point).
Holds carry the body footprint radius, so a fall is simply a hold with
an enlarged radius and a short initial moving phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .floorplan import BODY_RADIUS_UPRIGHT_M
from .resident import WalkSegment

MotionSegment = "WalkSegment | Hold"


@dataclass(frozen=True)
class Hold:
    """Resident stationary at ``point`` during [start, end).

    ``moving_until`` > start marks an initial span that still counts as
    movement (the body sweep of a fall); ordinary holds set it to start.
    """

    start: float
    end: float
    point: tuple[float, float]
    body_radius: float = BODY_RADIUS_UPRIGHT_M
    moving_until: float | None = None

    def __post_init__(self) -> None:
        if self.moving_until is None:
            object.__setattr__(self, "moving_until", self.start)

    @property
    def duration(self) -> float:
        return self.end - self.start


def shift_walk(walk: WalkSegment, offset: float) -> WalkSegment:
    return WalkSegment(walk.points, walk.times + offset, walk.speed_m_s)


def slice_walk(walk: WalkSegment, t0: float, t1: float) -> WalkSegment | None:
    """The sub-walk with timestamps in [t0, t1]; None if empty."""
    mask = (walk.times >= t0 - 1e-9) & (walk.times <= t1 + 1e-9)
    if not mask.any():
        return None
    return WalkSegment(walk.points[mask], walk.times[mask], walk.speed_m_s)


def segment_span(seg) -> tuple[float, float]:
    if isinstance(seg, Hold):
        return seg.start, seg.end
    return float(seg.times[0]), float(seg.times[-1])


def position_at(segments: list, t: float) -> tuple[float, float] | None:
    """Resident position at time t, or None if outside all segments."""
    for seg in segments:
        s, e = segment_span(seg)
        if s <= t <= e:
            if isinstance(seg, Hold):
                return seg.point
            idx = int(np.searchsorted(seg.times, t, side="right")) - 1
            idx = max(0, min(idx, len(seg.times) - 1))
            return (float(seg.points[idx, 0]), float(seg.points[idx, 1]))
    return None
