"""Anomaly episode sampling and behaviour transforms.

Six anomaly kinds are modelled.  Week-scale ones (semi-bedridden,
housebound) alter activity statistics; wandering and falls rewrite the
walking trajectory; forgetting extends an appliance's on-window until
the resident next comes near it.  Occurrence rates depend on the latent
monthly cognitive score M: lower scores mean more wandering, forgetting
and falls.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .floorplan import BODY_RADIUS_FALLEN_M, FloorPlan
from .motion import Hold, shift_walk, slice_walk
from .resident import (
    ActivityInstance,
    ActivityTemplate,
    StatModifiers,
    WalkSegment,
    default_templates,
    nap_template,
)

MONTH_DAYS = 30.0
MONTH_SECONDS = MONTH_DAYS * 86400.0

# Seconds of active falling motion at the start of a fall hold; the body
# sweep while dropping is the only movement sensors see mid-episode.
FALL_MOTION_SECONDS = 0.5
FORGETTING_NEAR_RADIUS_M = 1.0
WANDER_MAX_DWELL_SECONDS = 2.0


class AnomalyKind(str, Enum):
    SEMI_BEDRIDDEN = "semi_bedridden"
    HOUSEBOUND = "housebound"
    FORGETTING = "forgetting"
    WANDERING = "wandering"
    FALL_WALKING = "fall_walking"
    FALL_STANDING = "fall_standing"


# Label summarisation interval per kind, in seconds.
UNIT_SECONDS = {
    AnomalyKind.SEMI_BEDRIDDEN: 86400,
    AnomalyKind.HOUSEBOUND: 86400,
    AnomalyKind.FORGETTING: 7200,
    AnomalyKind.WANDERING: 1,
    AnomalyKind.FALL_WALKING: 1,
    AnomalyKind.FALL_STANDING: 1,
}

WEEKS_SCALE_KINDS = (AnomalyKind.SEMI_BEDRIDDEN, AnomalyKind.HOUSEBOUND)


@dataclass(frozen=True)
class AnomalyEpisode:
    kind: AnomalyKind
    start: float
    end: float

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise ValueError(f"episode start {self.start} must precede end {self.end}")

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass
class EpisodePlan:
    """Ground-truth episodes for one simulation run, grouped by kind."""

    episodes: dict[AnomalyKind, list[AnomalyEpisode]] = field(default_factory=dict)

    def add(self, episode: AnomalyEpisode) -> None:
        self.episodes.setdefault(episode.kind, []).append(episode)

    def of(self, kind: AnomalyKind) -> list[AnomalyEpisode]:
        return sorted(self.episodes.get(kind, []), key=lambda e: e.start)


def occurrence_rate(kind: AnomalyKind, m: float) -> float:
    """Expected episodes per month at cognitive score ``m``, clamped >= 0."""
    if kind is AnomalyKind.SEMI_BEDRIDDEN:
        rate = 1.0 / 20.0
    elif kind is AnomalyKind.HOUSEBOUND:
        rate = 1.0 / 10.0
    elif kind is AnomalyKind.WANDERING:
        rate = -1.86 * m + 56.0
    elif kind is AnomalyKind.FORGETTING:
        rate = -m + 30.0
    elif kind in (AnomalyKind.FALL_WALKING, AnomalyKind.FALL_STANDING):
        rate = -m / 15.0 + 2.0
    else:
        raise ValueError(f"unknown anomaly kind {kind}")
    return max(0.0, rate)


def _sample_duration(kind: AnomalyKind, m: float, rng: np.random.Generator) -> float:
    """Episode duration in seconds.

    Week-scale spells keep their published 30/14 day means but carry a
    seven-day floor: both states are defined by lasting at least a week,
    and shorter spells could never satisfy the seven-consecutive-day
    detection rule.  Wandering and fall immobility use normal draws with
    a 20 % relative spread, clamped to sane minimums.
    """
    if kind is AnomalyKind.SEMI_BEDRIDDEN:
        return (7.0 + rng.exponential(23.0)) * 86400.0
    if kind is AnomalyKind.HOUSEBOUND:
        return (7.0 + rng.exponential(7.0)) * 86400.0
    if kind is AnomalyKind.WANDERING:
        mean_min = -0.31 * m + 9.8
        return max(60.0, rng.normal(mean_min, 0.2 * abs(mean_min)) * 60.0)
    if kind in (AnomalyKind.FALL_WALKING, AnomalyKind.FALL_STANDING):
        return max(5.0, rng.normal(30.0, 6.0))
    if kind is AnomalyKind.FORGETTING:
        # Provisional: the real span is set when the injection resolves
        # the resident's return to the appliance.
        return 1.0
    raise ValueError(f"unknown anomaly kind {kind}")


def sample_episodes(
    kind: AnomalyKind,
    mmse: np.ndarray,
    horizon_months: int,
    rng: np.random.Generator,
    rate_scale: float = 1.0,
    exclude: tuple[AnomalyEpisode, ...] = (),
) -> list[AnomalyEpisode]:
    """Draw one kind's episodes over the horizon.

    Per month the occurrence count is Poisson with the score-dependent
    rate; starts fall uniformly inside the month.  Episodes overlapping
    an already-kept same-kind episode, or any ``exclude`` span, are
    dropped (used to keep housebound clear of semi-bedridden spells).
    """
    if horizon_months > len(mmse) - 1:
        raise ValueError("horizon exceeds the cognitive trajectory length")
    episodes: list[AnomalyEpisode] = []
    proposals: list[tuple[float, float]] = []
    for month in range(horizon_months):
        m = float(mmse[month])
        lam = occurrence_rate(kind, m) * rate_scale
        if lam <= 0:
            continue
        for _ in range(int(rng.poisson(lam))):
            start = (month + rng.uniform()) * MONTH_SECONDS
            duration = _sample_duration(kind, m, rng)
            proposals.append((start, start + duration))

    proposals.sort()
    horizon_end = horizon_months * MONTH_SECONDS
    last_end = -np.inf
    for start, end in proposals:
        end = min(end, horizon_end)
        if start >= end or start < last_end:
            continue
        if any(start < ex.end and end > ex.start for ex in exclude):
            continue
        episodes.append(AnomalyEpisode(kind, start, end))
        last_end = end
    return episodes


def stat_modifiers_for(
    kind: AnomalyKind,
    episode: AnomalyEpisode,
    templates: tuple[ActivityTemplate, ...] | None = None,
) -> StatModifiers:
    """Schedule changes active for one week-scale episode.

    Semi-bedridden adds a daily 40-minute nap, 30 extra minutes of rest
    and cuts outings to about one per week; housebound cuts outings to
    one per fortnight and phone calls to one every three days.
    """
    if kind not in WEEKS_SCALE_KINDS:
        raise ValueError(f"{kind.value} does not modify activity statistics")
    if templates is None:
        templates = default_templates()
    by_name = {t.name: t for t in templates}

    def target_multiplier(name: str, per_day: float) -> float:
        base = by_name[name].frequency_per_day
        if base <= 0:
            raise ValueError(f"template {name!r} has zero base frequency")
        return per_day / base

    if kind is AnomalyKind.SEMI_BEDRIDDEN:
        return StatModifiers(
            duration_shift_min={"rest": 30.0},
            frequency_multiplier={"outing": target_multiplier("outing", 1.0 / 7.0)},
            extra_templates=(nap_template(),),
            active_from=episode.start,
            active_until=episode.end,
        )
    return StatModifiers(
        frequency_multiplier={
            "outing": target_multiplier("outing", 1.0 / 14.0),
            "phone": target_multiplier("phone", 1.0 / 3.0),
        },
        active_from=episode.start,
        active_until=episode.end,
    )


def inject_wandering(
    episode: AnomalyEpisode,
    plan: FloorPlan,
    rng: np.random.Generator,
    start_point: tuple[float, float],
    speed_cm_s: float,
) -> list[WalkSegment]:
    """Aimless walking between random activity anchors for the episode.

    Legs chain back to back (no dwelling at staging points); the final
    leg is cut at the episode end so total walking time equals the
    episode duration to within one tick.
    """
    from .resident import plan_walk

    anchors = list(plan.activity_anchors.values())
    walks: list[WalkSegment] = []
    t = episode.start
    pos = start_point
    while t < episode.end - 1e-9:
        nxt = anchors[int(rng.integers(len(anchors)))]
        if nxt == pos:
            continue
        walk = plan_walk(pos, nxt, speed_cm_s, t)
        if walk.end > episode.end:
            walk = slice_walk(walk, walk.start, episode.end)
            if walk is None:
                break
        walks.append(walk)
        t = walk.end
        pos = walk.destination
        if walk.duration < 1e-9:
            break
    return walks


def inject_fall(
    kind: AnomalyKind,
    walk: WalkSegment,
    immobile_duration: float,
    rng: np.random.Generator,
    fall_at_destination: bool = False,
) -> tuple[list[WalkSegment | Hold], AnomalyEpisode]:
    """Insert a fall into one walk.

    A fall while walking interrupts the walk at a uniformly random
    interior tick; a fall while standing happens at the first tick
    (or at the destination when ``fall_at_destination``, the
    reaching-the-bed case).  The resident lies still with an enlarged
    body footprint, then the rest of the walk resumes, arriving exactly
    ``immobile_duration`` late.
    """
    if kind not in (AnomalyKind.FALL_WALKING, AnomalyKind.FALL_STANDING):
        raise ValueError(f"{kind.value} is not a fall")
    n = len(walk.times)
    if kind is AnomalyKind.FALL_WALKING:
        if walk.duration <= 2.0:
            raise ValueError("walk too short for a mid-walk fall")
        idx = int(rng.integers(1, n - 1))
    elif fall_at_destination:
        idx = n - 1
    else:
        idx = 0

    fall_time = float(walk.times[idx])
    point = (float(walk.points[idx, 0]), float(walk.points[idx, 1]))
    resume_time = fall_time + immobile_duration

    segments: list[WalkSegment | Hold] = []
    if idx > 0:
        segments.append(
            WalkSegment(walk.points[: idx + 1], walk.times[: idx + 1], walk.speed_m_s)
        )
    segments.append(
        Hold(
            start=fall_time,
            end=resume_time,
            point=point,
            body_radius=BODY_RADIUS_FALLEN_M,
            moving_until=min(fall_time + FALL_MOTION_SECONDS, resume_time),
        )
    )
    if idx < n - 1:
        rest = WalkSegment(walk.points[idx:], walk.times[idx:], walk.speed_m_s)
        segments.append(shift_walk(rest, immobile_duration))
    episode = AnomalyEpisode(kind, fall_time, resume_time)
    return segments, episode


def first_return_time(
    segments: list[WalkSegment | Hold],
    after: float,
    anchor: tuple[float, float],
    radius: float = FORGETTING_NEAR_RADIUS_M,
) -> float | None:
    """First instant past ``after`` the resident re-enters the radius.

    The resident usually stands at the appliance when its activity ends,
    so the scan first waits for them to leave the vicinity and then
    reports the next approach.  Returns None when the timeline ends
    first (caller decides the cut-off).
    """
    ax, ay = anchor
    left = False
    for seg in segments:
        seg_end = seg.end if isinstance(seg, Hold) else float(seg.times[-1])
        if seg_end <= after:
            continue
        if isinstance(seg, Hold):
            near = np.hypot(seg.point[0] - ax, seg.point[1] - ay) <= radius
            if not left:
                if not near:
                    left = True
            elif near:
                return max(after, seg.start)
            continue
        mask = seg.times > after
        if not mask.any():
            continue
        pts = seg.points[mask]
        ts = seg.times[mask]
        near = np.hypot(pts[:, 0] - ax, pts[:, 1] - ay) <= radius
        if not left:
            far_idx = np.flatnonzero(~near)
            if far_idx.size == 0:
                continue
            left = True
            near = near[far_idx[0] :]
            ts = ts[far_idx[0] :]
        hit = np.flatnonzero(near)
        if hit.size:
            return float(ts[hit[0]])
    return None


def inject_forgetting(
    instances: list[ActivityInstance],
    segments: list[WalkSegment | Hold],
    rng: np.random.Generator,
) -> tuple[ActivityInstance, float, AnomalyEpisode] | None:
    """Leave one appliance running after its activity ends.

    Picks a random appliance-using instance, then keeps its cost sensor
    on until the resident next comes within one metre of the appliance's
    activity anchor.  Returns (instance, turn-off time, episode), or
    None when the schedule has no appliance use or the resident never
    returns inside the provided timeline.
    """
    candidates = [i for i in instances if i.uses_appliance is not None]
    if not candidates:
        return None
    inst = candidates[int(rng.integers(len(candidates)))]
    anchor = None
    for seg in segments:
        if isinstance(seg, Hold) and seg.start <= inst.start < seg.end:
            anchor = seg.point
            break
    if anchor is None:
        anchor = segments[0].point if isinstance(segments[0], Hold) else None
    if anchor is None:
        return None
    turnoff = first_return_time(segments, inst.end, anchor)
    if turnoff is None or turnoff <= inst.end:
        return None
    episode = AnomalyEpisode(AnomalyKind.FORGETTING, inst.end, turnoff)
    return inst, turnoff, episode


def episodes_to_csv(plan: EpisodePlan) -> str:
    """Ground-truth export: one row per episode, sorted by start."""
    out = io.StringIO()
    out.write("kind,start_seconds,end_seconds\n")
    rows = [e for eps in plan.episodes.values() for e in eps]
    for e in sorted(rows, key=lambda e: (e.start, e.kind.value)):
        out.write(f"{e.kind.value},{e.start:.1f},{e.end:.1f}\n")
    return out.getvalue()


def episodes_from_csv(text: str) -> EpisodePlan:
    plan = EpisodePlan()
    lines = text.strip().splitlines()
    if not lines or lines[0] != "kind,start_seconds,end_seconds":
        raise ValueError("missing episode CSV header")
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"malformed episode row at line {lineno}")
        plan.add(AnomalyEpisode(AnomalyKind(parts[0]), float(parts[1]), float(parts[2])))
    return plan
