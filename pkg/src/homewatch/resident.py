"""Resident behaviour: cognitive trajectory, daily schedules and walking.

All sampling runs over explicit ``numpy.random.Generator`` instances so
that days can be generated independently and reproducibly; substreams
are derived from (master seed, day index) by the simulation driver.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

log = logging.getLogger(__name__)

DAY_SECONDS = 86400.0
TICK_SECONDS = 0.1
MIN_ACTIVITY_SECONDS = 60.0
REST_FILL_MIN_SECONDS = 180.0
DEFAULT_WALK_SPEED_CM_S = 68.75

# Cognitive score defaults: starts at 29 and loses 9.5 points over a
# 108-month horizon, with small month-to-month noise.
MMSE_MAX = 30.0
DEFAULT_M0 = 29.0
DEFAULT_DRIFT_PER_MONTH = 9.5 / 108.0
DEFAULT_NOISE_SD = 0.1

# Scheduling priority: lower places first and wins conflicts.
PRIORITY_SLEEP = 0
PRIORITY_OUTING = 1
PRIORITY_MEAL = 2
PRIORITY_APPLIANCE = 3
PRIORITY_OTHER = 4
PRIORITY_REST = 5


def simulate_mmse(
    seed: int,
    months: int,
    m0: float = DEFAULT_M0,
    drift: float = DEFAULT_DRIFT_PER_MONTH,
    noise_sd: float = DEFAULT_NOISE_SD,
) -> np.ndarray:
    """Monthly cognitive-score trajectory with linear decline plus noise.

    Returns ``months + 1`` values: the score at the start of each month
    and the final end-of-horizon value.  Each step subtracts ``drift``
    and adds Normal(0, noise_sd) noise, clipped into [0, 30].
    """
    if months < 1:
        raise ValueError("months must be >= 1")
    if not 0.0 <= m0 <= MMSE_MAX:
        raise ValueError(f"m0 must lie in [0, {MMSE_MAX}], got {m0}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    values = np.empty(months + 1)
    values[0] = m0
    noise = rng.normal(0.0, noise_sd, size=months) if noise_sd > 0 else np.zeros(months)
    m = m0
    for t in range(months):
        m = min(MMSE_MAX, max(0.0, m - drift + noise[t]))
        values[t + 1] = m
    return values


@dataclass(frozen=True)
class ActivityTemplate:
    """Statistical description of one daily activity.

    ``start_mean_h``/``start_sd_h`` are hours of day; durations are in
    minutes.  ``fixed_daily`` activities occur exactly once per day,
    everything else draws Poisson(``frequency_per_day``) occurrences.
    """

    name: str
    anchor: str
    start_mean_h: float
    start_sd_h: float
    duration_mean_min: float
    duration_sd_min: float
    frequency_per_day: float
    priority: int = PRIORITY_OTHER
    fixed_daily: bool = False
    uses_appliance: str | None = None
    is_outing: bool = False
    is_sleep: bool = False


@dataclass(frozen=True)
class ActivityInstance:
    name: str
    anchor: str
    start: float
    end: float
    uses_appliance: str | None = None
    is_outing: bool = False
    is_sleep: bool = False

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class StatModifiers:
    """Temporary statistical changes to the template pool.

    Active only for days whose start falls inside ``[active_from,
    active_until)`` (seconds).  Duration shifts are additive minutes;
    frequency multipliers scale the expected daily count.
    """

    duration_shift_min: dict[str, float] = field(default_factory=dict)
    frequency_multiplier: dict[str, float] = field(default_factory=dict)
    extra_templates: tuple[ActivityTemplate, ...] = ()
    active_from: float = float("-inf")
    active_until: float = float("inf")

    def applies_on(self, day_start: float) -> bool:
        return self.active_from <= day_start < self.active_until

    def apply(self, templates: tuple[ActivityTemplate, ...]) -> tuple[ActivityTemplate, ...]:
        out = []
        for t in templates:
            if t.name in self.duration_shift_min:
                t = replace(
                    t,
                    duration_mean_min=t.duration_mean_min + self.duration_shift_min[t.name],
                )
            if t.name in self.frequency_multiplier:
                t = replace(
                    t,
                    frequency_per_day=t.frequency_per_day * self.frequency_multiplier[t.name],
                )
            out.append(t)
        out.extend(self.extra_templates)
        return tuple(out)


def default_templates() -> tuple[ActivityTemplate, ...]:
    """The shipped single-resident activity pool.

    Calibrated so a long unmodified run gives roughly 8 h of sleep per
    night and about four outings per day, with enough short errands that
    the sensor stream stays realistically busy.
    """
    t = ActivityTemplate
    return (
        t("sleep", "bed", 23.0, 0.5, 480.0, 60.0, 1.0, PRIORITY_SLEEP, fixed_daily=True, is_sleep=True),
        t("breakfast", "dining_table", 7.5, 0.5, 25.0, 8.0, 1.0, PRIORITY_MEAL, fixed_daily=True),
        t("lunch", "dining_table", 12.5, 0.5, 30.0, 10.0, 1.0, PRIORITY_MEAL, fixed_daily=True),
        t("dinner", "dining_table", 18.5, 0.5, 40.0, 10.0, 1.0, PRIORITY_MEAL, fixed_daily=True),
        t("outing", "entrance", 14.0, 4.0, 75.0, 25.0, 4.0, PRIORITY_OUTING, is_outing=True),
        t("cooking", "kitchen", 12.0, 5.0, 25.0, 8.0, 2.0, PRIORITY_APPLIANCE, uses_appliance="stove"),
        t("tv", "sofa", 16.0, 4.5, 75.0, 25.0, 2.0, PRIORITY_APPLIANCE, uses_appliance="tv"),
        t("kitchen_faucet", "kitchen_sink", 13.0, 5.0, 4.0, 2.0, 3.0, PRIORITY_APPLIANCE, uses_appliance="kitchen_faucet"),
        t("bathroom_faucet", "bathroom_sink", 13.0, 5.0, 4.0, 2.0, 3.0, PRIORITY_APPLIANCE, uses_appliance="bathroom_faucet"),
        t("toilet", "toilet", 13.0, 5.5, 4.0, 1.5, 5.0, PRIORITY_OTHER),
        t("fridge", "fridge", 13.0, 5.0, 2.0, 1.0, 4.0, PRIORITY_OTHER),
        t("trash", "trash", 11.0, 4.0, 1.5, 0.5, 1.0, PRIORITY_OTHER),
        t("laundry", "laundry", 10.0, 2.0, 15.0, 5.0, 0.5, PRIORITY_OTHER),
        t("wardrobe", "wardrobe", 9.0, 4.0, 5.0, 2.0, 2.0, PRIORITY_OTHER),
        t("phone", "phone", 15.0, 3.0, 10.0, 4.0, 1.0, PRIORITY_OTHER),
        t("rest", "sofa", 14.0, 4.0, 30.0, 10.0, 2.0, PRIORITY_REST),
    )


def nap_template() -> ActivityTemplate:
    """Afternoon nap in bed, added while the resident is semi-bedridden."""
    return ActivityTemplate(
        "nap", "bed", 14.0, 1.0, 40.0, 10.0, 1.0,
        PRIORITY_OTHER, fixed_daily=True, is_sleep=True,
    )


def _find_slot(
    occupied: list[tuple[float, float]],
    desired_start: float,
    duration: float,
    window_start: float,
    window_end: float,
) -> float | None:
    """Start time nearest ``desired_start`` where the activity fits.

    ``occupied`` must be sorted and disjoint.  Returns None when no gap
    inside the window is long enough.
    """
    gaps: list[tuple[float, float]] = []
    cursor = window_start
    for s, e in occupied:
        if s > cursor:
            gaps.append((cursor, min(s, window_end)))
        cursor = max(cursor, e)
        if cursor >= window_end:
            break
    if cursor < window_end:
        gaps.append((cursor, window_end))

    best: float | None = None
    best_dist = float("inf")
    for gs, ge in gaps:
        if ge - gs < duration:
            continue
        start = min(max(desired_start, gs), ge - duration)
        dist = abs(start - desired_start)
        if dist < best_dist:
            best, best_dist = start, dist
    return best


def schedule_day(
    templates: tuple[ActivityTemplate, ...],
    day_index: int,
    modifiers: list[StatModifiers] | None,
    rng: np.random.Generator,
    busy_until: float | None = None,
) -> list[ActivityInstance]:
    """One day's time-ordered, non-overlapping activity schedule.

    Conflicts resolve by priority: higher-priority activities are placed
    first and later ones shift to the nearest free slot, or drop with a
    warning when the day is full.  Gaps of at least three minutes are
    filled with rest on the sofa.  The sleep activity may run past the
    end of the day; pass its end back as ``busy_until`` for the next day.
    """
    if not templates:
        raise ValueError("template pool is empty")
    day_start = day_index * DAY_SECONDS
    day_end = day_start + DAY_SECONDS
    if busy_until is None:
        busy_until = day_start

    pool = templates
    if modifiers:
        for mod in modifiers:
            if mod.applies_on(day_start):
                pool = mod.apply(pool)

    # Sample every occurrence first, then place in priority order.
    drawn: list[tuple[ActivityTemplate, float, float]] = []
    for tpl in pool:
        count = 1 if tpl.fixed_daily else int(rng.poisson(tpl.frequency_per_day))
        for _ in range(count):
            start = day_start + (rng.normal(tpl.start_mean_h, tpl.start_sd_h)) * 3600.0
            duration = max(
                MIN_ACTIVITY_SECONDS, rng.normal(tpl.duration_mean_min, tpl.duration_sd_min) * 60.0
            )
            drawn.append((tpl, start, duration))

    drawn.sort(key=lambda item: (item[0].priority, item[1]))

    occupied: list[tuple[float, float]] = []
    if busy_until > day_start:
        occupied.append((day_start, busy_until))
    placed: list[ActivityInstance] = []

    for tpl, start, duration in drawn:
        # Sleep may spill into the next day; everything else must end
        # within this one.
        window_end = day_end + duration if tpl.is_sleep else day_end
        desired = min(max(start, day_start), day_end - TICK_SECONDS)
        slot = _find_slot(occupied, desired, duration, day_start, window_end)
        if slot is None:
            log.warning(
                "day %d: dropping %r (%.0f s), no free slot", day_index, tpl.name, duration
            )
            continue
        inst = ActivityInstance(
            name=tpl.name,
            anchor=tpl.anchor,
            start=slot,
            end=slot + duration,
            uses_appliance=tpl.uses_appliance,
            is_outing=tpl.is_outing,
            is_sleep=tpl.is_sleep,
        )
        placed.append(inst)
        occupied.append((inst.start, inst.end))
        occupied.sort()

    # Rest filler over remaining gaps within the day proper.
    filled: list[ActivityInstance] = []
    cursor = busy_until
    for inst in sorted(placed, key=lambda i: i.start):
        if inst.start - cursor >= REST_FILL_MIN_SECONDS:
            filled.append(ActivityInstance("rest", "sofa", cursor, inst.start))
        cursor = max(cursor, inst.end)
    if day_end - cursor >= REST_FILL_MIN_SECONDS:
        filled.append(ActivityInstance("rest", "sofa", cursor, day_end))

    out = sorted(placed + filled, key=lambda i: i.start)
    return out


@dataclass(frozen=True)
class WalkSegment:
    """A straight-line walk sampled on the 0.1 s tick grid.

    ``points`` has one row per timestamp; the final row is the
    destination.  A zero-length walk has a single point.
    """

    points: np.ndarray
    times: np.ndarray
    speed_m_s: float

    def __post_init__(self) -> None:
        if len(self.points) != len(self.times):
            raise ValueError("points and times differ in length")

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.end - self.start

    @property
    def path_length(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.sqrt(np.diff(self.points, axis=0) ** 2 @ np.ones(2)).sum())

    @property
    def destination(self) -> tuple[float, float]:
        return (float(self.points[-1, 0]), float(self.points[-1, 1]))


def plan_walk(
    origin: tuple[float, float],
    target: tuple[float, float],
    speed_cm_s: float,
    depart: float,
) -> WalkSegment:
    """Straight-line walk from origin to target at a fixed speed.

    Timestamps advance in 0.1 s ticks from ``depart``; the arrival time
    is the walking distance over speed, rounded up to a whole tick.
    """
    if speed_cm_s <= 0:
        raise ValueError("speed must be positive")
    speed = speed_cm_s / 100.0
    ox, oy = origin
    tx, ty = target
    dist = float(np.hypot(tx - ox, ty - oy))
    if dist == 0.0:
        return WalkSegment(
            points=np.array([[ox, oy]]),
            times=np.array([depart]),
            speed_m_s=speed,
        )
    n_ticks = int(np.ceil(dist / speed / TICK_SECONDS - 1e-9))
    times = depart + TICK_SECONDS * np.arange(n_ticks + 1)
    travelled = np.minimum(speed * TICK_SECONDS * np.arange(n_ticks + 1), dist)
    frac = travelled / dist
    points = np.empty((n_ticks + 1, 2))
    points[:, 0] = ox + frac * (tx - ox)
    points[:, 1] = oy + frac * (ty - oy)
    return WalkSegment(points=points, times=times, speed_m_s=speed)
