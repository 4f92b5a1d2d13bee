"""Turn a resident motion timeline into binary sensor event streams.

Sensor rules:

* infrared fires while the resident is moving and their body disc
  intersects the sensor's detection circle;
* pressure mats fire whenever the body disc overlaps the mat rectangle,
  moving or not;
* the entrance door emits a one-second pulse as the resident steps out
  and another as they come back in;
* flow and power sensors stay on for the whole appliance window.

Events are state changes (ON then OFF per activation) snapped to each
sensor's sample grid: 0.1 s for infrared/pressure/door, 1 s for
flow/power.  Identical (seed, config) pairs therefore produce
byte-identical event files.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .floorplan import (
    BODY_RADIUS_UPRIGHT_M,
    SensorKind,
    SensorLayout,
)
from .motion import Hold
from .resident import WalkSegment

DOOR_PULSE_SECONDS = 1.0
_MERGE_TOL = 0.051  # half a tick with float slack


@dataclass(frozen=True)
class SensorEvent:
    time: float
    sensor_id: int
    state: int


@dataclass(frozen=True)
class PositionSample:
    """One 10 Hz sample of the resident's body state."""

    time: float
    position: tuple[float, float]
    moving: bool
    body_radius: float = BODY_RADIUS_UPRIGHT_M


@dataclass
class EventStream:
    """Column-oriented event storage; rows sorted by (time, sensor_id)."""

    times: np.ndarray
    sensor_ids: np.ndarray
    states: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        for t, i, s in zip(self.times, self.sensor_ids, self.states):
            yield SensorEvent(float(t), int(i), int(s))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EventStream)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.sensor_ids, other.sensor_ids)
            and np.array_equal(self.states, other.states)
        )

    @staticmethod
    def empty() -> "EventStream":
        return EventStream(np.empty(0), np.empty(0, dtype=np.int16), np.empty(0, dtype=np.int8))


def clock_to_seconds(days: int, hours: int, minutes: int, seconds: float) -> float:
    """Day-clock reading to absolute seconds since the simulation epoch."""
    return days * 86400.0 + hours * 3600.0 + minutes * 60.0 + seconds


def samples_to_segments(samples: list[PositionSample]) -> list[WalkSegment | Hold]:
    """Group a 10 Hz sample stream into walk and hold segments."""
    segments: list[WalkSegment | Hold] = []
    i = 0
    n = len(samples)
    while i < n:
        j = i
        while j + 1 < n and samples[j + 1].moving == samples[i].moving and (
            samples[j + 1].body_radius == samples[i].body_radius
        ):
            j += 1
        run = samples[i : j + 1]
        if samples[i].moving:
            segments.append(
                WalkSegment(
                    points=np.array([s.position for s in run]),
                    times=np.array([s.time for s in run]),
                    speed_m_s=0.0,
                )
            )
        else:
            segments.append(
                Hold(
                    start=run[0].time,
                    end=run[-1].time + 0.1,
                    point=run[0].position,
                    body_radius=run[0].body_radius,
                )
            )
        i = j + 1
    return segments


def _runs_to_intervals(mask: np.ndarray, times: np.ndarray, tick: float) -> list[tuple[float, float]]:
    padded = np.concatenate(([False], mask, [False]))
    diff = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(diff == 1)
    ends = np.flatnonzero(diff == -1) - 1
    return [(float(times[s]), float(times[e]) + tick) for s, e in zip(starts, ends)]


def _rect_distances(points: np.ndarray, rect: tuple[float, float, float, float]) -> np.ndarray:
    x0, y0, x1, y1 = rect
    dx = np.maximum.reduce([x0 - points[:, 0], np.zeros(len(points)), points[:, 0] - x1])
    dy = np.maximum.reduce([y0 - points[:, 1], np.zeros(len(points)), points[:, 1] - y1])
    return np.hypot(dx, dy)


def _merge_intervals(intervals: list[tuple[float, float]], tol: float) -> list[tuple[float, float]]:
    if not intervals:
        return []
    intervals.sort()
    merged = [intervals[0]]
    for s, e in intervals[1:]:
        ps, pe = merged[-1]
        if s <= pe + tol:
            merged[-1] = (ps, max(pe, e))
        else:
            merged.append((s, e))
    return merged


def run_sensors(
    positions: list,
    appliance_windows: dict[str, list[tuple[float, float]]],
    outing_windows: list[tuple[float, float]],
    layout: SensorLayout,
) -> EventStream:
    """Simulate every sensor over the motion timeline.

    ``positions`` is a motion timeline (WalkSegment/Hold list) or a raw
    ``PositionSample`` stream, which must be time-sorted.  Appliance
    windows are keyed by appliance name and map onto the bound flow or
    power sensor.
    """
    if positions and isinstance(positions[0], PositionSample):
        segments = samples_to_segments(positions)
    else:
        segments = positions

    infrared = [s for s in layout.sensors if s.kind is SensorKind.INFRARED]
    pressure = [s for s in layout.sensors if s.kind is SensorKind.PRESSURE]
    ir_pos = np.array([s.position for s in infrared]) if infrared else np.empty((0, 2))
    ir_reach_walk = np.array([s.radius + BODY_RADIUS_UPRIGHT_M for s in infrared])

    raw: dict[int, list[tuple[float, float]]] = {s.id: [] for s in layout.sensors}

    for seg in segments:
        if isinstance(seg, Hold):
            if seg.moving_until > seg.start and infrared:
                d = np.hypot(ir_pos[:, 0] - seg.point[0], ir_pos[:, 1] - seg.point[1])
                reach = np.array([s.radius for s in infrared]) + seg.body_radius
                for k in np.flatnonzero(d <= reach):
                    raw[infrared[k].id].append((seg.start, seg.moving_until))
            for spec in pressure:
                dx = max(spec.rect[0] - seg.point[0], 0.0, seg.point[0] - spec.rect[2])
                dy = max(spec.rect[1] - seg.point[1], 0.0, seg.point[1] - spec.rect[3])
                if np.hypot(dx, dy) <= seg.body_radius:
                    raw[spec.id].append((seg.start, seg.end))
            continue

        pts = seg.points
        times = seg.times
        if infrared:
            d = np.hypot(
                pts[:, 0, None] - ir_pos[None, :, 0], pts[:, 1, None] - ir_pos[None, :, 1]
            )
            within = d <= ir_reach_walk[None, :]
            for k in np.flatnonzero(within.any(axis=0)):
                raw[infrared[k].id].extend(_runs_to_intervals(within[:, k], times, 0.1))
        for spec in pressure:
            near = _rect_distances(pts, spec.rect) <= BODY_RADIUS_UPRIGHT_M
            if near.any():
                raw[spec.id].extend(_runs_to_intervals(near, times, 0.1))

    for start, end in outing_windows:
        raw[layout.door_sensor_id].append((start, start + DOOR_PULSE_SECONDS))
        raw[layout.door_sensor_id].append((end - DOOR_PULSE_SECONDS, end))

    for appliance, windows in appliance_windows.items():
        spec = layout.by_appliance(appliance)
        raw[spec.id].extend(windows)

    all_times: list[np.ndarray] = []
    all_ids: list[np.ndarray] = []
    all_states: list[np.ndarray] = []
    for spec in layout.sensors:
        intervals = _merge_intervals(raw[spec.id], _MERGE_TOL)
        if not intervals:
            continue
        step = spec.sample_step
        snapped: list[tuple[float, float]] = []
        for on, off in intervals:
            on_g = round(on / step) * step
            off_g = round(off / step) * step
            if off_g > on_g:
                snapped.append((on_g, off_g))
        snapped = _merge_intervals(snapped, step * 0.5)
        if not snapped:
            continue
        arr = np.array(snapped).reshape(-1)
        all_times.append(np.round(arr, 1))
        all_ids.append(np.full(arr.size, spec.id, dtype=np.int16))
        states = np.empty(arr.size, dtype=np.int8)
        states[0::2] = 1
        states[1::2] = 0
        all_states.append(states)

    if not all_times:
        return EventStream.empty()
    times = np.concatenate(all_times)
    ids = np.concatenate(all_ids)
    states = np.concatenate(all_states)
    order = np.lexsort((states, ids, times))
    return EventStream(times[order], ids[order], states[order])


def write_events(stream: EventStream, sink) -> None:
    """Canonical CSV: header then ``time_s,sensor_id,state`` rows.

    Times print with exactly one decimal, so a write/read/write
    round-trip is byte-identical.
    """
    own = isinstance(sink, (str, bytes))
    f = open(sink, "w") if own else sink
    try:
        f.write("time_s,sensor_id,state\n")
        for t, i, s in zip(stream.times, stream.sensor_ids, stream.states):
            f.write(f"{t:.1f},{i},{s}\n")
    finally:
        if own:
            f.close()


def read_events(source) -> EventStream:
    """Parse the canonical event CSV; malformed rows name their line."""
    own = isinstance(source, (str, bytes))
    f = open(source) if own else source
    try:
        first = f.readline()
        lineno = 1
        if first.strip() != "time_s,sensor_id,state":
            raise ValueError(f"line 1: expected header 'time_s,sensor_id,state'")
        times: list[float] = []
        ids: list[int] = []
        states: list[int] = []
        for line in f:
            lineno += 1
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(parts)}")
            try:
                t = float(parts[0])
                i = int(parts[1])
                s = int(parts[2])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed event {line!r}") from None
            if s not in (0, 1):
                raise ValueError(f"line {lineno}: state must be 0 or 1, got {s}")
            times.append(t)
            ids.append(i)
            states.append(s)
    finally:
        if own:
            f.close()
    return EventStream(
        np.array(times, dtype=float),
        np.array(ids, dtype=np.int16),
        np.array(states, dtype=np.int8),
    )


def events_to_string(stream: EventStream) -> str:
    buf = io.StringIO()
    write_events(stream, buf)
    return buf.getvalue()
