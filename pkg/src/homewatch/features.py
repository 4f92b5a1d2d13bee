"""Event-stream preprocessing: per-second activation runs, label tracks,
nonresponse durations and the per-anomaly feature sets.

Second indexing follows the activation-matrix convention: second ``j``
(1-based) covers the half-open real interval ``(j-1, j]``, and a sensor
is active in second ``j`` when it was on at any instant of it.  Nine
simulated years mean ~2.8e8 seconds, so nothing here materialises dense
per-second arrays; everything stays run-length (memory scales with the
number of events, not with time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .floorplan import MOTION_KINDS, SensorKind, SensorLayout, distance_matrix
from .metrics import IntervalSet
from .sensors import EventStream

FORGETTING_WINDOW_SECONDS = 7200
DAY_SECONDS = 86400
NRD_CAP_SECONDS = 86400


def _merge_runs(runs: list[tuple[int, int]]) -> np.ndarray:
    """Merge sorted 1-based inclusive second runs that touch or overlap."""
    if not runs:
        return np.empty((0, 2), dtype=np.int64)
    merged = [runs[0]]
    for a, b in runs[1:]:
        pa, pb = merged[-1]
        if a <= pb + 1:
            merged[-1] = (pa, max(pb, b))
        else:
            merged.append((a, b))
    return np.array(merged, dtype=np.int64)


@dataclass
class ActivationMatrix:
    """Sparse S x T binary activation summary.

    ``runs[i]`` holds the maximal runs of active seconds of sensor ``i``
    as a (k, 2) array of 1-based inclusive bounds.
    """

    sensor_count: int
    total_seconds: int
    runs: list[np.ndarray]

    def active_seconds(self, sensor_id: int) -> int:
        r = self.runs[sensor_id]
        if len(r) == 0:
            return 0
        return int((r[:, 1] - r[:, 0] + 1).sum())

    def is_active(self, sensor_id: int, second: int) -> bool:
        r = self.runs[sensor_id]
        if len(r) == 0:
            return False
        k = int(np.searchsorted(r[:, 0], second, side="right")) - 1
        return k >= 0 and second <= r[k, 1]

    def to_dense(self) -> np.ndarray:
        """Dense S x T array (second j at column j-1); small inputs only."""
        if self.sensor_count * self.total_seconds > 50_000_000:
            raise ValueError("matrix too large to densify")
        x = np.zeros((self.sensor_count, self.total_seconds), dtype=np.int8)
        for i, r in enumerate(self.runs):
            for a, b in r:
                x[i, a - 1 : b] = 1
        return x

    def column_change_seconds(self, sensor_ids: list[int] | None = None) -> np.ndarray:
        """Sorted unique seconds at which any listed sensor's bit flips.

        Returned values are run starts and (run ends + 1); between two
        consecutive change points every column is constant.
        """
        ids = range(self.sensor_count) if sensor_ids is None else sensor_ids
        pieces = [np.array([1, self.total_seconds + 1], dtype=np.int64)]
        for i in ids:
            r = self.runs[i]
            if len(r):
                pieces.append(r[:, 0])
                pieces.append(r[:, 1] + 1)
        changes = np.unique(np.concatenate(pieces))
        return changes[(changes >= 1) & (changes <= self.total_seconds + 1)]


def binarize(events: EventStream, sensor_count: int, total_seconds: int) -> ActivationMatrix:
    """Summarise an event stream into per-second activation runs.

    An on-span [a, b] marks every second whose interval it touches, so
    on at 3.2 and off at 8.7 activates seconds 4 through 9.  A sensor
    left on at stream end stays active through the horizon.
    """
    runs: list[list[tuple[int, int]]] = [[] for _ in range(sensor_count)]
    if len(events):
        if float(events.times.max()) >= total_seconds:
            raise ValueError(
                f"event at {events.times.max():.1f}s is beyond the {total_seconds}s horizon"
            )
        order = np.lexsort((events.states, events.times))
        times = events.times[order]
        ids = events.sensor_ids[order]
        states = events.states[order]
        for sid in np.unique(ids):
            mask = ids == sid
            st = states[mask]
            tt = times[mask]
            expected = 1
            spans: list[tuple[float, float]] = []
            pending: float | None = None
            for t, s in zip(tt, st):
                if s != expected:
                    raise ValueError(f"sensor {sid}: events do not alternate starting with on")
                if s == 1:
                    pending = t
                else:
                    spans.append((pending, t))
                    pending = None
                expected = 1 - expected
            if pending is not None:
                spans.append((pending, float(total_seconds)))
            sec_runs = []
            for a, b in spans:
                ja = max(1, int(math.ceil(a - 1e-9)))
                jb = min(total_seconds, int(math.ceil(b - 1e-9)))
                if ja <= jb:
                    sec_runs.append((ja, jb))
            runs[int(sid)] = sec_runs
    return ActivationMatrix(
        sensor_count=sensor_count,
        total_seconds=total_seconds,
        runs=[_merge_runs(r) if isinstance(r, list) else r for r in runs],
    )


@dataclass
class LabelTrack:
    """Binary anomaly labels at one summarisation unit, run-length stored.

    Intervals are 0-based closed in track units; entry ``k`` covers the
    real time span ``(k*unit, (k+1)*unit]``.
    """

    length: int
    unit_seconds: int
    intervals: IntervalSet

    def __post_init__(self) -> None:
        for s, e in self.intervals:
            if s < 0 or e >= self.length:
                raise ValueError(f"interval [{s}, {e}] outside track of length {self.length}")

    @property
    def positive_units(self) -> int:
        return sum(e - s + 1 for s, e in self.intervals)

    def to_array(self) -> np.ndarray:
        return self.intervals.to_array(self.length)

    @staticmethod
    def from_array(y: np.ndarray, unit_seconds: int) -> "LabelTrack":
        from .metrics import label_intervals

        return LabelTrack(len(y), unit_seconds, label_intervals(y))


def summarize_labels(
    episodes: list, unit_seconds: int, horizon_seconds: int
) -> LabelTrack:
    """Mark every unit a ground-truth episode touches.

    ``episodes`` is anything with ``start``/``end`` in seconds.  The
    horizon must be a whole number of units.
    """
    if horizon_seconds % unit_seconds:
        raise ValueError(f"unit {unit_seconds}s does not divide horizon {horizon_seconds}s")
    length = horizon_seconds // unit_seconds
    marks: list[tuple[int, int]] = []
    for ep in episodes:
        k0 = int(math.floor(ep.start / unit_seconds))
        k1 = int(math.ceil(ep.end / unit_seconds)) - 1
        k0 = max(0, k0)
        k1 = min(length - 1, k1)
        if k0 <= k1:
            marks.append((k0, k1))
    marks.sort()
    merged: list[tuple[int, int]] = []
    for a, b in marks:
        if merged and a <= merged[-1][1] + 1:
            merged[-1] = (merged[-1][0], max(merged[-1][1], b))
        else:
            merged.append((a, b))
    return LabelTrack(length, unit_seconds, IntervalSet(tuple(merged)))


@dataclass
class NonresponseDurations:
    """Per-motion-sensor elapsed time since each sensor last fired.

    Infrared and door sensors reset their counter on every active
    second; pressure mats only on a rising edge, so standing on a mat
    lets its counter keep growing.  Counters start from a virtual reset
    at second 0 and cap at one day.
    """

    motion_ids: tuple[int, ...]
    total_seconds: int
    # Per sensor: sorted anchor seconds r, value(j) = j - max r <= j.
    # For infrared/door an extra runs array zeroes values inside runs.
    anchors: list[np.ndarray]
    zero_runs: list[np.ndarray | None]

    @property
    def feature_count(self) -> int:
        return len(self.motion_ids)

    def values_at(self, seconds: np.ndarray) -> np.ndarray:
        """NRD feature rows for the given 1-based seconds: (n, S_M) int32."""
        seconds = np.asarray(seconds, dtype=np.int64)
        out = np.empty((len(seconds), self.feature_count), dtype=np.int32)
        for k in range(self.feature_count):
            anchors = self.anchors[k]
            idx = np.searchsorted(anchors, seconds, side="right") - 1
            last = np.where(idx >= 0, anchors[np.maximum(idx, 0)], 0)
            vals = seconds - last
            zr = self.zero_runs[k]
            if zr is not None and len(zr):
                ridx = np.searchsorted(zr[:, 0], seconds, side="right") - 1
                inside = (ridx >= 0) & (seconds <= zr[np.maximum(ridx, 0), 1])
                vals = np.where(inside, 0, vals)
            out[:, k] = np.minimum(vals, NRD_CAP_SECONDS)
        return out


def nonresponse_duration(matrix: ActivationMatrix, layout: SensorLayout) -> NonresponseDurations:
    motion_ids = tuple(layout.motion_sensor_ids)
    anchors: list[np.ndarray] = []
    zero_runs: list[np.ndarray | None] = []
    kind_by_id = {s.id: s.kind for s in layout.sensors}
    for sid in motion_ids:
        r = matrix.runs[sid]
        if kind_by_id[sid] is SensorKind.PRESSURE:
            # Rising edges only; the counter runs from the run start.
            anchors.append(np.concatenate(([0], r[:, 0])) if len(r) else np.array([0]))
            zero_runs.append(None)
        else:
            # Counter is 0 across the run and counts from the run end.
            anchors.append(np.concatenate(([0], r[:, 1])) if len(r) else np.array([0]))
            zero_runs.append(r)
    return NonresponseDurations(
        motion_ids=motion_ids,
        total_seconds=matrix.total_seconds,
        anchors=anchors,
        zero_runs=zero_runs,
    )


def _clip_runs(runs: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Intersect 1-based inclusive runs with [lo, hi]."""
    if len(runs) == 0:
        return runs
    a = np.maximum(runs[:, 0], lo)
    b = np.minimum(runs[:, 1], hi)
    keep = a <= b
    return np.stack([a[keep], b[keep]], axis=1)


def _runs_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """Whether two sorted run lists share any second."""
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i, 1] < b[j, 0]:
            i += 1
        elif b[j, 1] < a[i, 0]:
            j += 1
        else:
            return True
    return False


def forgetting_features(matrix: ActivationMatrix, layout: SensorLayout) -> np.ndarray:
    """Two features per two-hour window, as an (n_windows, 2) array.

    Column 0: summed active seconds of all cost sensors in the window.
    Column 1: the largest distance from an active cost sensor to any
    other sensor active at the same second, 0 when no cost sensor ran.
    """
    total = matrix.total_seconds
    n_windows = total // FORGETTING_WINDOW_SECONDS
    dist = distance_matrix(layout)
    cost_ids = layout.cost_sensor_ids
    out = np.zeros((n_windows, 2))
    for w in range(n_windows):
        lo = w * FORGETTING_WINDOW_SECONDS + 1
        hi = (w + 1) * FORGETTING_WINDOW_SECONDS
        f1 = 0
        f2 = 0.0
        for c in cost_ids:
            cruns = _clip_runs(matrix.runs[c], lo, hi)
            if len(cruns) == 0:
                continue
            f1 += int((cruns[:, 1] - cruns[:, 0] + 1).sum())
            for s in range(matrix.sensor_count):
                if s == c or dist[c, s] <= f2:
                    continue
                sruns = _clip_runs(matrix.runs[s], lo, hi)
                if len(sruns) and _runs_intersect(cruns, sruns):
                    f2 = float(dist[c, s])
        out[w, 0] = f1
        out[w, 1] = f2
    return out


@dataclass
class DailySeries:
    """Per-day sleep hours and outing counts estimated from events."""

    sleep_hours: np.ndarray
    outings: np.ndarray

    @property
    def days(self) -> int:
        return len(self.sleep_hours)


def _on_times(events: EventStream, ids: set[int]) -> np.ndarray:
    mask = (events.states == 1) & np.isin(events.sensor_ids, list(ids))
    return np.sort(events.times[mask])


def estimate_sleep(
    events: EventStream, layout: SensorLayout, horizon_days: int
) -> np.ndarray:
    """Daily sleep hours from bed-sensor activation gaps.

    A gap between consecutive bed-sensor activations counts as sleep
    when it exceeds one minute and no other motion sensor fires inside
    it.  Sleep is attributed to the day the gap starts.
    """
    bed = _on_times(events, set(layout.bed_sensor_ids))
    other_ids = set(layout.motion_sensor_ids) - set(layout.bed_sensor_ids)
    other = _on_times(events, other_ids)
    sleep = np.zeros(horizon_days)
    if len(bed) < 2:
        return sleep
    starts = bed[:-1]
    ends = bed[1:]
    gaps = ends - starts
    quiet = np.searchsorted(other, ends, side="left") - np.searchsorted(
        other, starts, side="right"
    ) == 0
    ok = (gaps > 60.0) & quiet
    days = np.minimum((starts[ok] // DAY_SECONDS).astype(int), horizon_days - 1)
    np.add.at(sleep, days, gaps[ok] / 3600.0)
    return sleep


def estimate_outings(
    events: EventStream, layout: SensorLayout, horizon_days: int
) -> np.ndarray:
    """Daily outing counts from door-activation gaps.

    A door activation followed by over a minute of silence from every
    other motion sensor until the next door activation is one outing.
    """
    door = _on_times(events, {layout.door_sensor_id})
    other_ids = set(layout.motion_sensor_ids) - {layout.door_sensor_id}
    other = _on_times(events, other_ids)
    outings = np.zeros(horizon_days)
    if len(door) < 2:
        return outings
    starts = door[:-1]
    ends = door[1:]
    gaps = ends - starts
    quiet = np.searchsorted(other, ends, side="left") - np.searchsorted(
        other, starts, side="right"
    ) == 0
    ok = (gaps > 60.0) & quiet
    days = np.minimum((starts[ok] // DAY_SECONDS).astype(int), horizon_days - 1)
    np.add.at(outings, days, 1.0)
    return outings


def daily_series(events: EventStream, layout: SensorLayout, horizon_days: int) -> DailySeries:
    return DailySeries(
        sleep_hours=estimate_sleep(events, layout, horizon_days),
        outings=estimate_outings(events, layout, horizon_days),
    )


def write_label_track(track: LabelTrack, sink) -> None:
    """Columnar text form: header block then one start,end row per run."""
    own = isinstance(sink, (str, bytes))
    f = open(sink, "w") if own else sink
    try:
        f.write("unit_seconds,length\n")
        f.write(f"{track.unit_seconds},{track.length}\n")
        f.write("start,end\n")
        for s, e in track.intervals:
            f.write(f"{s},{e}\n")
    finally:
        if own:
            f.close()


def read_label_track(source) -> LabelTrack:
    own = isinstance(source, (str, bytes))
    f = open(source) if own else source
    try:
        if f.readline().strip() != "unit_seconds,length":
            raise ValueError("bad label track header")
        unit_s, length_s = f.readline().strip().split(",")
        if f.readline().strip() != "start,end":
            raise ValueError("bad label track interval header")
        intervals = []
        for line in f:
            line = line.strip()
            if line:
                a, b = line.split(",")
                intervals.append((int(a), int(b)))
    finally:
        if own:
            f.close()
    return LabelTrack(int(length_s), int(unit_s), IntervalSet(tuple(intervals)))
