"""Studio floor plan, sensor layout and the geometric queries they share.

Coordinates are metres with the origin at the south-west corner; x runs
east across the 5 m width and y runs north along the 12 m length.  The
plan and layout are immutable after construction and safe to share
between parallel workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

Point = tuple[float, float]
Rect = tuple[float, float, float, float]  # x0, y0, x1, y1

INFRARED_RADIUS_M = 0.5
BODY_RADIUS_UPRIGHT_M = 0.25
BODY_RADIUS_FALLEN_M = 0.75


class SensorKind(str, Enum):
    INFRARED = "infrared_motion"
    PRESSURE = "pressure"
    DOOR = "door"
    FLOW = "flow"
    POWER = "power"


# Sample rate in Hz per sensor kind.  Utility-meter style sensors (flow,
# power) report once per second; the rest at 10 Hz.
SAMPLE_RATE_HZ = {
    SensorKind.INFRARED: 10,
    SensorKind.PRESSURE: 10,
    SensorKind.DOOR: 10,
    SensorKind.FLOW: 1,
    SensorKind.POWER: 1,
}

# Kinds that carry information about the resident's body position.
MOTION_KINDS = (SensorKind.INFRARED, SensorKind.PRESSURE, SensorKind.DOOR)
COST_KINDS = (SensorKind.FLOW, SensorKind.POWER)


@dataclass(frozen=True)
class SensorSpec:
    """One binary sensor: identity, kind, placement and footprint."""

    id: int
    kind: SensorKind
    position: Point
    # Detection circle radius for infrared; None otherwise.
    radius: float | None = None
    # Floor rectangle for pressure mats; None otherwise.
    rect: Rect | None = None
    # Appliance/faucet name for flow and power sensors; None otherwise.
    appliance: str | None = None

    @property
    def sample_rate(self) -> int:
        return SAMPLE_RATE_HZ[self.kind]

    @property
    def sample_step(self) -> float:
        return 1.0 / SAMPLE_RATE_HZ[self.kind]


@dataclass(frozen=True)
class FloorPlan:
    width: float
    height: float
    furniture: tuple[tuple[str, Rect], ...]
    activity_anchors: dict[str, Point]
    entrance: Point

    def anchor(self, name: str) -> Point:
        try:
            return self.activity_anchors[name]
        except KeyError:
            raise KeyError(f"no activity anchor named {name!r}") from None


@dataclass(frozen=True)
class SensorLayout:
    sensors: tuple[SensorSpec, ...]
    bed_sensor_ids: frozenset[int]
    door_sensor_id: int
    positions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pos = np.array([s.position for s in self.sensors], dtype=float)
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return len(self.sensors)

    @property
    def cost_sensor_ids(self) -> tuple[int, ...]:
        return tuple(s.id for s in self.sensors if s.kind in COST_KINDS)

    @property
    def motion_sensor_ids(self) -> tuple[int, ...]:
        """Infrared, pressure and door sensors, in id order."""
        return tuple(s.id for s in self.sensors if s.kind in MOTION_KINDS)

    def by_appliance(self, name: str) -> SensorSpec:
        for s in self.sensors:
            if s.appliance == name:
                return s
        raise KeyError(f"no cost sensor bound to appliance {name!r}")


def sensor_distance(layout: SensorLayout, a: int, b: int) -> float:
    """Euclidean distance in metres between two sensor positions."""
    n = layout.count
    if not (0 <= a < n) or not (0 <= b < n):
        raise ValueError(f"unknown sensor id in pair ({a}, {b}); valid range 0..{n - 1}")
    pa = layout.positions[a]
    pb = layout.positions[b]
    return float(math.hypot(pa[0] - pb[0], pa[1] - pb[1]))


def distance_matrix(layout: SensorLayout) -> np.ndarray:
    """All pairwise sensor distances as an S x S symmetric matrix."""
    pos = layout.positions
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff**2).sum(axis=2))


def point_in_rect(p: Point, rect: Rect) -> bool:
    x0, y0, x1, y1 = rect
    return x0 <= p[0] <= x1 and y0 <= p[1] <= y1


def point_rect_distance(p: Point, rect: Rect) -> float:
    """Distance from a point to the nearest point of a rectangle."""
    x0, y0, x1, y1 = rect
    dx = max(x0 - p[0], 0.0, p[0] - x1)
    dy = max(y0 - p[1], 0.0, p[1] - y1)
    return math.hypot(dx, dy)


def validate(plan: FloorPlan, layout: SensorLayout) -> list[str]:
    """Check all structural invariants; returns human-readable violations.

    An empty list means the plan/layout pair is consistent.  Violations
    are data, not exceptions: callers decide whether to abort.
    """
    violations: list[str] = []

    if plan.width <= 0 or plan.height <= 0:
        violations.append(f"floor dimensions must be positive, got {plan.width}x{plan.height}")

    def in_bounds(p: Point) -> bool:
        return 0 <= p[0] <= plan.width and 0 <= p[1] <= plan.height

    for name, (x0, y0, x1, y1) in plan.furniture:
        if x0 >= x1 or y0 >= y1:
            violations.append(f"furniture {name!r} rectangle is degenerate")
        if not (in_bounds((x0, y0)) and in_bounds((x1, y1))):
            violations.append(f"furniture {name!r} extends outside the floor")

    for name, p in plan.activity_anchors.items():
        if not in_bounds(p):
            violations.append(f"anchor {name!r} at {p} is outside the floor")
    if not in_bounds(plan.entrance):
        violations.append("entrance is outside the floor")

    seen_ids: set[int] = set()
    for s in layout.sensors:
        if s.id in seen_ids:
            violations.append(f"duplicate sensor id {s.id}")
        seen_ids.add(s.id)
        if not in_bounds(s.position):
            violations.append(f"sensor {s.id} at {s.position} is outside the floor")
        if s.kind is SensorKind.INFRARED and s.radius is None:
            violations.append(f"infrared sensor {s.id} lacks a detection radius")
        if s.kind is SensorKind.PRESSURE and s.rect is None:
            violations.append(f"pressure sensor {s.id} lacks a floor rectangle")
        if s.kind in COST_KINDS and s.appliance is None:
            violations.append(f"{s.kind.value} sensor {s.id} is not bound to an appliance")
        if s.kind not in COST_KINDS and s.appliance is not None:
            violations.append(f"sensor {s.id} of kind {s.kind.value} must not bind an appliance")

    if seen_ids and sorted(seen_ids) != list(range(len(layout.sensors))):
        violations.append("sensor ids are not dense 0..S-1")

    if not layout.bed_sensor_ids:
        violations.append("bed_sensor_ids is empty")
    for sid in layout.bed_sensor_ids:
        if sid not in seen_ids:
            violations.append(f"bed sensor id {sid} does not exist")

    door_ids = [s.id for s in layout.sensors if s.kind is SensorKind.DOOR]
    if len(door_ids) != 1:
        violations.append(f"expected exactly one door sensor, found {len(door_ids)}")
    elif layout.door_sensor_id != door_ids[0]:
        violations.append("door_sensor_id does not match the door sensor")

    return violations


# Hand-placed infrared grid: roughly 1 m pitch along the walking routes
# between the entrance, kitchen, bathroom, dining table, sofa and bed.
# Index 23 is deliberately the bedside unit so that the bed-adjacent
# sensor trio is ids 23, 34 and 35.
_INFRARED_POSITIONS: tuple[Point, ...] = (
    (1.6, 0.7),  # 0  entrance hall, west
    (2.5, 0.8),  # 1  entrance hall, centre
    (3.4, 0.7),  # 2  entrance hall, east
    (1.3, 1.6),  # 3
    (2.4, 1.7),  # 4
    (3.5, 1.6),  # 5  stove front
    (1.3, 2.6),  # 6
    (2.4, 2.7),  # 7
    (3.5, 2.6),  # 8  kitchen sink front
    (0.8, 3.6),  # 9  bathroom sink front
    (1.9, 3.7),  # 10
    (3.0, 3.7),  # 11
    (4.1, 3.2),  # 12 east aisle by the sink
    (0.7, 4.6),  # 13 west aisle at the dining table
    (4.2, 4.6),  # 14 east aisle at the dining table
    (0.7, 5.7),  # 15
    (4.2, 5.7),  # 16
    (1.1, 6.4),  # 17 north of the dining area
    (2.4, 6.3),  # 18
    (3.7, 6.4),  # 19
    (1.9, 7.5),  # 20 sofa front
    (3.0, 7.4),  # 21
    (4.2, 7.5),  # 22 east aisle by the TV
    (1.9, 10.4),  # 23 bedside, next to the west pressure mat
    (1.6, 8.5),  # 24 north of the sofa
    (2.5, 8.4),  # 25
    (3.8, 8.5),  # 26
    (0.6, 9.3),  # 27 phone corner
    (2.2, 9.2),  # 28 bed approach, south-west
    (4.5, 9.2),  # 29 bed approach, south-east
    (1.4, 10.0),  # 30 wardrobe front, south
    (1.4, 11.0),  # 31 wardrobe front, north
    (4.6, 6.6),  # 32 east aisle
    (2.3, 11.3),  # 33 bed aisle, north-west corner
)


def default_plan() -> tuple[FloorPlan, SensorLayout]:
    """The shipped 5 m x 12 m studio with 41 sensors.

    Sensor ids: 0-33 infrared, 34-35 pressure mats beside the bed,
    36-37 flow (kitchen and bathroom faucets), 38-39 power (TV and
    kitchen stove), 40 the entrance door sensor.
    """
    furniture: tuple[tuple[str, Rect], ...] = (
        ("water_closet", (0.0, 0.5, 0.9, 1.7)),
        ("washing_machine", (0.0, 2.0, 0.8, 2.8)),
        ("refrigerator", (4.2, 0.3, 5.0, 1.0)),
        ("kitchen_stove", (4.2, 1.1, 5.0, 1.9)),
        ("cupboard", (4.2, 2.0, 5.0, 2.6)),
        ("trash_box", (4.5, 3.5, 5.0, 4.0)),
        ("dining_table", (1.8, 4.6, 3.2, 5.7)),
        ("chair_1", (1.3, 4.8, 1.7, 5.4)),
        ("chair_2", (3.3, 4.8, 3.7, 5.4)),
        ("sofa", (0.2, 7.0, 1.4, 8.6)),
        ("wardrobe", (0.2, 9.8, 1.0, 11.2)),
        ("bed", (2.6, 9.6, 4.6, 11.6)),
    )
    # Sitting or lying activities anchor on their furniture; standing
    # activities anchor on the open floor in front of it.
    anchors: dict[str, Point] = {
        "entrance": (2.5, 0.3),
        "toilet": (0.45, 1.1),
        "laundry": (1.1, 2.4),
        "bathroom_sink": (0.6, 3.4),
        "kitchen": (3.8, 1.5),
        "kitchen_sink": (3.8, 2.9),
        "fridge": (3.8, 0.65),
        "trash": (4.1, 3.75),
        "dining_table": (1.5, 5.1),
        "sofa": (0.8, 7.8),
        "tv": (4.5, 7.8),
        "phone": (0.6, 9.0),
        "wardrobe": (1.4, 10.5),
        "bed": (3.6, 10.6),
    }
    plan = FloorPlan(
        width=5.0,
        height=12.0,
        furniture=furniture,
        activity_anchors=anchors,
        entrance=(2.5, 0.0),
    )

    sensors: list[SensorSpec] = [
        SensorSpec(i, SensorKind.INFRARED, pos, radius=INFRARED_RADIUS_M)
        for i, pos in enumerate(_INFRARED_POSITIONS)
    ]
    # Pressure mats: 0.75 m^2 along the west side of the bed, 1.0 m^2 at
    # its foot.  Positions are the rect centres.
    mat_west: Rect = (2.0, 9.7, 2.6, 10.95)
    mat_foot: Rect = (2.8, 8.8, 4.05, 9.6)
    sensors.append(
        SensorSpec(34, SensorKind.PRESSURE, (2.3, 10.325), rect=mat_west)
    )
    sensors.append(
        SensorSpec(35, SensorKind.PRESSURE, (3.425, 9.2), rect=mat_foot)
    )
    sensors.append(SensorSpec(36, SensorKind.FLOW, (4.5, 2.9), appliance="kitchen_faucet"))
    sensors.append(SensorSpec(37, SensorKind.FLOW, (0.3, 3.4), appliance="bathroom_faucet"))
    sensors.append(SensorSpec(38, SensorKind.POWER, (4.8, 7.8), appliance="tv"))
    sensors.append(SensorSpec(39, SensorKind.POWER, (4.6, 1.5), appliance="stove"))
    sensors.append(SensorSpec(40, SensorKind.DOOR, (2.5, 0.05)))

    layout = SensorLayout(
        sensors=tuple(sensors),
        bed_sensor_ids=frozenset({23, 34, 35}),
        door_sensor_id=40,
    )
    return plan, layout


def plan_to_dict(plan: FloorPlan, layout: SensorLayout) -> dict:
    """Serializable form of a plan/layout pair (see docs in README)."""
    return {
        "floor": {
            "width": plan.width,
            "height": plan.height,
            "entrance": list(plan.entrance),
            "furniture": {name: list(rect) for name, rect in plan.furniture},
            "anchors": {name: list(p) for name, p in plan.activity_anchors.items()},
        },
        "sensors": [
            {
                "id": s.id,
                "kind": s.kind.value,
                "position": list(s.position),
                **({"radius": s.radius} if s.radius is not None else {}),
                **({"rect": list(s.rect)} if s.rect is not None else {}),
                **({"appliance": s.appliance} if s.appliance is not None else {}),
            }
            for s in layout.sensors
        ],
        "bed_sensor_ids": sorted(layout.bed_sensor_ids),
        "door_sensor_id": layout.door_sensor_id,
    }


def plan_from_dict(data: dict) -> tuple[FloorPlan, SensorLayout]:
    floor = data["floor"]
    plan = FloorPlan(
        width=float(floor["width"]),
        height=float(floor["height"]),
        furniture=tuple((name, tuple(rect)) for name, rect in floor["furniture"].items()),
        activity_anchors={name: tuple(p) for name, p in floor["anchors"].items()},
        entrance=tuple(floor["entrance"]),
    )
    sensors = tuple(
        SensorSpec(
            id=int(s["id"]),
            kind=SensorKind(s["kind"]),
            position=tuple(s["position"]),
            radius=s.get("radius"),
            rect=tuple(s["rect"]) if "rect" in s else None,
            appliance=s.get("appliance"),
        )
        for s in data["sensors"]
    )
    layout = SensorLayout(
        sensors=sensors,
        bed_sensor_ids=frozenset(data["bed_sensor_ids"]),
        door_sensor_id=int(data["door_sensor_id"]),
    )
    return plan, layout
