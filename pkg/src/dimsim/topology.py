"""Intersection geometry: arms, maneuvers, zones and conflict-box paths.

Arms are indexed ``0..n-1`` clockwise from true north and labelled
``a, b, c, ...``; a lower index means a higher default priority.  A maneuver
is an entry arm plus a clockwise offset ``k`` to the exit arm, so at a 4-way
intersection ``k=1`` is a left turn, ``k=2`` straight and ``k=3`` right
(left-hand traffic).

Longitudinal positions are signed distances to the conflict-box entry line:
positive while approaching, negative once the front bumper is past the line.
"""

from __future__ import annotations

import enum
import math
import string
from dataclasses import dataclass


class InvalidManeuver(ValueError):
    pass


class InvalidGeometry(ValueError):
    pass


def arm_label(index: int) -> str:
    if not 0 <= index < 26:
        raise InvalidGeometry(f"arm index {index} out of range")
    return string.ascii_lowercase[index]


def arm_index(label: str) -> int:
    idx = string.ascii_lowercase.find(label.lower())
    if len(label) != 1 or idx < 0:
        raise InvalidGeometry(f"bad arm label {label!r}")
    return idx


@dataclass(frozen=True, order=True)
class Maneuver:
    entry: int
    offset: int

    @property
    def name(self) -> str:
        return f"V{arm_label(self.entry)}{self.offset}"

    def check(self, n: int) -> "Maneuver":
        if not 0 <= self.entry < n or not 1 <= self.offset <= n - 1:
            raise InvalidManeuver(f"{self!r} is not a legal maneuver for n={n}")
        return self

    @classmethod
    def parse(cls, text: str) -> "Maneuver":
        """Parse ``Va1`` / ``a1`` style names."""
        s = text.strip()
        if s[:1] in ("V", "v") and len(s) > 2:
            s = s[1:]
        try:
            return cls(arm_index(s[0]), int(s[1:]))
        except (ValueError, IndexError, InvalidGeometry) as exc:
            raise InvalidManeuver(f"cannot parse maneuver {text!r}") from exc

    def __str__(self) -> str:
        return self.name


def all_maneuvers(n: int) -> list[Maneuver]:
    """Maneuvers in matrix order: arm a offsets 1..n-1, arm b, ..."""
    return [Maneuver(i, k) for i in range(n) for k in range(1, n)]


def exit_arm(m: Maneuver, n: int) -> int:
    m.check(n)
    return (m.entry + m.offset) % n


class ZoneTag(enum.Enum):
    APPROACH = "Approach"
    RED = "Red"
    YELLOW = "Yellow"
    GREEN = "Green"
    INSIDE = "InsideIntersection"
    OUTBOUND = "Outbound"
    EXITED = "Exited"


KMH = 1 / 3.6


@dataclass(frozen=True)
class IntersectionSpec:
    n_arms: int = 4
    arm_length: float = 500.0
    red_len: float = 30.0
    yellow_len: float = 6.0
    green_len: float = 2.0
    speed_limit: float = 40 * KMH
    red_zone_speed: float = 20 * KMH
    conflict_box_radius: float = 10.0

    def __post_init__(self) -> None:
        if self.n_arms < 3:
            raise InvalidGeometry("an intersection needs at least 3 arms")
        if self.n_arms > 26:
            raise InvalidGeometry("at most 26 arms are supported")
        for name in ("arm_length", "red_len", "yellow_len", "green_len",
                     "speed_limit", "red_zone_speed", "conflict_box_radius"):
            if not getattr(self, name) > 0:
                raise InvalidGeometry(f"{name} must be strictly positive")
        if self.red_zone_speed >= self.speed_limit:
            raise InvalidGeometry("red_zone_speed must be below speed_limit")
        if self.arm_length <= self.red_outer:
            raise InvalidGeometry("arm_length must exceed the sum of zone lengths")
        if self.arm_length <= self.conflict_box_radius + self.red_outer:
            raise InvalidGeometry("zones do not fit between spawn point and box")

    @property
    def yellow_outer(self) -> float:
        return self.green_len + self.yellow_len

    @property
    def red_outer(self) -> float:
        return self.green_len + self.yellow_len + self.red_len

    @property
    def lane_length(self) -> float:
        """Inbound (and outbound) lane length between the box edge and the arm end."""
        return self.arm_length - self.conflict_box_radius

    @property
    def nominal_path(self) -> float:
        return 2 * self.conflict_box_radius


def zone_of(pos: float, spec: IntersectionSpec, path_length: float | None = None) -> ZoneTag:
    """Zone for a front-bumper position measured to the box entry line.

    ``path_length`` is the length of the vehicle's path through the box; the
    box diameter is used when it is not given.
    """
    if pos >= 0:
        if pos < spec.green_len:
            return ZoneTag.GREEN
        if pos < spec.yellow_outer:
            return ZoneTag.YELLOW
        if pos < spec.red_outer:
            return ZoneTag.RED
        return ZoneTag.APPROACH
    inside = spec.nominal_path if path_length is None else path_length
    if pos > -inside:
        return ZoneTag.INSIDE
    if pos > -(inside + spec.lane_length):
        return ZoneTag.OUTBOUND
    return ZoneTag.EXITED


# -- circle model of the conflict box ---------------------------------------

def lane_offset_deg(n: int) -> float:
    """Angular offset of entry/exit points from the arm axis (half the free span)."""
    return 90.0 / n


def entry_angle(arm: int, n: int) -> float:
    return (arm * 360.0 / n + lane_offset_deg(n)) % 360.0


def exit_angle(arm: int, n: int) -> float:
    return (arm * 360.0 / n - lane_offset_deg(n)) % 360.0


def maneuver_chord(m: Maneuver, n: int) -> tuple[float, float]:
    """Endpoints (degrees, clockwise from north) of the maneuver's chord."""
    return entry_angle(m.entry, n), exit_angle(exit_arm(m, n), n)


def path_length(m: Maneuver, n: int, radius: float) -> float:
    a, b = maneuver_chord(m, n)
    sweep = math.radians(abs(a - b))
    return 2 * radius * abs(math.sin(sweep / 2))
