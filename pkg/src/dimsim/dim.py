"""Decentralized intersection management: per-vehicle zone logic.

Every vehicle evaluates the same rule against the same observations, so the
right-of-way set it computes for itself is the one every other vehicle
computes too.  The engine asks only the front uncommitted vehicle of each arm
for a decision; everything behind it is governed by car following.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Sequence

from dimsim.clique import RightOfWaySet, decide
from dimsim.engine import HOLD, PROCEED, Action, WorldSnapshot
from dimsim.harmony import HarmonyMatrix, harmony
from dimsim.topology import Maneuver, ZoneTag, arm_label


class ControllerInvariantError(RuntimeError):
    pass


@dataclass
class DimVehicleState:
    phase: ZoneTag
    has_row: bool = False
    crossing: bool = False
    committed: bool = False


@lru_cache(maxsize=8192)
def _cached_decide(intents: tuple[tuple[Hashable, Maneuver], ...], H: HarmonyMatrix,
                   priority: tuple[int, ...]) -> RightOfWaySet:
    return decide(intents, H, priority)


def controller_step(vehicle, observed_intents: Sequence[tuple[Hashable, Maneuver]],
                    H: HarmonyMatrix, priority: Sequence[int], intersection_busy: bool,
                    red_zone_speed: float | None = None) -> Action:
    """Zone rule for one vehicle.

    ``vehicle`` needs ``vid``, ``zone`` and ``latched`` attributes.  A latched
    vehicle has already been granted the box (it is past the point where it can
    stop, or more than half of it is in the green zone) and keeps going.
    """
    zone = vehicle.zone
    if vehicle.latched or zone in (ZoneTag.INSIDE, ZoneTag.OUTBOUND, ZoneTag.EXITED):
        return PROCEED
    declared = any(vid == vehicle.vid for vid, _ in observed_intents)
    if declared:
        row = _cached_decide(tuple(sorted(observed_intents, key=lambda it: it[1].entry)), H, tuple(priority))
        if vehicle.vid in row and not intersection_busy:
            return PROCEED
        return HOLD
    if zone in (ZoneTag.YELLOW, ZoneTag.GREEN):
        raise ControllerInvariantError(f"vehicle {vehicle.vid} is at the stop zones without a declared intent")
    if zone is ZoneTag.RED and red_zone_speed is not None:
        return Action(False, red_zone_speed)
    return HOLD


class DimController:
    name = "DIM"

    def __init__(self, priority: Sequence[int] | None = None, strict_crossing_gate: bool = False) -> None:
        self.priority = tuple(priority) if priority is not None else None
        self.strict = strict_crossing_gate
        self.view_range = 0.0
        self.engine = None

    def bind(self, engine) -> None:
        self.engine = engine
        if self.priority is None:
            self.priority = tuple(range(engine.n))
        if sorted(self.priority) != list(range(engine.n)):
            raise ValueError("priority must be a permutation of the arms")

    def busy(self, vehicle, crossers) -> bool:
        """Whether a crossing vehicle from another arm blocks ``vehicle``."""
        for c in crossers:
            if c.arm == vehicle.arm:
                continue
            if self.strict or self.engine.conflicts(c.maneuver, vehicle.maneuver):
                return True
        return False

    def actions(self, snap: WorldSnapshot) -> dict[int, Action]:
        out: dict[int, Action] = {}
        vred = self.engine.spec.red_zone_speed
        for lead in snap.leads:
            if lead is None:
                continue
            out[lead.vid] = controller_step(lead, snap.participants, self.engine.H, self.priority,
                                            self.busy(lead, snap.crossers), vred)
        return out


# -- exhaustive deadlock check ----------------------------------------------

@dataclass
class DeadlockReport:
    n: int
    states_checked: int = 0
    violations: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        lines = [f"deadlock check, {self.n}-way intersection",
                 f"  states checked: {self.states_checked}",
                 f"  violations:     {len(self.violations)}"]
        for state, msg in self.violations[:20]:
            lines.append(f"    {_state_name(state)}: {msg}")
        return "\n".join(lines)


def _state_name(state: tuple[int, ...]) -> str:
    parts = [f"V{arm_label(i)}{k}" for i, k in enumerate(state) if k]
    return "{" + ", ".join(parts) + "}"


def verify_deadlock_free(n: int, H: HarmonyMatrix, priority: Sequence[int] | None = None) -> DeadlockReport:
    """Check every arrangement of at most one vehicle per arm.

    For each state the decision is recomputed from every present vehicle's
    point of view (its own intent listed first, the rest in a rotated order)
    and must be non-empty, identical across vehicles and pairwise harmonious.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    priority = tuple(range(n)) if priority is None else tuple(priority)
    report = DeadlockReport(n)
    for state in itertools.product(range(n), repeat=n):
        if not any(state):
            continue
        report.states_checked += 1
        intents = [(arm_label(i), Maneuver(i, k)) for i, k in enumerate(state) if k]
        views = [intents[j:] + intents[:j] for j in range(len(intents))]
        results = [decide(view, H, priority) for view in views]
        first = results[0]
        if not first:
            report.violations.append((state, "no vehicle receives right of way"))
            continue
        if any(r != first for r in results[1:]):
            report.violations.append((state, "vehicles disagree on the right-of-way set"))
            continue
        mans = first.clique_maneuvers
        for a, b in itertools.combinations(mans, 2):
            if not harmony(a, b, H):
                report.violations.append((state, f"{a.name} and {b.name} conflict"))
                break
    return report
