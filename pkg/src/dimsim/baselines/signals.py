"""Fixed-time (Webster) and queue-responsive adaptive signal control.

One phase per arm: with a single inbound lane every movement of that arm is
served during its green.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from dimsim.engine import HOLD, PROCEED, Action, WorldSnapshot
from dimsim.kinematics import can_stop

GREEN, AMBER, RED = "G", "Y", "R"

# Green times (s) per density from the published fixed-time plan, amber 2 s.
PUBLISHED_GREEN = {150: 5.0, 200: 7.0, 250: 10.75, 300: 19.75, 350: 61.75}
DEFAULT_AMBER = 2.0

GREEN_SPLIT_NOTE = (
    "Effective green is computed as (y_a / Y) * (C0 - L). The quotient form "
    "(y_a / Y) / (C0 - L) is dimensionally inconsistent and does not reproduce "
    "the published green times, while the product form does."
)
GREEN_300_NOTE = (
    "At 300 PCU/hr/lane Webster gives 19.25 s green; the published table lists "
    "19.75 s. The computed value is used."
)


class OversaturatedError(ValueError):
    """Sum of critical ratios >= 1: a fixed plan cannot serve the demand."""


@dataclass(frozen=True)
class WebsterInputs:
    lost_time: float
    y_per_phase: tuple[float, ...]
    saturation_flow: float = 1500.0

    def __post_init__(self) -> None:
        if self.saturation_flow <= 0:
            raise ValueError("saturation flow must be positive")
        if any(y < 0 for y in self.y_per_phase):
            raise ValueError("critical ratios must be non-negative")

    @classmethod
    def from_densities(cls, densities: Sequence[float], saturation_flow: float = 1500.0) -> "WebsterInputs":
        n = len(densities)
        return cls(2.0 * n, tuple(d / saturation_flow for d in densities), saturation_flow)


@dataclass(frozen=True)
class Phase:
    arms: frozenset[int]
    green: float
    amber: float


@dataclass(frozen=True)
class SignalPlan:
    phases: tuple[Phase, ...]
    all_red: float = 0.0
    cycle_length: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("a plan needs at least one phase")
        if any(p.green <= 0 or p.amber < 0 for p in self.phases) or self.all_red < 0:
            raise ValueError("phase durations must be positive")
        total = sum(p.green + p.amber for p in self.phases) + self.all_red * len(self.phases)
        object.__setattr__(self, "cycle_length", total)

    @property
    def greens(self) -> list[float]:
        return [p.green for p in self.phases]

    @property
    def n_arms(self) -> int:
        return 1 + max(a for p in self.phases for a in p.arms)

    @classmethod
    def one_phase_per_arm(cls, greens: Sequence[float], amber: float = DEFAULT_AMBER,
                          all_red: float = 0.0) -> "SignalPlan":
        return cls(tuple(Phase(frozenset([i]), g, amber) for i, g in enumerate(greens)), all_red)


def webster_cycle(inputs: WebsterInputs) -> float:
    y = sum(inputs.y_per_phase)
    if y >= 1.0:
        raise OversaturatedError(f"sum of critical ratios {y:.4f} >= 1")
    return (1.5 * inputs.lost_time + 5.0) / (1.0 - y)


def webster_plan(inputs: WebsterInputs, amber: float = DEFAULT_AMBER) -> SignalPlan:
    """Optimal cycle and green split.  See ``GREEN_SPLIT_NOTE`` for the green formula."""
    cycle = webster_cycle(inputs)
    y = sum(inputs.y_per_phase)
    if y == 0:
        raise ValueError("no demand: Webster split undefined")
    effective = cycle - inputs.lost_time
    greens = [ya / y * effective for ya in inputs.y_per_phase]
    n = len(greens)
    all_red = max(0.0, inputs.lost_time - n * amber) / n
    return SignalPlan.one_phase_per_arm(greens, amber, all_red)


def published_plan(density: float, n: int = 4) -> SignalPlan:
    """Plan from the published table (balanced 4-phase operation)."""
    if density not in PUBLISHED_GREEN:
        raise ValueError(f"no published timing for density {density:g}")
    g = PUBLISHED_GREEN[int(density)]
    return SignalPlan.one_phase_per_arm([g] * n, DEFAULT_AMBER)


def signal_states(plan: SignalPlan, n_arms: int, phase_idx: int, in_phase: float) -> tuple[str, ...]:
    phase = plan.phases[phase_idx]
    if in_phase < phase.green:
        lit = GREEN
    elif in_phase < phase.green + phase.amber:
        lit = AMBER
    else:
        lit = RED
    return tuple(lit if a in phase.arms else RED for a in range(n_arms))


def fts_controller(plan: SignalPlan, t: float, n_arms: int | None = None) -> tuple[str, ...]:
    """Per-arm indication at time ``t`` for a fixed cyclic plan."""
    if t < 0:
        raise ValueError("t must be non-negative")
    n_arms = plan.n_arms if n_arms is None else n_arms
    tc = math.fmod(t, plan.cycle_length)
    for i, p in enumerate(plan.phases):
        span = p.green + p.amber + plan.all_red
        if tc < span - 1e-12:
            return signal_states(plan, n_arms, i, tc)
        tc -= span
    return signal_states(plan, n_arms, 0, 0.0)


class AdaptiveSignal:
    """Queue-responsive green extension between min and max bounds.

    Each phase starts with ``min_factor * base`` green, then is extended in
    ``increment`` steps while its arm has queued vehicles, up to
    ``max_factor * base``.  With ``skip_empty`` a phase whose queue is empty at
    onset is skipped as long as another arm has demand.
    """

    def __init__(self, plan: SignalPlan, min_factor: float = 0.5, max_factor: float = 2.0,
                 increment: float = 1.0, skip_empty: bool = False) -> None:
        if not 0 < min_factor <= max_factor:
            raise ValueError("need 0 < min_factor <= max_factor")
        self.plan = plan
        self.n_arms = plan.n_arms
        self.min_green = [min_factor * p.green for p in plan.phases]
        self.max_green = [max_factor * p.green for p in plan.phases]
        self.increment = increment
        self.skip_empty = skip_empty
        self.phase = 0
        self.stage = GREEN
        self.elapsed = 0.0
        self.next_check = self.min_green[0]
        self.history: list[tuple[int, float]] = []
        self._started = False

    def _demand(self, phase: int, queues: Sequence[int]) -> bool:
        return any(queues[a] > 0 for a in self.plan.phases[phase].arms)

    def _start_phase(self, idx: int, queues: Sequence[int]) -> None:
        n = len(self.plan.phases)
        if self.skip_empty and any(queues):
            for _ in range(n):
                if self._demand(idx, queues):
                    break
                idx = (idx + 1) % n
        self.phase = idx
        self.stage = GREEN
        self.elapsed = 0.0
        self.next_check = self.min_green[idx]

    def states(self) -> tuple[str, ...]:
        lit = self.stage
        arms = self.plan.phases[self.phase].arms
        return tuple(lit if a in arms else RED for a in range(self.n_arms))

    def advance(self, queues: Sequence[int], dt: float) -> tuple[str, ...]:
        """Indication for the coming step, then advance the phase clock by ``dt``."""
        if not self._started:
            self._start_phase(0, queues)
            self._started = True
        eps = 1e-9
        i = self.phase
        if self.stage == GREEN and self.elapsed >= self.next_check - eps:
            if self.elapsed >= self.max_green[i] - eps or not self._demand(i, queues):
                self.history.append((i, self.elapsed))
                self.stage, self.elapsed = AMBER, 0.0
            else:
                self.next_check = min(self.next_check + self.increment, self.max_green[i])
        if self.stage == AMBER and self.elapsed >= self.plan.phases[i].amber - eps:
            self.stage, self.elapsed = RED, 0.0
        if self.stage == RED and self.elapsed >= self.plan.all_red - eps:
            self._start_phase((i + 1) % len(self.plan.phases), queues)
        out = self.states()
        self.elapsed += dt
        return out


def ats_controller(ats: AdaptiveSignal, queues: Sequence[int], dt: float) -> tuple[str, ...]:
    return ats.advance(queues, dt)


class SignalController:
    """Drives vehicles from a per-arm signal indication.

    Green: proceed unless a conflicting vehicle from another arm is still in
    or committed to the box.  Amber and red: stop if the vehicle can still
    stop; vehicles past that point are already committed by the engine.
    """

    simplified = False

    def __init__(self, plan: SignalPlan) -> None:
        self.plan = plan
        self.view_range = 0.0
        self.engine = None
        self.signals: tuple[str, ...] | None = None

    def bind(self, engine) -> None:
        self.engine = engine

    def indication(self, snap: WorldSnapshot) -> tuple[str, ...]:
        raise NotImplementedError

    def actions(self, snap: WorldSnapshot) -> dict[int, Action]:
        sig = self.indication(snap)
        self.signals = sig
        eng = self.engine
        out: dict[int, Action] = {}
        for lead in snap.leads:
            if lead is None:
                continue
            if sig[lead.arm] != GREEN:
                out[lead.vid] = HOLD
                continue
            blocked = any(c.arm != lead.arm and eng.conflicts(c.maneuver, lead.maneuver)
                          for c in snap.crossers)
            if blocked and can_stop(lead.speed, lead.pos - eng.hold_point, eng.cfg.max_decel):
                out[lead.vid] = HOLD
            else:
                out[lead.vid] = PROCEED
        return out


class FixedTimeController(SignalController):
    name = "FTS"

    def indication(self, snap: WorldSnapshot) -> tuple[str, ...]:
        return fts_controller(self.plan, snap.time, self.engine.n)


class AdaptiveController(SignalController):
    name = "ATS"
    simplified = True

    def __init__(self, plan: SignalPlan, min_factor: float = 0.5, max_factor: float = 2.0,
                 increment: float = 1.0, skip_empty: bool = False) -> None:
        super().__init__(plan)
        self.ats = AdaptiveSignal(plan, min_factor, max_factor, increment, skip_empty)

    def indication(self, snap: WorldSnapshot) -> tuple[str, ...]:
        return ats_controller(self.ats, snap.queues, self.engine.dt)
