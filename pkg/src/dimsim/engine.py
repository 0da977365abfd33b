"""Deterministic fixed-step intersection simulator.

Each step publishes a :class:`WorldSnapshot`, asks the controller for
actions, integrates longitudinal motion lane by lane in a fixed order,
moves vehicles into and out of the conflict box, spawns arrivals and
advances the clock.

Vehicles progress through three stages: inbound on their entry arm, inside
the conflict box (constant speed along a straight chord), and outbound on the
exit arm.  Outbound vehicles never interact with the controller; vehicles
entering an outbound lane start from the same speed and accelerate with the
same profile, so their spacing can only grow and their exit instant is
computed in closed form.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol, Sequence, TextIO

from dimsim import kinematics as kin
from dimsim.arrivals import ArrivalProcess, TurnChooser, lane_streams
from dimsim.harmony import HarmonyMatrix, default_harmony, maneuver_index
from dimsim.topology import IntersectionSpec, Maneuver, ZoneTag, arm_label, exit_arm, path_length, zone_of

log = logging.getLogger(__name__)

INBOUND, BOX, OUTBOUND = 0, 1, 2
WAIT_SPEED = 0.1


class SimulationAbort(RuntimeError):
    """A physical or logical invariant broke; carries a diagnostic dump."""

    def __init__(self, message: str, dump: str = "") -> None:
        super().__init__(message)
        self.dump = dump


@dataclass(slots=True, eq=False)
class Vehicle:
    vid: int
    arm: int
    maneuver: Maneuver
    pos: float
    speed: float
    spawn_time: float
    path_len: float
    length: float = 4.0
    max_accel: float = 2.0
    max_decel: float = 2.0
    stage: int = INBOUND
    zone: ZoneTag = ZoneTag.APPROACH
    go: bool = False
    latched: bool = False
    committed: bool = False
    entry_time: float | None = None
    exit_time: float | None = None
    out_start: float = 0.0
    wait: float = 0.0

    @property
    def name(self) -> str:
        return f"{self.vid}:{self.maneuver.name}"


class Action(NamedTuple):
    go: bool
    cap: float = math.inf


HOLD = Action(False)
PROCEED = Action(True)


class VehicleView(NamedTuple):
    vid: int
    arm: int
    maneuver: Maneuver
    pos: float
    speed: float
    zone: ZoneTag
    latched: bool


@dataclass(frozen=True)
class WorldSnapshot:
    time: float
    participants: tuple[tuple[int, Maneuver], ...]
    leads: tuple[VehicleView | None, ...]
    crossers: tuple[VehicleView, ...]
    approaching: tuple[tuple[VehicleView, ...], ...]
    queues: tuple[int, ...]
    signals: tuple[str, ...] | None = None


class Controller(Protocol):
    name: str
    view_range: float

    def bind(self, engine: "Engine") -> None: ...

    def actions(self, snap: WorldSnapshot) -> dict[int, Action]: ...


@dataclass
class VehicleRecord:
    vid: int
    arm: int
    maneuver: Maneuver
    spawn_time: float
    entry_time: float
    exit_time: float
    wait: float

    @property
    def travel_time(self) -> float:
        return self.exit_time - self.spawn_time


@dataclass
class EngineConfig:
    spec: IntersectionSpec = field(default_factory=IntersectionSpec)
    densities: Sequence[float] = (0.0, 0.0, 0.0, 0.0)
    turn_ratios: Sequence | None = None
    seed: int = 0
    dt: float = 0.1
    vehicle_length: float = 4.0
    headway: float = 2.0
    max_accel: float = 2.0
    max_decel: float = 2.0
    detector_range: float = 50.0
    check_invariants: bool = True


class Engine:
    def __init__(self, cfg: EngineConfig, controller: Controller,
                 harmony: HarmonyMatrix | None = None) -> None:
        spec = cfg.spec
        n = spec.n_arms
        if len(cfg.densities) != n:
            raise ValueError(f"need {n} lane densities, got {len(cfg.densities)}")
        self.cfg = cfg
        self.spec = spec
        self.n = n
        self.dt = cfg.dt
        self.H = harmony if harmony is not None else default_harmony(n)
        if self.H.n != n:
            raise ValueError("harmony matrix size does not match the intersection")
        self.controller = controller

        self.step_count = 0
        self.time = 0.0
        self.lanes: list[list[Vehicle]] = [[] for _ in range(n)]
        self.outbound: list[deque[Vehicle]] = [deque() for _ in range(n)]
        # arrivals blocked at the boundary: [arrival instant, accrued wait]
        self.pending: list[deque[list[float]]] = [deque() for _ in range(n)]
        self.records: list[VehicleRecord] = []
        self.spawned = 0
        self.exited = 0
        self.entered_box = 0
        self.forced_latches = 0
        self.max_yellow = 0
        self._next_vid = 0
        self._last_out: list[tuple[float, float] | None] = [None] * n
        self._exit_listeners: list[Callable[[Vehicle], None]] = []

        self.hold_point = max(0.0, spec.green_len - cfg.vehicle_length / 2)
        self.box_speed = spec.red_zone_speed
        mans = [Maneuver(i, k) for i in range(n) for k in range(1, n)]
        self.path_len = {m: path_length(m, n, spec.conflict_box_radius) for m in mans}
        self.man_index = {m: maneuver_index(m, n) for m in mans}
        self.exit_of = {m: exit_arm(m, n) for m in mans}
        self.out_time = kin.free_travel_time(spec.lane_length, self.box_speed, spec.speed_limit, cfg.max_accel)

        streams = lane_streams(cfg.seed, n)
        self.arrivals = [ArrivalProcess(d, cfg.dt, s[0]) for d, s in zip(cfg.densities, streams)]
        turn = cfg.turn_ratios
        per_lane = turn if (turn is not None and len(turn) == n and not isinstance(turn[0], (int, float))) else [turn] * n
        self.turns = [TurnChooser(n, s[1], r) for s, r in zip(streams, per_lane)]

        self.trace: TextIO | None = None
        self.trace_every = 0
        self.last_snapshot: WorldSnapshot | None = None
        controller.bind(self)

    # -- helpers -------------------------------------------------------------

    def conflicts(self, m1: Maneuver, m2: Maneuver) -> bool:
        return not self.H.lookup(self.man_index[m1], self.man_index[m2])

    def on_exit_box(self, fn: Callable[[Vehicle], None]) -> None:
        self._exit_listeners.append(fn)

    def in_network(self) -> int:
        return sum(len(l) for l in self.lanes) + sum(len(o) for o in self.outbound)

    def vehicles(self):
        for lane in self.lanes:
            yield from lane
        for out in self.outbound:
            yield from out

    def zone_cap(self, pos: float) -> float:
        return self.spec.speed_limit if pos >= self.spec.red_outer else self.spec.red_zone_speed

    def add_vehicle(self, arm: int, maneuver: Maneuver, pos: float, speed: float = 0.0,
                    spawn_time: float | None = None) -> Vehicle:
        """Insert a vehicle directly (scripted scenarios and tests)."""
        maneuver.check(self.n)
        if maneuver.entry != arm:
            raise ValueError("maneuver entry arm does not match lane")
        v = Vehicle(self._next_vid, arm, maneuver, pos, speed,
                    self.time if spawn_time is None else spawn_time,
                    self.path_len[maneuver], self.cfg.vehicle_length,
                    self.cfg.max_accel, self.cfg.max_decel)
        self._next_vid += 1
        lane = self.lanes[arm]
        v.zone = zone_of(pos, self.spec)
        lane.append(v)
        lane.sort(key=lambda x: x.pos)
        self.spawned += 1
        return v

    # -- snapshot --------------------------------------------------------------

    def _snapshot(self) -> WorldSnapshot:
        spec = self.spec
        hold = self.hold_point
        dt = self.dt
        yellow_outer = spec.yellow_outer
        view_range = self.controller.view_range
        box_step = self.box_speed * dt
        participants = []
        leads: list[VehicleView | None] = []
        crossers = []
        approaching = []
        queues = []
        for arm, lane in enumerate(self.lanes):
            lead = None
            near = []
            queue = 0
            for v in lane:
                if v.stage == BOX:
                    # a vehicle that clears the box during this step no longer blocks anyone
                    if v.pos - box_step > -v.path_len:
                        crossers.append(VehicleView(v.vid, arm, v.maneuver, v.pos, v.speed, ZoneTag.INSIDE, True))
                    continue
                pos = v.pos
                if not v.latched:
                    gap = pos - hold
                    if gap < 0 or not kin.can_stop(v.speed, gap, v.max_decel):
                        v.latched = True
                        if not v.go:
                            self.forced_latches += 1
                    v.committed = pos < hold
                if v.latched:
                    crossers.append(VehicleView(v.vid, arm, v.maneuver, pos, v.speed, v.zone, True))
                    continue
                if pos <= self.cfg.detector_range:
                    queue += 1
                if lead is None:
                    lead = VehicleView(v.vid, arm, v.maneuver, pos, v.speed, v.zone, False)
                    if pos - v.speed * dt < yellow_outer:
                        participants.append((v.vid, v.maneuver))
                    near.append(lead)
                elif pos <= view_range:
                    near.append(VehicleView(v.vid, arm, v.maneuver, pos, v.speed, v.zone, False))
                else:
                    break
            leads.append(lead)
            approaching.append(tuple(near))
            queues.append(queue)
        signals = getattr(self.controller, "signals", None)
        return WorldSnapshot(self.time, tuple(participants), tuple(leads), tuple(crossers),
                             tuple(approaching), tuple(queues),
                             tuple(signals) if signals is not None else None)

    # -- main loop -------------------------------------------------------------

    def step(self) -> None:
        dt = self.dt
        t_next = (self.step_count + 1) * dt
        snap = self._snapshot()
        self.last_snapshot = snap
        actions = self.controller.actions(snap)
        self._move(actions, t_next)
        self._spawn(t_next)
        self._finish_exits(t_next)
        if self.cfg.check_invariants:
            self._check(t_next)
        self.step_count += 1
        self.time = t_next
        if self.trace is not None and self.step_count % self.trace_every == 0:
            self._write_trace()

    def run_until(self, horizon: float) -> None:
        n_steps = int(round(horizon / self.dt))
        while self.step_count < n_steps:
            self.step()

    def _move(self, actions: dict[int, Action], t_next: float) -> None:
        dt = self.dt
        spec = self.spec
        hold = self.hold_point
        red_outer = spec.red_outer
        yellow_outer = spec.yellow_outer
        green_len = spec.green_len
        vlim = spec.speed_limit
        vred = spec.red_zone_speed
        headway = self.cfg.headway
        box_speed = self.box_speed
        for arm, lane in enumerate(self.lanes):
            leader = None
            moved_to_out = 0
            for v in lane:
                if v.stage == BOX:
                    v.pos -= box_speed * dt
                    if v.pos <= -v.path_len:
                        moved_to_out += 1
                    leader = v
                    continue
                act = actions.get(v.vid)
                cap = vlim if v.pos >= red_outer else vred
                stop_at = None
                if act is not None:
                    if act.cap < cap:
                        cap = act.cap
                    v.go = act.go
                    if not act.go and not v.latched:
                        stop_at = hold
                elif not v.latched and (leader is None or leader.stage == BOX or leader.latched):
                    v.go = False
                    stop_at = hold
                if leader is not None:
                    # box vehicles keep box speed, so they are followed like any braking-capable leader
                    lstop = leader.pos + leader.length + headway - kin.stopping_distance(leader.speed, leader.max_decel)
                    if stop_at is None or lstop > stop_at:
                        stop_at = lstop
                speed = v.speed
                if speed == 0.0 and stop_at is not None and v.pos <= stop_at:
                    # queued at rest: nothing moves
                    v.wait += dt
                    leader = v
                    continue
                if stop_at is None:
                    if speed < cap:
                        new = speed + v.max_accel * dt
                        if new > cap:
                            new = cap
                        v.pos -= 0.5 * (speed + new) * dt
                    else:
                        new = speed - v.max_decel * dt
                        if new < cap:
                            new = cap
                        v.pos -= kin.advance(speed, new, v.max_decel, dt)
                    v.speed = new
                else:
                    new, v.pos = kin.follow_step(speed, v.pos, cap, stop_at, v.max_accel, v.max_decel, dt)
                    v.speed = new
                if v.pos < 0.0:
                    v.stage = BOX
                    v.latched = True
                    v.committed = True
                    v.entry_time = t_next
                    v.speed = box_speed
                    self.entered_box += 1
                    if v.pos <= -v.path_len:
                        moved_to_out += 1
                    v.zone = ZoneTag.INSIDE
                else:
                    if v.speed < WAIT_SPEED:
                        v.wait += dt
                    pos = v.pos
                    if pos < red_outer:
                        v.zone = ZoneTag.GREEN if pos < green_len else (
                            ZoneTag.YELLOW if pos < yellow_outer else ZoneTag.RED)
                    else:
                        v.zone = ZoneTag.APPROACH
                leader = v
            for _ in range(moved_to_out):
                self._to_outbound(lane, t_next)

    def _to_outbound(self, lane: list[Vehicle], t_next: float) -> None:
        # the vehicle that left the box is the first box vehicle past its path end
        for i, v in enumerate(lane):
            if v.stage == BOX and v.pos <= -v.path_len:
                break
        else:  # pragma: no cover - caller counted it
            return
        del lane[i]
        overshoot = -v.pos - v.path_len
        v.stage = OUTBOUND
        v.zone = ZoneTag.OUTBOUND
        v.out_start = t_next - overshoot / self.box_speed
        v.exit_time = v.out_start + self.out_time
        out_arm = self.exit_of[v.maneuver]
        prev = self._last_out[out_arm]
        if prev is not None and self.cfg.check_invariants:
            d, _ = kin.free_position(v.out_start - prev[0], self.box_speed, self.spec.speed_limit, self.cfg.max_accel)
            if d - prev[1] < -1e-6:
                raise SimulationAbort(f"collision merging onto outbound arm {arm_label(out_arm)}",
                                      self.dump())
        self._last_out[out_arm] = (v.out_start, v.length)
        self.outbound[out_arm].append(v)
        for fn in self._exit_listeners:
            fn(v)

    def _spawn(self, t_next: float) -> None:
        cfg = self.cfg
        spawn_pos = self.spec.lane_length
        for arm in range(self.n):
            queue = self.pending[arm]
            queue.extend([t, 0.0] for t in self.arrivals[arm].pop_until(t_next))
            lane = self.lanes[arm]
            while queue:
                speed = self.spec.speed_limit
                if lane:
                    last = lane[-1]
                    if last.stage == INBOUND and last.pos + last.length > spawn_pos - cfg.headway:
                        break
                    lstop = last.pos + last.length + cfg.headway
                    if last.stage != BOX:
                        lstop -= kin.stopping_distance(last.speed, last.max_decel)
                    room = spawn_pos - lstop
                    if room < 0 or not kin.can_stop(speed, room, cfg.max_decel):
                        speed = math.sqrt(max(0.0, 2 * cfg.max_decel * room))
                arrival, waited = queue.popleft()
                offset = self.turns[arm].draw()
                m = Maneuver(arm, offset)
                v = Vehicle(self._next_vid, arm, m, spawn_pos, speed, arrival,
                            self.path_len[m], cfg.vehicle_length, cfg.max_accel, cfg.max_decel)
                v.zone = zone_of(spawn_pos, self.spec)
                v.wait = waited
                self._next_vid += 1
                lane.append(v)
                self.spawned += 1
            for item in queue:
                item[1] += self.dt

    def _finish_exits(self, t_next: float) -> None:
        for out in self.outbound:
            while out and out[0].exit_time <= t_next + 1e-9:
                v = out.popleft()
                self.exited += 1
                self.records.append(VehicleRecord(v.vid, v.arm, v.maneuver, v.spawn_time,
                                                  v.entry_time, v.exit_time, v.wait))

    # -- invariants ------------------------------------------------------------

    def _check(self, t_next: float) -> None:
        if self.spawned != self.exited + self.in_network():
            raise SimulationAbort("vehicle conservation broken", self.dump())
        yellow_lo, yellow_hi = self.spec.green_len, self.spec.yellow_outer
        box = []
        for arm, lane in enumerate(self.lanes):
            prev = None
            in_yellow = 0
            for v in lane:
                if v.stage == BOX:
                    box.append(v)
                elif yellow_lo + 1e-6 < v.pos < yellow_hi - 1e-6:
                    in_yellow += 1
                if prev is not None and v.stage == INBOUND:
                    gap = v.pos - (prev.pos + prev.length)
                    if gap < -1e-6:
                        raise SimulationAbort(f"negative gap {gap:.3f} m on arm {arm_label(arm)}", self.dump())
                prev = v
            if in_yellow > self.max_yellow:
                self.max_yellow = in_yellow
        for i in range(len(box)):
            a = box[i]
            for j in range(i + 1, len(box)):
                b = box[j]
                if a.arm != b.arm and self.conflicts(a.maneuver, b.maneuver):
                    raise SimulationAbort(
                        f"conflicting co-occupancy {a.name} / {b.name} at t={t_next:.2f}", self.dump())

    def dump(self) -> str:
        lines = [f"t={self.time:.2f} controller={self.controller.name}"]
        for v in self.vehicles():
            lines.append(f"  {v.vid:6d} {arm_label(v.arm)} {v.maneuver.name} stage={v.stage} "
                         f"pos={v.pos:9.3f} v={v.speed:6.3f} go={v.go} latched={v.latched}")
        return "\n".join(lines)

    # -- tracing ---------------------------------------------------------------

    def enable_trace(self, fh: TextIO, every_s: float = 1.0) -> None:
        self.trace = fh
        self.trace_every = max(1, int(round(every_s / self.dt)))
        fh.write("time\tid\tarm\tposition\tspeed\tzone\n")

    def _write_trace(self) -> None:
        fh = self.trace
        t = self.time
        for lane in self.lanes:
            for v in lane:
                fh.write(f"{t:.2f}\t{v.vid}\t{arm_label(v.arm)}\t{v.pos:.3f}\t{v.speed:.3f}\t{v.zone.value}\n")
        for out in self.outbound:
            for v in out:
                d, s = kin.free_position(t - v.out_start, self.box_speed, self.spec.speed_limit, v.max_accel)
                fh.write(f"{t:.2f}\t{v.vid}\t{arm_label(v.arm)}\t{-(v.path_len + d):.3f}\t{s:.3f}\t"
                         f"{ZoneTag.OUTBOUND.value}\n")
