"""Centralized reservation control (vehicle-to-infrastructure).

A coordinator hands out time slots for the conflict box first come, first
served by estimated arrival time.  A slot reserves the box for the
maneuver's crossing time plus a safety slack; slots of conflicting maneuvers
from different arms never overlap, and vehicles of the same lane are kept in
order and spaced by a minimum entry gap.  Vehicles adjust their approach
speed so that they reach the entry line at their slot.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Hashable, Sequence

from dimsim import kinematics as kin
from dimsim.engine import HOLD, PROCEED, Action, WorldSnapshot
from dimsim.harmony import HarmonyMatrix, harmony
from dimsim.topology import Maneuver, ZoneTag

log = logging.getLogger(__name__)

PENDING, CONFIRMED, COMPLETED = "pending", "confirmed", "completed"


@dataclass
class Reservation:
    vid: Hashable
    maneuver: Maneuver
    entry_time: float
    start: float
    end: float
    status: str = CONFIRMED

    def overlaps(self, start: float, end: float, eps: float = 1e-9) -> bool:
        # touching intervals do not overlap; eps absorbs rounding in end + pre - pre
        return start < self.end - eps and self.start < end - eps


@dataclass(frozen=True)
class Request:
    vid: Hashable
    eta: float
    maneuver: Maneuver


def earliest_slot(lower: float, duration: float, pre: float, blocking: Sequence[Reservation]) -> float:
    """Smallest entry time >= ``lower`` whose interval misses every blocking one."""
    candidates = sorted({lower, *(r.end + pre for r in blocking if r.end + pre > lower)})
    for t in candidates:
        start, end = t - pre, t + duration
        if not any(r.overlaps(start, end) for r in blocking):
            return t
    raise AssertionError("unreachable: the last candidate is after every interval")


def v2ic_coordinate(requests: Sequence[Request], H: HarmonyMatrix, schedule: list[Reservation],
                    crossing_time: float | Callable[[Maneuver], float],
                    slack: float = 0.0, pre: float = 0.0, lane_gap: float = 0.0) -> list[Reservation]:
    """Grant slots to ``requests`` in ETA order and append them to ``schedule``.

    Same-arm requests are chained with ``lane_gap`` instead of the harmony
    test; a request never gets a slot earlier than an already granted
    same-arm slot.  Returns the new reservations.
    """
    dur = crossing_time if callable(crossing_time) else (lambda _m, c=crossing_time: c)
    granted = []
    for req in sorted(requests, key=lambda r: (r.eta, r.maneuver.entry)):
        m = req.maneuver
        lower = req.eta
        blocking = []
        for r in schedule:
            if r.status == COMPLETED:
                continue
            if r.maneuver.entry == m.entry:
                lower = max(lower, r.entry_time + lane_gap)
            elif not harmony(r.maneuver, m, H):
                blocking.append(r)
        d = dur(m) + slack
        t = earliest_slot(lower, d, pre, blocking)
        res = Reservation(req.vid, m, t, t - pre, t + d)
        schedule.append(res)
        granted.append(res)
    return granted


def min_time_to_line(dist: float, v: float, red_outer: float, vlim: float, vred: float,
                     accel: float, decel: float) -> float:
    """Fastest legal arrival at the entry line, honouring the reduced-speed zone."""
    if dist <= 0:
        return 0.0
    if dist <= red_outer:
        if v > vred:
            d_dec = kin.braking_distance(v, vred, decel)
            if d_dec >= dist:
                return 2 * dist / (v + max(vred, v - decel * dist / max(v, 1e-9)))
            return (v - vred) / decel + (dist - d_dec) / vred
        return kin.free_travel_time(dist, v, vred, accel)
    # reach the zone boundary so that braking to vred ends exactly there
    far = dist - red_outer
    t_far = kin.free_travel_time(far, v, vlim, accel)
    return t_far + red_outer / vred


class V2ICController:
    name = "V2IC"
    simplified = True

    def __init__(self, comm_range: float = 200.0, slack: float = 1.0, crawl: float = 1.0) -> None:
        self.view_range = comm_range
        self.slack = slack
        self.crawl = crawl
        self.lead = 0.5 * slack
        self.engine = None
        self.schedule: list[Reservation] = []
        self.by_vid: dict[int, Reservation] = {}
        self.granted_total = 0
        self.rerequests = 0

    def bind(self, engine) -> None:
        self.engine = engine
        spec = engine.spec
        self.pre = engine.dt
        # safe following at box speed needs the headway plus one step of travel
        self.lane_gap = (engine.cfg.vehicle_length + engine.cfg.headway) / engine.box_speed + 2 * engine.dt
        self.transit = {m: L / engine.box_speed + engine.dt
                        for m, L in engine.path_len.items()}
        self._profile = (spec.red_outer, spec.speed_limit, spec.red_zone_speed,
                         engine.cfg.max_accel, engine.cfg.max_decel)
        engine.on_exit_box(self._completed)

    def _completed(self, v) -> None:
        res = self.by_vid.pop(v.vid, None)
        if res is not None:
            res.status = COMPLETED
            self.schedule.remove(res)

    def _drop(self, vid: int) -> None:
        res = self.by_vid.pop(vid, None)
        if res is not None:
            self.schedule.remove(res)

    def _time_to_line(self, view) -> float:
        return min_time_to_line(view.pos - self.engine.hold_point, view.speed, *self._profile)

    def actions(self, snap: WorldSnapshot) -> dict[int, Action]:
        now = snap.time
        dt = self.engine.dt
        eng = self.engine
        # earliest line-crossing of each arm's committed vehicles still short of the box
        committed_at = [now] * eng.n
        for c in snap.crossers:
            if c.zone is not ZoneTag.INSIDE:
                committed_at[c.arm] = max(committed_at[c.arm], now + self._time_to_line(c))

        requests = []
        arrival: dict[int, float] = {}
        for lane in snap.approaching:
            redo = False
            prev = None
            for view in lane:
                t = now + self._time_to_line(view)
                ahead = committed_at[view.arm] if prev is None else arrival[prev]
                if ahead > now:
                    t = max(t, ahead + self.lane_gap)
                arrival[view.vid] = t
                prev = view.vid
                res = self.by_vid.get(view.vid)
                if res is not None and (redo or t > res.entry_time + self.slack):
                    # late: give the slot back; followers must queue behind the new one
                    self._drop(view.vid)
                    self.rerequests += 1
                    log.debug("V2IC re-request vid=%s at t=%.1f", view.vid, now)
                    res = None
                    redo = True
                if res is None:
                    requests.append(Request(view.vid, t, view.maneuver))
        if requests:
            granted = v2ic_coordinate(requests, eng.H, self.schedule, self.transit.get,
                                      slack=self.slack, pre=self.pre, lane_gap=self.lane_gap)
            for res in granted:
                self.by_vid[res.vid] = res
            self.granted_total += len(granted)

        out: dict[int, Action] = {}
        red_outer, vlim, vred, accel, decel = self._profile
        hold = eng.hold_point
        for lane in snap.approaching:
            for view in lane:
                res = self.by_vid[view.vid]
                tau = res.entry_time - now
                blocked = any(c.arm != view.arm and eng.conflicts(c.maneuver, view.maneuver)
                              for c in snap.crossers)
                if tau <= dt:
                    out[view.vid] = HOLD if blocked else PROCEED
                    continue
                gap = view.pos - hold
                go = not blocked and arrival[view.vid] - now >= tau - dt
                # aim slightly early: acceleration lag only ever makes vehicles late
                aim = max(tau - self.lead, dt)
                if view.pos > red_outer:
                    t_red = red_outer / vred
                    cap = (view.pos - red_outer) / (aim - t_red) if aim > t_red else vlim
                else:
                    cap = gap / aim
                out[view.vid] = Action(go, max(self.crawl, cap))
        return out
