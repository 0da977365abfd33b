import io
import math

import pytest

from dimsim.dim import DimController
from dimsim.engine import PROCEED, Engine, EngineConfig, SimulationAbort
from dimsim.topology import KMH, Maneuver, ZoneTag

V40, V20 = 40 * KMH, 20 * KMH


class Idle:
    name = "idle"
    view_range = 0.0

    def bind(self, engine):
        self.engine = engine

    def actions(self, snap):
        return {}


class Reckless(Idle):
    """Sends every front vehicle in regardless of conflicts."""

    name = "reckless"

    def actions(self, snap):
        return {lead.vid: PROCEED for lead in snap.leads if lead is not None}


def engine(densities=(0, 0, 0, 0), controller=None, **kw):
    return Engine(EngineConfig(densities=densities, **kw), controller or DimController())


def test_empty_world_only_advances_time():
    e = engine()
    e.run_until(5.0)
    assert e.step_count == 50
    assert e.time == pytest.approx(5.0)
    assert e.spawned == e.exited == e.in_network() == 0


def test_add_vehicle_validates_lane():
    e = engine()
    with pytest.raises(ValueError):
        e.add_vehicle(1, Maneuver(0, 1), 50.0)


def braking_run(dt):
    """Trace a vehicle slowing from 40 to 20 km/h; return the distance it took."""
    e = engine(dt=dt)
    v = e.add_vehicle(0, Maneuver(0, 2), 60.0, V40)
    buf = io.StringIO()
    e.enable_trace(buf, every_s=dt)
    e.run_until(6.0)
    rows = [line.split("\t") for line in buf.getvalue().splitlines()[1:]]
    samples = [(float(r[3]), float(r[4])) for r in rows if r[1] == str(v.vid)]
    prev = [(60.0, V40)] + samples
    start = next(p for (p, s), (_, s2) in zip(prev, samples) if s2 < s - 1e-3)
    end = next(p for p, s in samples if s <= V20 + 1e-3)  # trace keeps 3 decimals
    return start - end


def test_braking_distance_fine_step():
    assert braking_run(0.01) == pytest.approx(23.14, abs=0.1)


def test_braking_distance_default_step_within_resolution():
    # the last step ends at 20 km/h partway through, so a trace can overshoot by one step of travel
    d = braking_run(0.1)
    assert 23.14 - 0.01 <= d <= 23.15 + V20 * 0.1


def test_single_vehicle_crosses_without_stopping():
    e = engine()
    v = e.add_vehicle(0, Maneuver(0, 2), 60.0, V40)
    slowest = math.inf
    while v.stage == 0:
        e.step()
        if v.pos >= 0:
            slowest = min(slowest, v.speed)
    assert slowest >= V20 - 2.0 * e.dt - 1e-9
    assert e.forced_latches == 0


def test_four_vehicle_crossing_order():
    e = engine()
    vs = [e.add_vehicle(i, Maneuver(i, k), 20.0, V20) for i, k in enumerate([1, 2, 2, 2])]
    e.run_until(40.0)
    t = {v.maneuver.name: v.entry_time for v in vs}
    assert t["Va1"] == t["Vb2"] < t["Vc2"] < t["Vd2"]


def test_follower_waits_for_its_own_turn():
    e = engine()
    a = e.add_vehicle(0, Maneuver(0, 2), 1.0, 0.0)
    b = e.add_vehicle(0, Maneuver(0, 1), 7.0, 0.0)
    e.run_until(20.0)
    assert a.entry_time < b.entry_time


def test_reckless_controller_is_caught():
    e = engine(controller=Reckless())
    e.add_vehicle(0, Maneuver(0, 2), 5.0, V20)
    e.add_vehicle(1, Maneuver(1, 2), 5.0, V20)
    with pytest.raises(SimulationAbort) as err:
        e.run_until(10.0)
    assert "conflicting co-occupancy" in str(err.value)
    assert "Vb2" in err.value.dump


def test_busy_run_invariants():
    e = engine((350, 350, 350, 350), seed=4)
    e.run_until(900.0)
    assert e.spawned == e.exited + e.in_network()
    assert e.max_yellow <= 1
    assert e.forced_latches == 0
    for r in e.records:
        assert r.spawn_time <= r.entry_time <= r.exit_time
        assert r.wait >= 0


def test_speeds_stay_within_limits():
    e = engine((300, 300, 300, 300), seed=2)
    for _ in range(3000):
        e.step()
        for v in e.vehicles():
            assert -1e-12 <= v.speed <= V40 + 1e-12


def test_determinism():
    a = engine((250, 250, 250, 250), seed=9)
    b = engine((250, 250, 250, 250), seed=9)
    a.run_until(600.0)
    b.run_until(600.0)
    assert [(r.vid, r.exit_time, r.wait) for r in a.records] == [(r.vid, r.exit_time, r.wait) for r in b.records]


def test_spillback_keeps_demand_and_accrues_waiting():
    e = engine((3000, 0, 0, 0), controller=Idle())
    e.run_until(300.0)
    queued = len(e.pending[0])
    assert queued > 0
    assert all(item[1] > 0 for item in list(e.pending[0])[:1])
    assert e.spawned == e.in_network()


def test_idle_controller_holds_everyone_at_the_line():
    e = engine((300, 0, 0, 0), controller=Idle(), seed=1)
    e.run_until(200.0)
    assert e.entered_box == 0
    front = e.lanes[0][0]
    assert front.pos == pytest.approx(e.hold_point, abs=1e-6)
    assert front.zone is ZoneTag.GREEN


def test_trace_output():
    e = engine()
    e.add_vehicle(0, Maneuver(0, 2), 60.0, V40)
    buf = io.StringIO()
    e.enable_trace(buf, every_s=1.0)
    e.run_until(3.0)
    lines = buf.getvalue().splitlines()
    assert lines[0].split("\t") == ["time", "id", "arm", "position", "speed", "zone"]
    assert len(lines) == 4
    assert lines[-1].split("\t")[2] == "a"


def test_halving_dt_barely_changes_waiting():
    from statistics import fmean
    waits = {}
    for dt in (0.1, 0.05):
        vals = []
        for seed in (1, 2):
            e = engine((350, 350, 350, 350), seed=seed, dt=dt)
            e.run_until(1800.0)
            vals += [r.wait for r in e.records if r.spawn_time >= 300]
        waits[dt] = fmean(vals)
    assert abs(waits[0.05] - waits[0.1]) / waits[0.1] < 0.05
