import time
from types import SimpleNamespace

import numpy as np
import pytest

from dimsim.dim import ControllerInvariantError, controller_step, verify_deadlock_free
from dimsim.engine import HOLD, PROCEED
from dimsim.harmony import HarmonyMatrix, default_harmony, table_4way
from dimsim.topology import Maneuver, ZoneTag

FIG = [(0, Maneuver(0, 1)), (1, Maneuver(1, 2)), (2, Maneuver(2, 2)), (3, Maneuver(3, 2))]
PRIO = (0, 1, 2, 3)


def veh(vid, zone, latched=False):
    return SimpleNamespace(vid=vid, zone=zone, latched=latched)


def test_winner_proceeds_loser_holds():
    H = table_4way()
    assert controller_step(veh(0, ZoneTag.YELLOW), FIG, H, PRIO, False) == PROCEED
    assert controller_step(veh(1, ZoneTag.YELLOW), FIG, H, PRIO, False) == PROCEED
    assert controller_step(veh(2, ZoneTag.YELLOW), FIG, H, PRIO, False) == HOLD
    assert controller_step(veh(3, ZoneTag.GREEN), FIG, H, PRIO, False) == HOLD


def test_busy_box_holds_winner():
    assert controller_step(veh(0, ZoneTag.YELLOW), FIG, table_4way(), PRIO, True) == HOLD


def test_latched_and_inside_always_proceed():
    H = table_4way()
    assert controller_step(veh(9, ZoneTag.GREEN, latched=True), [], H, PRIO, True) == PROCEED
    assert controller_step(veh(9, ZoneTag.INSIDE), [], H, PRIO, True) == PROCEED


def test_stop_zone_without_intent_is_an_error():
    with pytest.raises(ControllerInvariantError):
        controller_step(veh(9, ZoneTag.YELLOW), FIG, table_4way(), PRIO, False)


def test_red_zone_slows_without_go():
    act = controller_step(veh(9, ZoneTag.RED), [], table_4way(), PRIO, False, red_zone_speed=5.0)
    assert not act.go and act.cap == 5.0
    assert controller_step(veh(9, ZoneTag.APPROACH), [], table_4way(), PRIO, False) == HOLD


@pytest.mark.parametrize("n,states", [(3, 26), (4, 255), (5, 3124)])
def test_deadlock_free(n, states):
    t0 = time.perf_counter()
    rep = verify_deadlock_free(n, default_harmony(n))
    assert rep.states_checked == states
    assert rep.ok, rep.summary()
    assert time.perf_counter() - t0 < 1.0


def test_priority_permutations_are_deadlock_free():
    H = table_4way()
    for prio in [(3, 2, 1, 0), (1, 3, 0, 2)]:
        assert verify_deadlock_free(4, H, prio).ok


def test_verifier_catches_an_inconsistent_matrix():
    # an asymmetric table makes the answer depend on who is asking
    arr = np.array(table_4way().entries)
    arr[0, 4] = 1
    arr[4, 0] = 0
    rep = verify_deadlock_free(4, HarmonyMatrix(4, arr))
    assert not rep.ok
    assert "disagree" in rep.summary()
