import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dimsim import kinematics as kin
from dimsim.topology import KMH

V40, V20 = 40 * KMH, 20 * KMH


def test_braking_anchors():
    assert kin.braking_distance(V40, V20, 2.0) == pytest.approx(23.148, abs=1e-3)
    assert kin.stopping_distance(V40, 2.0) == pytest.approx(30.864, abs=1e-3)
    assert kin.stopping_distance(V20, 2.0) == pytest.approx(7.716, abs=1e-3)


def test_free_acceleration_reaches_cap():
    v, pos, t = 0.0, 400.0, 0.0
    while v < V40:
        v, pos = kin.follow_step(v, pos, V40, None, 2.0, 2.0, 0.1)
        t += 0.1
    assert t == pytest.approx(V40 / 2.0, abs=0.1)


def test_stationary_leader_at_headway_means_no_motion():
    v, pos = kin.follow_step(0.0, 10.0, V40, 10.0, 2.0, 2.0, 0.1)
    assert v == 0.0 and pos == 10.0


@given(st.floats(0, 15), st.floats(0, 200), st.sampled_from([0.05, 0.1, 0.2]))
def test_safe_speed_allows_stop(v, gap, dt):
    vs = kin.safe_speed(v, gap, 2.0, dt)
    assert vs >= 0
    if vs > 0:
        assert 0.5 * (v + vs) * dt + vs * vs / 4.0 <= gap + 1e-9


@given(st.floats(0, 11.2), st.floats(0.5, 100))
def test_follow_step_never_passes_stop_point(v, gap):
    if not kin.can_stop(v, gap, 2.0):
        return
    pos = 50.0 + gap
    for _ in range(600):
        v, pos = kin.follow_step(v, pos, V40, 50.0, 2.0, 2.0, 0.1)
        assert pos >= 50.0 - 1e-9
        assert 0 <= v <= V40 + 1e-12
    assert v == pytest.approx(0.0, abs=1e-6)


def test_can_stop_boundary():
    assert kin.can_stop(V20, kin.stopping_distance(V20, 2.0), 2.0)
    assert not kin.can_stop(V20, kin.stopping_distance(V20, 2.0) - 0.01, 2.0)


@given(st.floats(0, 11), st.floats(0, 500))
def test_free_travel_time_inverts_free_position(v0, dist):
    t = kin.free_travel_time(dist, v0, V40, 2.0)
    d, v = kin.free_position(t, v0, V40, 2.0)
    assert d == pytest.approx(dist, abs=1e-6)
    assert v <= V40 + 1e-12
    assert math.isfinite(t)
