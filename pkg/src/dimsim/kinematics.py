"""Longitudinal motion: safe-distance following with ballistic integration.

Speeds are updated first, then positions are integrated from the old and new
speed, exactly for piecewise-constant acceleration.  The safe
speed is the largest speed that still allows a stop at the given point when
braking at ``decel`` from the end of the step.
"""

from __future__ import annotations

import math


def stopping_distance(v: float, decel: float) -> float:
    return v * v / (2.0 * decel)


def braking_distance(v_from: float, v_to: float, decel: float) -> float:
    """Distance covered while braking from ``v_from`` to ``v_to`` at ``decel``."""
    return (v_from * v_from - v_to * v_to) / (2.0 * decel)


def can_stop(v: float, gap: float, decel: float, eps: float = 1e-9) -> bool:
    return v * v <= 2.0 * decel * gap + eps


def safe_speed(v: float, gap: float, decel: float, dt: float) -> float:
    """Largest v' with (v + v')/2 * dt + v'^2/(2 decel) <= gap."""
    half = 0.5 * decel * dt
    rhs = 2.0 * decel * (gap - 0.5 * v * dt)
    disc = half * half + rhs
    if disc <= 0.0:
        return 0.0
    return max(0.0, -half + math.sqrt(disc))


def next_speed(v: float, target: float, accel: float, decel: float, dt: float) -> float:
    if target >= v:
        return min(target, v + accel * dt)
    return max(target, v - decel * dt, 0.0)


def advance(v: float, v_new: float, decel: float, dt: float) -> float:
    """Distance covered during the step.

    A speed drop is applied as braking at ``decel`` until ``v_new`` is reached,
    then cruising for the rest of the step; this never exceeds the mean-speed
    distance and ends at v^2/(2 decel) when the vehicle comes to rest.  Speed
    gains use the mean of old and new speed.
    """
    if v_new >= v:
        return 0.5 * (v + v_new) * dt
    frac = min(1.0, (v - v_new) / (decel * dt))
    return 0.5 * (v + v_new) * frac * dt + v_new * (1.0 - frac) * dt


def follow_step(v: float, pos: float, cap: float, stop_at: float | None,
                accel: float, decel: float, dt: float) -> tuple[float, float]:
    """One step for a vehicle at ``pos`` heading toward decreasing positions.

    ``stop_at`` is the position the front bumper must be able to stop at
    (a leader's rear minus headway, or a hold line); ``None`` means free road.
    Returns ``(new_speed, new_position)``.
    """
    target = cap
    if stop_at is not None:
        target = min(target, safe_speed(v, pos - stop_at, decel, dt))
    v_new = next_speed(v, target, accel, decel, dt)
    pos_new = pos - advance(v, v_new, decel, dt)
    if stop_at is not None and pos_new < stop_at <= pos:
        # rounding residue only: the safe speed already stops at stop_at
        pos_new = stop_at
    return v_new, pos_new


def free_travel_time(dist: float, v0: float, vmax: float, accel: float) -> float:
    """Time to cover ``dist`` accelerating from ``v0`` toward ``vmax`` at ``accel``."""
    if dist <= 0:
        return 0.0
    if v0 >= vmax:
        return dist / vmax
    d_acc = (vmax * vmax - v0 * v0) / (2 * accel)
    if dist <= d_acc:
        return (-v0 + math.sqrt(v0 * v0 + 2 * accel * dist)) / accel
    return (vmax - v0) / accel + (dist - d_acc) / vmax


def free_position(t: float, v0: float, vmax: float, accel: float) -> tuple[float, float]:
    """Distance and speed after ``t`` seconds of the same free-acceleration profile."""
    if t <= 0:
        return 0.0, v0
    if v0 >= vmax:
        return vmax * t, vmax
    t_acc = (vmax - v0) / accel
    if t <= t_acc:
        return v0 * t + 0.5 * accel * t * t, v0 + accel * t
    d_acc = (vmax * vmax - v0 * v0) / (2 * accel)
    return d_acc + vmax * (t - t_acc), vmax
