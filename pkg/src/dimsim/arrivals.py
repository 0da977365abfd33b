"""Poisson demand and turn choice, one seeded stream per lane."""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np


def poisson_pmf(k: int, lam: float) -> float:
    if k < 0:
        return 0.0
    return lam ** k * math.exp(-lam) / math.factorial(k)


def lane_streams(seed: int, n_lanes: int) -> list[tuple[np.random.Generator, np.random.Generator]]:
    """Independent (arrival, turn) generators for each lane, derived from one seed."""
    root = np.random.SeedSequence(seed)
    out = []
    for lane_seq in root.spawn(n_lanes):
        arr, turn = lane_seq.spawn(2)
        out.append((np.random.default_rng(arr), np.random.default_rng(turn)))
    return out


class ArrivalProcess:
    """Poisson arrivals at ``density`` vehicles per hour on one lane.

    Arrival instants are generated in continuous time from unit exponential
    gaps scaled by the rate, so the count falling in any step of length
    ``dt`` is Poisson with mean ``density * dt / 3600`` and the realisation
    does not depend on the step size.
    """

    def __init__(self, density: float, dt: float, rng: np.random.Generator) -> None:
        if density < 0:
            raise ValueError("density must be non-negative")
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.density = float(density)
        self.dt = dt
        self.rng = rng
        self._next = self._draw(0.0)

    @property
    def rate(self) -> float:
        """Expected arrivals per second."""
        return self.density / 3600.0

    @property
    def lambda_step(self) -> float:
        return self.density * self.dt / 3600.0

    def _draw(self, after: float) -> float:
        if self.density == 0:
            return math.inf
        return after + float(self.rng.exponential()) / self.rate

    def pop_until(self, t: float) -> list[float]:
        """Arrival instants in ``(previous call, t]``."""
        times = []
        while self._next <= t:
            times.append(self._next)
            self._next = self._draw(self._next)
        return times


def sample_arrivals(proc: ArrivalProcess, t: float) -> int:
    """Number of arrivals during the step ``(t, t + dt]``."""
    return len(proc.pop_until(t + proc.dt))


class TurnChooser:
    """Samples exit offsets ``1..n-1`` from a per-lane distribution."""

    def __init__(self, n: int, rng: np.random.Generator,
                 ratios: Mapping[int, float] | Sequence[float] | None = None) -> None:
        self.n = n
        self.rng = rng
        offsets = list(range(1, n))
        if ratios is None:
            probs = [1.0 / (n - 1)] * (n - 1)
        elif isinstance(ratios, Mapping):
            bad = set(ratios) - set(offsets)
            if bad:
                raise ValueError(f"illegal offsets in turn ratios: {sorted(bad)}")
            probs = [float(ratios.get(k, 0.0)) for k in offsets]
        else:
            probs = [float(p) for p in ratios]
            if len(probs) != n - 1:
                raise ValueError(f"need {n - 1} turn ratios, got {len(probs)}")
        if any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError("turn ratios must be non-negative and sum to 1")
        self.offsets = offsets
        self.cum = np.cumsum(probs)
        self.cum[-1] = 1.0

    def draw(self) -> int:
        u = float(self.rng.random())
        return self.offsets[int(np.searchsorted(self.cum, u, side="right"))]
