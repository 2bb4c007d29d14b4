"""Points, staircase paths and loops in the space of time variables.

A staircase path moves along one time axis per step.  Axes are numbered
from 1.  The compact text form is ``"1:+0.5,2:+0.5,1:-0.5,2:-0.5"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import PathError

MAX_STAIRCASE_STEPS = 12


class TimePoint:
    """Immutable point ``(t_1, ..., t_N)``."""

    __slots__ = ("_t",)

    def __init__(self, t: Iterable[float]):
        arr = np.array([float(x) for x in t], dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise PathError("a time point needs at least one coordinate")
        if not np.all(np.isfinite(arr)):
            raise PathError("time coordinates must be finite")
        arr.setflags(write=False)
        self._t = arr

    @classmethod
    def zeros(cls, n: int) -> "TimePoint":
        return cls([0.0] * n)

    @property
    def t(self) -> np.ndarray:
        return self._t

    @property
    def dim(self) -> int:
        return self._t.size

    def __getitem__(self, axis: int) -> float:
        """Coordinate of 1-based ``axis``."""
        return float(self._t[axis - 1])

    def __len__(self):
        return self._t.size

    def __iter__(self):
        return iter(self._t.tolist())

    def shifted(self, axis: int, dt: float) -> "TimePoint":
        t = self._t.copy()
        t[axis - 1] += dt
        return TimePoint(t)

    def __eq__(self, other):
        return isinstance(other, TimePoint) and np.array_equal(self._t, other._t)

    def __hash__(self):
        return hash(tuple(self._t.tolist()))

    def __repr__(self):
        return f"TimePoint({self._t.tolist()})"


@dataclass(frozen=True)
class AxisStep:
    axis: int
    dt: float

    def __post_init__(self):
        if isinstance(self.axis, bool) or int(self.axis) != self.axis or self.axis < 1:
            raise PathError(f"axis must be a positive integer, got {self.axis!r}")
        if not math.isfinite(self.dt):
            raise PathError("step duration must be finite")
        object.__setattr__(self, "axis", int(self.axis))
        object.__setattr__(self, "dt", float(self.dt))

    def __str__(self):
        return f"{self.axis}:{self.dt:+.17g}"


@dataclass(frozen=True)
class StaircasePath:
    steps: tuple[AxisStep, ...] = ()

    def __post_init__(self):
        steps = tuple(s if isinstance(s, AxisStep) else AxisStep(*s) for s in self.steps)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def of(cls, *pairs) -> "StaircasePath":
        """``StaircasePath.of((1, 0.5), (2, 0.5))``."""
        return cls(tuple(AxisStep(a, dt) for a, dt in pairs))

    @classmethod
    def parse(cls, text: str) -> "StaircasePath":
        text = text.strip()
        if not text:
            return cls()
        steps = []
        for token in text.split(","):
            axis, sep, dt = token.strip().partition(":")
            if not sep:
                raise PathError(f"malformed step {token!r}; expected 'axis:dt'")
            try:
                steps.append(AxisStep(int(axis), float(dt)))
            except ValueError as exc:
                raise PathError(f"malformed step {token!r}: {exc}") from None
        return cls(tuple(steps))

    def __str__(self):
        return ",".join(str(s) for s in self.steps)

    def __len__(self):
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    @property
    def max_axis(self) -> int:
        return max((s.axis for s in self.steps), default=0)

    def reversed(self) -> "StaircasePath":
        """The same curve traversed backwards."""
        return StaircasePath(tuple(AxisStep(s.axis, -s.dt) for s in reversed(self.steps)))

    def then(self, other: "StaircasePath") -> "StaircasePath":
        """``self`` followed by ``other``."""
        return StaircasePath(self.steps + other.steps)

    def points(self, start: TimePoint) -> list[TimePoint]:
        """Corner points visited, starting with ``start``."""
        if self.max_axis > start.dim:
            raise PathError(f"path uses axis {self.max_axis} but the start point has {start.dim}")
        out = [start]
        for s in self.steps:
            out.append(out[-1].shifted(s.axis, s.dt))
        return out


def net_displacement(path: StaircasePath, n_axes: int | None = None) -> np.ndarray:
    """Per-axis sum of signed step durations (compensated summation)."""
    n = max(path.max_axis, n_axes or 0)
    per_axis = [[] for _ in range(n)]
    for s in path.steps:
        per_axis[s.axis - 1].append(s.dt)
    return np.array([math.fsum(v) for v in per_axis], dtype=float)


def is_loop(path: StaircasePath) -> bool:
    return bool(np.all(net_displacement(path) == 0.0))


def rect_loop(dt1: float, dt2: float) -> StaircasePath:
    return StaircasePath.of((1, dt1), (2, dt2), (1, -dt1), (2, -dt2))


def interleavings(counts: Sequence[int]):
    """All orderings of a multiset of axis labels, lexicographically.

    ``counts[j]`` copies of axis ``j + 1``.  Yields tuples of axis labels.
    """
    total = sum(counts)
    if total == 0:
        yield ()
        return
    remaining = list(counts)

    def rec(prefix):
        if len(prefix) == total:
            yield tuple(prefix)
            return
        for j, c in enumerate(remaining):
            if c:
                remaining[j] -= 1
                prefix.append(j + 1)
                yield from rec(prefix)
                prefix.pop()
                remaining[j] += 1

    yield from rec([])


def enumerate_staircases(n1: int, n2: int, dt1: float, dt2: float) -> list[StaircasePath]:
    """All ``C(n1 + n2, n1)`` interleavings of equal sub-steps on two axes."""
    return enumerate_staircases_n((n1, n2), (dt1, dt2))


def enumerate_staircases_n(counts: Sequence[int], totals: Sequence[float]) -> list[StaircasePath]:
    """N-axis generalization: ``counts[j]`` equal steps summing to ``totals[j]`` on axis j+1."""
    counts = [int(c) for c in counts]
    if len(counts) != len(totals):
        raise PathError("counts and totals differ in length")
    if any(c < 0 for c in counts):
        raise PathError("step counts must be non-negative")
    if sum(counts) > MAX_STAIRCASE_STEPS:
        raise PathError(
            f"{sum(counts)} steps exceed the enumeration cap of {MAX_STAIRCASE_STEPS}"
        )
    size = [float(T) / c if c else 0.0 for c, T in zip(counts, totals)]
    return [StaircasePath(tuple(AxisStep(a, size[a - 1]) for a in order))
            for order in interleavings(counts)]


def staircase_count(n1: int, n2: int) -> int:
    return math.comb(n1 + n2, n1)


__all__ = [
    "TimePoint", "AxisStep", "StaircasePath", "net_displacement", "is_loop",
    "rect_loop", "interleavings", "enumerate_staircases", "enumerate_staircases_n",
    "staircase_count", "MAX_STAIRCASE_STEPS",
]
