"""Uniform periodic grids and one/two-particle wave fields.

Serialization layout
--------------------
Both formats start with a JSON header describing the grid axes::

    {"format": "multitime.wavefield", "version": 1,
     "axes": [{"q_min": ..., "dq": ..., "n": ...}, ...]}

* ``bin``: the header on the first line, terminated by ``\\n``, followed by
  the raw values as little-endian complex128 in C order (first axis index
  major, i.e. ``values[i1, i2]`` with ``i2`` varying fastest).
* ``csv``: the header on the first line prefixed by ``# ``, then a column
  line ``i1,i2,q1,q2,re,im`` (``i1,q1,re,im`` for one axis) and one row per
  sample in the same order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import GridError, GridMismatchError, NonFiniteError

_HEADER_FORMAT = "multitime.wavefield"


@dataclass(frozen=True)
class SpatialGrid:
    """``n`` points ``q_min + k * dq``; periodic with period ``n * dq``."""

    q_min: float
    dq: float
    n: int

    def __post_init__(self):
        if not (math.isfinite(self.q_min) and math.isfinite(self.dq)):
            raise GridError("grid parameters must be finite")
        if self.dq <= 0:
            raise GridError("dq must be positive")
        if self.n < 8 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two >= 8, got {self.n}")

    @classmethod
    def centered(cls, n: int = 256, extent: float = 40.0) -> "SpatialGrid":
        return cls(-0.5 * extent, extent / n, n)

    @property
    def extent(self) -> float:
        return self.n * self.dq

    @property
    def q_max(self) -> float:
        return self.q_min + (self.n - 1) * self.dq

    @property
    def points(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n)

    @property
    def momenta(self) -> np.ndarray:
        """Angular wavenumbers in numpy FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n, self.dq)

    def to_dict(self) -> dict:
        return {"q_min": self.q_min, "dq": self.dq, "n": self.n}


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WaveField1:
    grid: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid.n,):
            raise GridMismatchError(f"expected {self.grid.n} samples, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("wave field contains non-finite values")
        object.__setattr__(self, "values", vals)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.grid.dq)

    def mean_position(self) -> float:
        rho = np.abs(self.values) ** 2
        return float(np.sum(self.grid.points * rho) / np.sum(rho))

    def width(self) -> float:
        """Standard deviation of the position density."""
        rho = np.abs(self.values) ** 2
        rho = rho / rho.sum()
        q = self.grid.points
        mu = np.sum(q * rho)
        return math.sqrt(float(np.sum((q - mu) ** 2 * rho)))


@dataclass(frozen=True, eq=False)
class WaveField2:
    """Two-particle amplitudes ``values[i1, i2] = Phi(q1[i1], q2[i2])``."""

    grid1: SpatialGrid
    grid2: SpatialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != (self.grid1.n, self.grid2.n):
            raise GridMismatchError(
                f"expected shape {(self.grid1.n, self.grid2.n)}, got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError("wave field contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def grids(self) -> tuple[SpatialGrid, SpatialGrid]:
        return (self.grid1, self.grid2)

    @property
    def cell(self) -> float:
        return self.grid1.dq * self.grid2.dq

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.values) ** 2)) * self.cell)

    def marginal(self, axis: int) -> np.ndarray:
        """Position density of particle ``axis`` (1 or 2)."""
        rho = np.abs(self.values) ** 2
        if axis == 1:
            return rho.sum(axis=1) * self.grid2.dq
        if axis == 2:
            return rho.sum(axis=0) * self.grid1.dq
        raise ValueError("axis must be 1 or 2")

    def with_values(self, values) -> "WaveField2":
        return WaveField2(self.grid1, self.grid2, values)


def gaussian_packet(grid: SpatialGrid, center: float, width: float, momentum: float = 0.0) -> WaveField1:
    """Normalized packet ``exp(-(q-c)^2 / (4 w^2) + i p q)``.

    ``width`` is the standard deviation of ``|psi|^2``.  Raises GridError when
    the packet is narrower than two grid spacings or more than 1e-10 of its
    probability lies beyond the grid ends.
    """
    if width < 2 * grid.dq:
        raise GridError(f"packet width {width} below two grid spacings ({2 * grid.dq})")
    s = math.sqrt(2.0) * width
    tail = 0.5 * math.erfc((center - grid.q_min) / s) + 0.5 * math.erfc((grid.q_max - center) / s)
    if tail >= 1e-10:
        raise GridError(f"packet tail mass {tail:.2e} outside grid exceeds 1e-10")
    q = grid.points
    psi = np.exp(-((q - center) ** 2) / (4 * width**2) + 1j * momentum * q)
    psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * grid.dq)
    return WaveField1(grid, psi)


def product_state(psi1: WaveField1, psi2: WaveField1) -> WaveField2:
    return WaveField2(psi1.grid, psi2.grid, np.outer(psi1.values, psi2.values))


def _check_same_grids(a: WaveField2, b: WaveField2):
    if a.grid1 != b.grid1 or a.grid2 != b.grid2:
        raise GridMismatchError("wave fields live on different grids")


def inner(a: WaveField2, b: WaveField2) -> complex:
    """``<a, b>``, antilinear in the first argument."""
    _check_same_grids(a, b)
    return complex(np.vdot(a.values, b.values) * a.cell)


def l2_distance(a: WaveField2, b: WaveField2) -> float:
    _check_same_grids(a, b)
    return math.sqrt(float(np.sum(np.abs(a.values - b.values) ** 2)) * a.cell)


class PhaseAlignment(NamedTuple):
    phase: float
    distance: float
    orthogonal: bool


def phase_aligned_distance(a: WaveField2, b: WaveField2, rtol: float = 1e-12) -> PhaseAlignment:
    """Distance between ``a`` and ``b`` once the global phase of ``b`` is optimized.

    ``phase`` is the rotation applied to ``b``: ``|a - exp(i phase) b|`` is
    minimal, i.e. ``phase = -arg <a, b>`` wrapped into (-pi, pi].  When the
    overlap vanishes (relative to ``|a||b|``) the phase is undefined,
    ``orthogonal`` is set, ``phase`` is 0 and the plain distance is returned.
    """
    ov = inner(a, b)
    scale = a.norm() * b.norm()
    if abs(ov) <= rtol * scale:
        return PhaseAlignment(0.0, l2_distance(a, b), True)
    phase = -math.atan2(ov.imag, ov.real)
    if phase <= -math.pi:
        phase += 2 * math.pi
    # |a - e^{i phi} b|^2 = |a|^2 + |b|^2 - 2|<a,b>| at the optimum; evaluate directly
    rotated = b.with_values(np.exp(1j * phase) * b.values)
    return PhaseAlignment(phase, l2_distance(a, rotated), False)


def _axes_of(field):
    if isinstance(field, WaveField1):
        return [field.grid]
    return [field.grid1, field.grid2]


def _num(x) -> str:
    return format(float(x), ".17g")


def write_field(field, path, fmt: str = "bin") -> None:
    """Write a WaveField1/WaveField2 in ``bin`` or ``csv`` layout (see module doc)."""
    axes = _axes_of(field)
    header = json.dumps({"format": _HEADER_FORMAT, "version": 1,
                         "axes": [g.to_dict() for g in axes]}, sort_keys=True)
    path = Path(path)
    if fmt == "bin":
        with path.open("wb") as fh:
            fh.write(header.encode() + b"\n")
            fh.write(np.ascontiguousarray(field.values, dtype="<c16").tobytes())
    elif fmt == "csv":
        pts = [g.points for g in axes]
        with path.open("w", newline="") as fh:
            fh.write("# " + header + "\n")
            w = csv.writer(fh)
            if len(axes) == 1:
                w.writerow(["i1", "q1", "re", "im"])
                for i, z in enumerate(field.values):
                    w.writerow([i, _num(pts[0][i]), _num(z.real), _num(z.imag)])
            else:
                w.writerow(["i1", "i2", "q1", "q2", "re", "im"])
                for (i, j), z in np.ndenumerate(field.values):
                    w.writerow([i, j, _num(pts[0][i]), _num(pts[1][j]),
                                _num(z.real), _num(z.imag)])
    else:
        raise ValueError(f"unknown wave-field format {fmt!r}")


def _grids_from_header(line: str):
    head = json.loads(line)
    if head.get("format") != _HEADER_FORMAT:
        raise GridError("not a multitime wave-field file")
    return [SpatialGrid(float(a["q_min"]), float(a["dq"]), int(a["n"])) for a in head["axes"]]


def _build(grids, values):
    if len(grids) == 1:
        return WaveField1(grids[0], values)
    return WaveField2(grids[0], grids[1], values)


def read_field(path):
    """Inverse of :func:`write_field`; the format is detected from the first byte."""
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(b"# "):
        text = raw.decode()
        first, rest = text.split("\n", 1)
        grids = _grids_from_header(first[2:])
        rows = list(csv.DictReader(rest.splitlines()))
        shape = tuple(g.n for g in grids)
        vals = np.empty(shape, dtype=complex)
        for r in rows:
            idx = tuple(int(r[f"i{k + 1}"]) for k in range(len(grids)))
            vals[idx] = complex(float(r["re"]), float(r["im"]))
        return _build(grids, vals)
    first, _, body = raw.partition(b"\n")
    grids = _grids_from_header(first.decode())
    shape = tuple(g.n for g in grids)
    vals = np.frombuffer(body, dtype="<c16").reshape(shape)
    return _build(grids, vals)
