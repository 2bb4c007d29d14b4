"""Ordered exponentials, curvature and loop holonomy for matrix Hamiltonians.

A family of N Hermitian matrices ``H_j(t)`` defines the evolution
``U = T exp(-i sum_j int H_j dt_j)`` along a path in time space.  The family
is consistent (flat) when ``F_jk = dH_j/dt_k - dH_k/dt_j - i [H_j, H_k]``
vanishes; then every loop has trivial holonomy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.linalg import schur

from .errors import (DimensionMismatchError, HermiticityError, LogBranchError,
                     NonFiniteError, NotALoopError, PathError)
from .timepaths import StaircasePath, TimePoint, is_loop, net_displacement

HERMITICITY_RTOL = 1e-12
BRANCH_MARGIN = 1e-6


def _check_hermitian(H: np.ndarray, where: str = "") -> None:
    if not np.all(np.isfinite(H)):
        raise NonFiniteError(f"non-finite Hamiltonian entries{where}")
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > HERMITICITY_RTOL * max(scale, 1e-300):
        raise HermiticityError(f"Hamiltonian is not Hermitian{where}")


@dataclass(frozen=True, eq=False)
class MatrixHamiltonian:
    """Constant Hermitian matrix, or a callable ``TimePoint -> matrix``.

    For the callable form ``dim`` must be given; every evaluation is checked
    for shape and Hermiticity.
    """

    value: Union[np.ndarray, Callable]
    dim: int | None = None

    def __post_init__(self):
        if callable(self.value):
            if self.dim is None or self.dim < 1:
                raise DimensionMismatchError("callable Hamiltonians need an explicit dim")
            return
        H = np.array(self.value, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionMismatchError(f"Hamiltonian must be square, got shape {H.shape}")
        if self.dim is not None and self.dim != H.shape[0]:
            raise DimensionMismatchError(f"declared dim {self.dim} but matrix is {H.shape[0]}")
        _check_hermitian(H)
        H.setflags(write=False)
        object.__setattr__(self, "value", H)
        object.__setattr__(self, "dim", H.shape[0])

    @property
    def is_constant(self) -> bool:
        return not callable(self.value)

    def at(self, t: TimePoint) -> np.ndarray:
        if self.is_constant:
            return self.value
        H = np.asarray(self.value(t), dtype=complex)
        if H.shape != (self.dim, self.dim):
            raise DimensionMismatchError(f"H({t}) has shape {H.shape}, expected {(self.dim,) * 2}")
        _check_hermitian(H, f" at {t}")
        return H


def as_hamiltonians(hams) -> list[MatrixHamiltonian]:
    out = [h if isinstance(h, MatrixHamiltonian) else MatrixHamiltonian(h) for h in hams]
    if not out:
        raise DimensionMismatchError("need at least one Hamiltonian")
    dims = {h.dim for h in out}
    if len(dims) != 1:
        raise DimensionMismatchError(f"Hamiltonians have different dimensions {sorted(dims)}")
    return out


def hermitian_expm(H: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` through the eigendecomposition; unitary to rounding."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def ordered_exponential(hams: Sequence, path: StaircasePath, substeps: int = 1,
                        start: TimePoint | None = None) -> np.ndarray:
    """Path-ordered evolution operator along a staircase ``path``.

    Each step is cut into ``substeps`` slices and each slice contributes
    ``exp(-i H_axis(t_mid) delta)`` at the slice midpoint (midpoint rule);
    later slices multiply on the left.  ``start`` defaults to the origin.
    """
    hams = as_hamiltonians(hams)
    if substeps < 1 or int(substeps) != substeps:
        raise ValueError("substeps must be a positive integer")
    n_axes = len(hams)
    if path.max_axis > n_axes:
        raise PathError(f"path uses axis {path.max_axis} but only {n_axes} Hamiltonians given")
    t = np.array(list(start), dtype=float) if start is not None else np.zeros(n_axes)
    if t.size != n_axes:
        raise DimensionMismatchError(f"start point has {t.size} coordinates, expected {n_axes}")
    U = np.eye(hams[0].dim, dtype=complex)
    for step in path:
        h = hams[step.axis - 1]
        delta = step.dt / substeps
        t0 = t[step.axis - 1]
        for s in range(substeps):
            if h.is_constant and s > 0:
                break
            if h.is_constant:
                U = hermitian_expm(h.value, step.dt) @ U
                continue
            tm = t.copy()
            tm[step.axis - 1] = t0 + (s + 0.5) * delta
            U = hermitian_expm(h.at(TimePoint(tm)), delta) @ U
        t[step.axis - 1] = t0 + step.dt
    return U


def _time_partial(h: MatrixHamiltonian, axis: int, at: TimePoint, fd_step: float) -> np.ndarray:
    if h.is_constant:
        return np.zeros((h.dim, h.dim), dtype=complex)
    return (h.at(at.shifted(axis, fd_step)) - h.at(at.shifted(axis, -fd_step))) / (2 * fd_step)


def curvature(hams: Sequence, j: int, k: int, at: TimePoint, fd_step: float = 1e-5) -> np.ndarray:
    """``F_jk = dH_j/dt_k - dH_k/dt_j - i [H_j, H_k]`` (central differences in time)."""
    hams = as_hamiltonians(hams)
    if j == k:
        raise ValueError("curvature needs two distinct axes")
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    Hj, Hk = hams[j - 1], hams[k - 1]
    A, B = Hj.at(at), Hk.at(at)
    return (_time_partial(Hj, k, at, fd_step) - _time_partial(Hk, j, at, fd_step)
            - 1j * (A @ B - B @ A))


def loop_holonomy_deviation(hams: Sequence, loop: StaircasePath, substeps: int = 1,
                            start: TimePoint | None = None) -> float:
    """``||U_loop - I||_F``."""
    if not is_loop(loop):
        raise NotALoopError(f"net displacement {net_displacement(loop)} is not zero")
    U = ordered_exponential(hams, loop, substeps, start)
    return float(np.linalg.norm(U - np.eye(U.shape[0])))


def unitary_log(U: np.ndarray, margin: float = BRANCH_MARGIN) -> np.ndarray:
    """Principal logarithm of a unitary matrix.

    Uses the complex Schur form, which is diagonal for normal matrices.
    Raises LogBranchError when an eigenvalue lies within ``margin`` of -1.
    """
    T, Z = schur(U, output="complex")
    lam = np.diag(T)
    ang = np.angle(lam)
    if np.any(math.pi - np.abs(ang) < margin):
        raise LogBranchError(
            f"holonomy eigenvalue within {margin:g} of -1; principal logarithm is ill-defined"
        )
    return (Z * (np.log(np.abs(lam)) + 1j * ang)) @ Z.conj().T


@dataclass(frozen=True)
class StokesResult:
    lhs: np.ndarray
    rhs: np.ndarray
    residual: float


def _rectangle_sides(loop: StaircasePath):
    steps = list(loop)
    if len(steps) != 4:
        raise PathError("Stokes check needs a four-step rectangle")
    a, b, c, d = steps
    if not (a.axis == c.axis and b.axis == d.axis and a.axis != b.axis
            and c.dt == -a.dt and d.dt == -b.dt):
        raise PathError("loop is not a rectangle of the form (j,a)(k,b)(j,-a)(k,-b)")
    return a.axis, b.axis, a.dt, b.dt


def stokes_check(hams: Sequence, loop: StaircasePath, substeps: int = 1,
                 start: TimePoint | None = None, fd_step: float = 1e-5) -> StokesResult:
    """Compare ``log U_loop`` with the curvature flux through the rectangle.

    For ``(j, a)(k, b)(j, -a)(k, -b)`` starting at ``start``, the right-hand
    side is ``+i F_jk(center) a b``; ``a b`` is the signed area, positive for
    a counter-clockwise traversal of the (t_j, t_k) plane.
    """
    hams = as_hamiltonians(hams)
    j, k, a, b = _rectangle_sides(loop)
    origin = start if start is not None else TimePoint.zeros(len(hams))
    center = origin.shifted(j, a / 2).shifted(k, b / 2)
    U = ordered_exponential(hams, loop, substeps, origin)
    lhs = unitary_log(U)
    rhs = 1j * curvature(hams, j, k, center, fd_step) * (a * b)
    return StokesResult(lhs, rhs, float(np.linalg.norm(lhs - rhs)))


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])))


def parse_matrix(obj) -> np.ndarray:
    """Rows of ``[re, im]`` pairs (or bare reals) -> complex matrix.

    Accepts a JSON string or the already decoded list.
    """
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        rows = [[complex(e[0], e[1]) if isinstance(e, (list, tuple)) else complex(e)
                 for e in row] for row in obj]
    except (TypeError, IndexError, ValueError) as exc:
        raise DimensionMismatchError(f"malformed matrix: {exc}") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise DimensionMismatchError("matrix must be square and non-empty")
    return np.array(rows, dtype=complex)


def dump_matrix(M: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(M)]


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
