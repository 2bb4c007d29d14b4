"""Residuals of the classical multi-time consistency conditions.

Lagrangians are called as ``L_i(qdot_i, q_i, t)`` where ``t`` is the full
TimePoint; Hamiltonians as ``H_i(q, p, t)`` over the whole phase space.
All derivatives are central finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NonFiniteError, PathError
from .timepaths import StaircasePath, TimePoint

DEFAULT_FD_STEP = 1e-5


@dataclass(frozen=True)
class LagrangianFamily:
    lagrangians: tuple[Callable, ...]

    def __post_init__(self):
        object.__setattr__(self, "lagrangians", tuple(self.lagrangians))

    def __len__(self):
        return len(self.lagrangians)

    def __getitem__(self, i: int) -> Callable:
        """1-based access."""
        return self.lagrangians[i - 1]


@dataclass(frozen=True)
class HamiltonianFamily:
    hamiltonians: tuple[Callable, ...]

    def __post_init__(self):
        object.__setattr__(self, "hamiltonians", tuple(self.hamiltonians))

    def __len__(self):
        return len(self.hamiltonians)

    def __getitem__(self, i: int) -> Callable:
        return self.hamiltonians[i - 1]


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """Samples ``(sigma_k, q(sigma_k), t(sigma_k))`` of a curve in (q, t) space.

    ``q`` and ``t`` are ``(M + 1, N)`` arrays.
    """

    sigma: np.ndarray
    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        t = np.atleast_2d(np.asarray(self.t, dtype=float))
        if q.shape[0] != sigma.size and q.shape[1] == sigma.size:
            q = q.T
        if t.shape[0] != sigma.size and t.shape[1] == sigma.size:
            t = t.T
        if sigma.ndim != 1 or q.shape[0] != sigma.size or t.shape != q.shape:
            raise PathError("sigma, q and t sample counts disagree")
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(q)) and np.all(np.isfinite(t))):
            raise NonFiniteError("trajectory samples must be finite")
        if np.any(np.diff(sigma) <= 0):
            raise PathError("sigma must be strictly increasing")
        for name, arr in (("sigma", sigma), ("q", q), ("t", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_samples(self) -> int:
        return self.sigma.size

    def then(self, other: "SampledTrajectory") -> "SampledTrajectory":
        """Join at a shared sample; ``other`` is re-parametrized to continue sigma."""
        if not (np.array_equal(self.q[-1], other.q[0]) and np.array_equal(self.t[-1], other.t[0])):
            raise PathError("trajectories do not meet")
        s2 = other.sigma - other.sigma[0] + self.sigma[-1]
        return SampledTrajectory(np.concatenate([self.sigma, s2[1:]]),
                                 np.vstack([self.q, other.q[1:]]),
                                 np.vstack([self.t, other.t[1:]]))


def _finite(x, what):
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"{what} evaluated to a non-finite value")
    return x


def lagrangian_curvature(fam: LagrangianFamily, i: int, j: int, qdot, q, at: TimePoint,
                         fd_step: float = DEFAULT_FD_STEP) -> float:
    """``dL_j/dt_i - dL_i/dt_j`` with respect to the explicit time arguments.

    Each ``L_k`` is evaluated at its own ``(qdot_k, q_k)``.  A dependence of
    ``L_i`` on another particle's coordinate is supplied by the caller as an
    explicit function of that particle's time.
    """
    if i == j:
        raise ValueError("residual is defined only for i != j")
    qdot = np.asarray(qdot, dtype=float)
    q = np.asarray(q, dtype=float)

    def dL(k, axis):
        L = fam[k]
        hi = L(qdot[k - 1], q[k - 1], at.shifted(axis, fd_step))
        lo = L(qdot[k - 1], q[k - 1], at.shifted(axis, -fd_step))
        return (_finite(hi, f"L_{k}") - _finite(lo, f"L_{k}")) / (2 * fd_step)

    return dL(j, i) - dL(i, j)


def _partial(f, x: np.ndarray, k: int, h: float):
    xp, xm = x.copy(), x.copy()
    xp[k] += h
    xm[k] -= h
    return (f(xp) - f(xm)) / (2 * h)


def poisson_bracket(A: Callable, B: Callable, q, p, at: TimePoint,
                    fd_step: float = DEFAULT_FD_STEP) -> float:
    """``{A, B} = sum_k dA/dq_k dB/dp_k - dA/dp_k dB/dq_k``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    total = 0.0
    for k in range(q.size):
        dAq = _partial(lambda x: _finite(A(x, p, at), "H"), q, k, fd_step)
        dBq = _partial(lambda x: _finite(B(x, p, at), "H"), q, k, fd_step)
        dAp = _partial(lambda x: _finite(A(q, x, at), "H"), p, k, fd_step)
        dBp = _partial(lambda x: _finite(B(q, x, at), "H"), p, k, fd_step)
        total += dAq * dBp - dAp * dBq
    return total


def poisson_residual(fam: HamiltonianFamily, i: int, j: int, q, p, at: TimePoint,
                     fd_step: float = DEFAULT_FD_STEP) -> float:
    """``-dH_i/dt_j + dH_j/dt_i - {H_i, H_j}``."""
    if i == j:
        raise ValueError("residual is defined only for i != j")
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    Hi, Hj = fam[i], fam[j]

    def dt(H, axis):
        return (_finite(H(q, p, at.shifted(axis, fd_step)), "H")
                - _finite(H(q, p, at.shifted(axis, -fd_step)), "H")) / (2 * fd_step)

    return -dt(Hi, j) + dt(Hj, i) - poisson_bracket(Hi, Hj, q, p, at, fd_step)


def action_along_path(fam: LagrangianFamily, traj: SampledTrajectory) -> float:
    """Trapezoidal ``int sum_i L_i dt_i/dsigma dsigma``.

    ``dt_i/dsigma`` and ``dq_i/dsigma`` come from centered differences of the
    samples; ``qdot_i`` is their ratio.  Terms where particle i's time does
    not advance contribute nothing.
    """
    if traj.n_samples < 3:
        raise PathError("need at least three samples (M >= 2)")
    if traj.t.shape[1] != len(fam):
        raise PathError(f"trajectory has {traj.t.shape[1]} time axes, family has {len(fam)}")
    s = traj.sigma
    dts = np.gradient(traj.t, s, axis=0)
    dqs = np.gradient(traj.q, s, axis=0)
    lam = np.zeros(s.size)
    for k in range(s.size):
        tp = TimePoint(traj.t[k])
        for i in range(len(fam)):
            if dts[k, i] == 0.0:
                continue
            qdot = dqs[k, i] / dts[k, i]
            lam[k] += _finite(fam[i + 1](qdot, traj.q[k, i], tp), f"L_{i + 1}") * dts[k, i]
    return float(np.sum(0.5 * (lam[1:] + lam[:-1]) * np.diff(s)))


def staircase_trajectory(path: StaircasePath, coordinate_paths: Sequence[Callable],
                         start: TimePoint, samples_per_unit: int = 64) -> SampledTrajectory:
    """Sample a staircase in time with each ``q_i`` a function of its own time ``t_i``.

    sigma is arc length in time space.  Each step of duration ``dt`` gets
    ``max(2, round(samples_per_unit * |dt|))`` intervals, so paths that cut the
    same axis range into different pieces share their sample times.
    """
    if samples_per_unit < 1:
        raise ValueError("samples_per_unit must be positive")
    corners = path.points(start)
    n = start.dim
    ts = [corners[0].t.copy()]
    sig = [0.0]
    for step, c0 in zip(path, corners):
        if step.dt == 0.0:
            continue
        m = max(2, int(round(samples_per_unit * abs(step.dt))))
        for f in np.arange(1, m + 1) / m:
            t = c0.t.copy()
            t[step.axis - 1] += f * step.dt
            ts.append(t)
        sig.extend(sig[-1] + abs(step.dt) * np.arange(1, m + 1) / m)
    t = np.array(ts)
    q = np.column_stack([np.array([coordinate_paths[i](tt) for tt in t[:, i]], dtype=float)
                         for i in range(n)])
    return SampledTrajectory(np.array(sig), q, t)
