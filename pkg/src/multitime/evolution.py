"""Two-particle grid evolution, one time axis at a time.

Each axis j carries ``H_j = p_j^2 / (2 m_j) + V_j(q_j)`` plus, for the axis
that owns it, an interaction ``V_12(q_1, q_2)``.  The other coordinate is a
spectator during an axis step: its value enters the interaction as a fixed
multiplication operator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteError, NormalizationDriftError, NotALoopError, PathError
from .kernels import forced_kernel, free_kernel
from .timepaths import StaircasePath, is_loop, net_displacement
from .wavegrid import WaveField2, l2_distance, phase_aligned_distance

NORM_DRIFT_LIMIT = 1e-8


@dataclass(frozen=True)
class AxisDynamics:
    """Masses, one-body potentials and an optional interaction for two particles.

    ``interaction(q1, q2)`` is a potential energy added to the Hamiltonian of
    ``interaction_axis``.  ``dt_max`` caps the split-step sub-step.
    """

    mass1: float = 1.0
    mass2: float = 1.0
    potential1: Optional[Callable] = None
    potential2: Optional[Callable] = None
    interaction: Optional[Callable] = None
    interaction_axis: int = 1
    dt_max: float = 1e-2

    def __post_init__(self):
        for m in (self.mass1, self.mass2):
            if not (m > 0 and math.isfinite(m)):
                raise ValueError(f"masses must be positive and finite, got {m!r}")
        if self.interaction_axis not in (1, 2):
            raise ValueError("interaction_axis must be 1 or 2")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")

    @classmethod
    def bilinear_coupling(cls, k: float, mass1: float = 1.0, mass2: float = 1.0,
                          dt_max: float = 1e-2) -> "AxisDynamics":
        """Axis 1 carries ``V_12 = -k q1 q2`` (Lagrangian term ``+k q1 q2``); axis 2 is free."""
        if k == 0:
            return cls(mass1, mass2, dt_max=dt_max)
        return cls(mass1, mass2, interaction=lambda q1, q2: -k * q1 * q2,
                   interaction_axis=1, dt_max=dt_max)

    def mass(self, axis: int) -> float:
        return self.mass1 if axis == 1 else self.mass2

    def is_free(self, axis: int) -> bool:
        own = self.potential1 if axis == 1 else self.potential2
        return own is None and (self.interaction is None or self.interaction_axis != axis)

    def potential_on(self, axis: int, field: WaveField2) -> Optional[np.ndarray]:
        """Potential-energy samples seen by ``axis`` as an (n1, n2) array, or None."""
        if self.is_free(axis):
            return None
        q1 = field.grid1.points[:, None]
        q2 = field.grid2.points[None, :]
        V = np.zeros(field.values.shape)
        own = self.potential1 if axis == 1 else self.potential2
        if own is not None:
            V = V + (np.asarray(own(q1), dtype=float) if axis == 1
                     else np.asarray(own(q2), dtype=float))
        if self.interaction is not None and self.interaction_axis == axis:
            V = V + np.asarray(self.interaction(q1, q2), dtype=float)
        V = np.broadcast_to(V, field.values.shape)
        if not np.all(np.isfinite(V)):
            raise NonFiniteError(f"potential on axis {axis} is not finite on the grid")
        return V


@dataclass(frozen=True, eq=False)
class EvolutionReport:
    final_field: WaveField2
    l2_discrepancy: float
    aligned_discrepancy: float
    phase: float
    other_field: Optional[WaveField2] = None


def _kinetic_factor(field: WaveField2, axis: int, dt: float, mass: float) -> np.ndarray:
    grid = field.grid1 if axis == 1 else field.grid2
    p = grid.momenta
    mult = np.exp(-1j * p**2 * dt / (2 * mass))
    return mult[:, None] if axis == 1 else mult[None, :]


def _apply_kinetic(values: np.ndarray, axis: int, factor: np.ndarray) -> np.ndarray:
    ax = axis - 1
    return np.fft.ifft(np.fft.fft(values, axis=ax) * factor, axis=ax)


def propagate_axis(field: WaveField2, axis: int, dt: float, dyn: AxisDynamics) -> WaveField2:
    """Apply ``exp(-i H_axis dt)`` to ``field``; the other coordinate is untouched.

    The kinetic factor is applied exactly in momentum space.  With a potential
    the step is Strang-split into ``ceil(|dt| / dt_max)`` equal sub-steps.
    ``dt = 0`` returns the input object itself.
    """
    if axis not in (1, 2):
        raise PathError(f"grid evolution supports axes 1 and 2, got {axis}")
    dt = float(dt)
    if not math.isfinite(dt):
        raise NonFiniteError("non-finite step duration")
    if dt == 0.0:
        return field
    mass = dyn.mass(axis)
    V = dyn.potential_on(axis, field)
    psi = field.values
    if V is None:
        out = _apply_kinetic(psi, axis, _kinetic_factor(field, axis, dt, mass))
    else:
        n_sub = max(1, math.ceil(abs(dt) / dyn.dt_max))
        h = dt / n_sub
        kin = _kinetic_factor(field, axis, h, mass)
        half = np.exp(-0.5j * h * V)
        full = half * half
        out = half * psi
        for s in range(n_sub):
            out = _apply_kinetic(out, axis, kin)
            out = out * (full if s < n_sub - 1 else half)
    n0 = field.norm()
    n1 = math.sqrt(float(np.sum(np.abs(out) ** 2)) * field.cell)
    if n0 > 0 and abs(n1 - n0) > NORM_DRIFT_LIMIT * n0:
        raise NormalizationDriftError(
            f"norm changed from {n0:.15g} to {n1:.15g} on an axis-{axis} step"
        )
    return field.with_values(out)


def evolve_path(field: WaveField2, path: StaircasePath, dyn: AxisDynamics) -> WaveField2:
    for step in path:
        field = propagate_axis(field, step.axis, step.dt, dyn)
    return field


def _same_displacement(a: StaircasePath, b: StaircasePath) -> bool:
    da, db = net_displacement(a, 2), net_displacement(b, 2)
    return da.shape == db.shape and bool(np.allclose(da, db, rtol=1e-12, atol=1e-14))


def compare_fields(fa: WaveField2, fb: WaveField2) -> EvolutionReport:
    aligned = phase_aligned_distance(fa, fb)
    return EvolutionReport(fa, l2_distance(fa, fb), aligned.distance, aligned.phase, fb)


def path_dependence(field: WaveField2, path_a: StaircasePath, path_b: StaircasePath,
                    dyn: AxisDynamics) -> EvolutionReport:
    """Evolve along both paths and compare; ``final_field`` is the result of ``path_a``."""
    if not _same_displacement(path_a, path_b):
        raise PathError(
            f"paths end at different time points: {net_displacement(path_a, 2)} "
            f"vs {net_displacement(path_b, 2)}"
        )
    return compare_fields(evolve_path(field, path_a, dyn), evolve_path(field, path_b, dyn))


def loop_check(field: WaveField2, loop: StaircasePath, dyn: AxisDynamics) -> EvolutionReport:
    """Evolve around ``loop`` and compare with the initial field."""
    if not is_loop(loop):
        raise NotALoopError(f"net displacement {net_displacement(loop)} is not zero")
    final = evolve_path(field, loop, dyn)
    aligned = phase_aligned_distance(field, final)
    return EvolutionReport(final, l2_distance(field, final), aligned.distance, aligned.phase, field)


def interaction_phase_discrepancy(k, mass, q1, q1p, q2, q2p, dt1) -> float:
    """Phase of the axis-2-first corner kernel minus that of the axis-1-first one.

    For ``L1 = m qdot1^2 / 2 + k q1 q2`` and a free second particle, moving
    ``q2 -> q2p`` before or after the axis-1 step of length ``dt1`` changes
    the constant force ``k q2`` felt by particle 1.
    """
    if not mass > 0:
        raise ValueError("mass must be positive")
    vals = [float(x) for x in (k, mass, q1, q1p, q2, q2p, dt1)]
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteError("non-finite input")
    return (k * (q2p - q2) / 2 * (q1p + q1) * dt1
            - k**2 / (24 * mass) * (q2p**2 - q2**2) * dt1**3)


def corner_kernels(k, mass, q1, q1p, q2, q2p, dt1, dt2):
    """Closed-form two-particle kernels for the two corner paths.

    Returns ``(axis1_first, axis2_first)``: the amplitude for
    ``(q1, q2) -> (q1p, q2p)`` when the axis-1 step (duration ``dt1``) is taken
    before or after the free axis-2 step (duration ``dt2``).
    """
    k2 = free_kernel(q2p, dt2, q2, 0.0, mass)
    first = forced_kernel(q1p, dt1, q1, 0.0, mass, k * q2) * k2
    second = forced_kernel(q1p, dt1, q1, 0.0, mass, k * q2p) * k2
    return first, second


def corner_phase_difference(k, mass, q1, q1p, q2, q2p, dt1, dt2=1.0) -> float:
    """Measured ``arg(K_axis2_first / K_axis1_first)``, wrapped into (-pi, pi]."""
    a, b = corner_kernels(k, mass, q1, q1p, q2, q2p, dt1, dt2)
    r = b / a
    return math.atan2(r.imag, r.real)

