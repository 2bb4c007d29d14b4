"""Time-sliced path-integral approximation of single-particle kernels.

The interval is cut into ``n`` slices of length ``dt``.  Each slice
contributes ``sqrt(m / (2 pi i dt)) exp(i dt L_k)`` with the discrete
Lagrangian ``L_k = m/2 ((q_{k+1} - q_k)/dt)^2 - V(q_k)``, the potential taken
at the left point.  The ``n - 1`` intermediate integrals are done one at a
time as discrete convolutions on a uniform grid, under the same damping and
zero-damping extrapolation used for kernel composition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConvergenceError, NonFiniteError, WindowTooSmallError
from .kernels import forced_kernel, free_kernel
from .quadrature import DEFAULT_LADDER, QuadratureSpec, extrapolate

# hard cap on samples per intermediate coordinate
MAX_GRID_POINTS = 1 << 22


@dataclass(frozen=True)
class SlicingSpec:
    """Discretization of a sliced propagator.

    ``q_window`` and ``q_points`` may be left as None, in which case every
    damping rung gets its own window (the damping Gaussian out to
    ``quadrature.n_sigma`` standard deviations around the straight
    classical line) and the coarsest spacing whose phase step per sample stays
    within ``quadrature.max_phase_step``.
    """

    n_slices: int
    q_window: Optional[tuple[float, float]] = None
    q_points: Optional[int] = None
    quadrature: QuadratureSpec = QuadratureSpec(eps_ladder=DEFAULT_LADDER, rtol=1e-4)

    def __post_init__(self):
        if int(self.n_slices) != self.n_slices or self.n_slices < 1:
            raise ValueError("n_slices must be a positive integer")
        if self.q_window is not None:
            lo, hi = self.q_window
            if not lo < hi:
                raise ValueError("q_window must satisfy q_lo < q_hi")
            object.__setattr__(self, "q_window", (float(lo), float(hi)))
        if self.q_points is not None and self.q_points < 2:
            raise ValueError("q_points must be at least 2")


def _grid(spec: SlicingSpec, eps: float, q_i: float, q_f: float, rate: float):
    quad = spec.quadrature
    if spec.q_window is None:
        W = quad.half_width(eps)
        lo, hi = min(q_i, q_f) - W, max(q_i, q_f) + W
    else:
        lo, hi = spec.q_window
    span = hi - lo
    # phase of K(q' - q) a_k(q) changes by at most 2 * rate * span * dq per sample
    dq_max = quad.max_phase_step / (2 * rate * span)
    if spec.q_points is None:
        n = int(math.ceil(span / dq_max)) + 1
    else:
        n = spec.q_points
        if span / (n - 1) > dq_max:
            raise ConvergenceError(
                f"{n} points over {span:g} under-resolve the kernel chirp; "
                f"need at least {int(math.ceil(span / dq_max)) + 1}",
                diagnostics={"eps": eps, "dq_max": dq_max, "span": span},
            )
    if n > MAX_GRID_POINTS:
        raise ConvergenceError(
            f"slice grid would need {n} points (cap {MAX_GRID_POINTS})",
            diagnostics={"eps": eps, "span": span},
        )
    return np.linspace(lo, hi, n)


def _damped_chain(potential, mass, q_f, q_i, dt, n, eps, spec: SlicingSpec) -> complex:
    rate = mass / (2 * dt)
    q = _grid(spec, eps, q_i, q_f, rate)
    dq = q[1] - q[0]
    P = q.size
    pref = math.sqrt(mass / (2 * math.pi * dt)) * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    offsets = dq * np.arange(-(P - 1), P)
    kern = pref * np.exp(1j * rate * offsets**2)

    if potential is None:
        phase_v = np.ones(P, dtype=complex)
        v_start = 1.0
    else:
        V = np.asarray(potential(q), dtype=float) * np.ones(P)
        v0 = float(potential(q_i))
        if not (np.all(np.isfinite(V)) and math.isfinite(v0)):
            raise NonFiniteError("potential is not finite on the slice grid")
        phase_v = np.exp(-1j * dt * V)
        v_start = complex(np.exp(-1j * dt * v0))

    def damping(k):
        c = q_i + (q_f - q_i) * k / n
        d = np.exp(-eps * (q - c) ** 2)
        if max(d[0], d[-1]) > spec.quadrature.edge_tol:
            raise WindowTooSmallError(
                f"damping at the window edge is {max(d[0], d[-1]):.2e} for slice {k}"
            )
        return d

    amp = free_kernel(q, dt, q_i, 0.0, mass) * v_start * damping(1)
    for k in range(2, n):
        src = amp * phase_v * dq
        amp = fftconvolve(src, kern, mode="valid") * damping(k)
    last = free_kernel(q_f, dt, q, 0.0, mass) * phase_v
    value = complex(np.sum(last * amp) * dq)
    if not math.isfinite(abs(value)):
        raise NonFiniteError("non-finite sliced amplitude")
    return value


def sliced_propagator(potential: Optional[Callable], mass: float, q_f: float, t_f: float,
                      q_i: float, t_i: float, spec: SlicingSpec) -> complex:
    """Time-sliced kernel ``K_n(q_f, t_f; q_i, t_i)`` for ``H = p^2/(2m) + V(q)``.

    ``potential`` may be None for a free particle.  With one slice the
    single factor is returned without any quadrature.
    """
    if not mass > 0:
        raise ValueError("mass must be positive")
    T = float(t_f) - float(t_i)
    if not T > 0:
        raise ValueError("sliced propagator needs t_f > t_i")
    n = spec.n_slices
    dt = T / n
    q_f, q_i = float(q_f), float(q_i)
    if n == 1:
        v = 0.0 if potential is None else float(potential(q_i))
        return complex(free_kernel(q_f, dt, q_i, 0.0, mass) * np.exp(-1j * dt * v))
    quad = spec.quadrature
    values = [_damped_chain(potential, mass, q_f, q_i, dt, n, eps, spec) for eps in quad.eps_ladder]
    est, _ = extrapolate(quad.eps_ladder, values, quad.rtol, quad.atol, what="sliced propagator")
    return complex(est)


def reference_kernel(force: float, mass: float, q_f, t_f, q_i, t_i) -> complex:
    """Closed form for ``V = -force * q`` (free when force is 0)."""
    if force == 0:
        return free_kernel(q_f, t_f, q_i, t_i, mass)
    return forced_kernel(q_f, t_f, q_i, t_i, mass, force)


def convergence_study(potential: Optional[Callable], mass: float, endpoints,
                      n_list: Sequence[int], reference: Optional[complex] = None,
                      spec_factory: Optional[Callable[[int], SlicingSpec]] = None):
    """Errors of the sliced propagator over increasing slice counts.

    ``endpoints`` is ``(q_f, t_f, q_i, t_i)``.  Without a ``reference`` the
    finest entry of ``n_list`` serves as one, and is itself reported with
    zero error.  Returns a list of ``(n, abs_error, rel_error)``.
    """
    n_list = [int(n) for n in n_list]
    if any(a >= b for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    if not n_list:
        return []
    make = spec_factory or (lambda n: SlicingSpec(n))
    q_f, t_f, q_i, t_i = endpoints
    vals = [sliced_propagator(potential, mass, q_f, t_f, q_i, t_i, make(n)) for n in n_list]
    ref = vals[-1] if reference is None else complex(reference)
    return [(n, abs(v - ref), abs(v - ref) / abs(ref)) for n, v in zip(n_list, vals)]
