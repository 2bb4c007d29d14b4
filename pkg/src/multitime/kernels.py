"""Closed-form single-particle propagators and their composition.

Units are natural (hbar = 1).  All kernels accept numpy arrays for the
positions and broadcast; times are scalars.  The complex square root in the
prefactor ``sqrt(m / (2 pi i dt))`` is fixed to
``sqrt(m / (2 pi |dt|)) * exp(-i sign(dt) pi / 4)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DegenerateIntervalError, NonFiniteError, PrefactorZeroError
from .quadrature import QuadratureSpec, oscillatory_integral

__all__ = [
    "Free",
    "ConstantForce",
    "Semiclassical",
    "KernelSpec",
    "QuadratureSpec",
    "free_kernel",
    "forced_kernel",
    "semiclassical_kernel",
    "forced_action",
    "kernel_value",
    "compose",
    "compose_callables",
    "delta_limit_check",
]


@dataclass(frozen=True)
class Free:
    mass: float = 1.0

    def __post_init__(self):
        _check_mass(self.mass)


@dataclass(frozen=True)
class ConstantForce:
    mass: float = 1.0
    force: float = 0.0

    def __post_init__(self):
        _check_mass(self.mass)


@dataclass(frozen=True)
class Semiclassical:
    """Kernel built from a classical action ``S(q_f, t_f, q_i, t_i)``.

    The action should broadcast over numpy arrays in ``q_f`` and ``q_i`` if
    the kernel is to be used inside :func:`compose`.
    """

    classical_action: Callable


KernelSpec = Union[Free, ConstantForce, Semiclassical]


def _check_mass(mass):
    if not (mass > 0 and math.isfinite(mass)):
        raise ValueError(f"mass must be positive and finite, got {mass!r}")


def _interval(t_f, t_i) -> float:
    dt = float(t_f) - float(t_i)
    if dt == 0.0:
        raise DegenerateIntervalError(
            "t_f == t_i: the zero-time kernel is a delta function; use delta_limit_check"
        )
    if not math.isfinite(dt):
        raise NonFiniteError("non-finite time interval")
    return dt


def _scalar_or_array(z):
    z = np.asarray(z)
    return complex(z) if z.ndim == 0 else z


def _fresnel_phase(dt: float) -> complex:
    return complex(math.cos(math.pi / 4), -math.copysign(math.sin(math.pi / 4), dt))


def _prefactor(mass: float, dt: float) -> complex:
    return math.sqrt(mass / (2 * math.pi * abs(dt))) * _fresnel_phase(dt)


def free_kernel(q_f, t_f, q_i, t_i, mass=1.0):
    """Free-particle propagator K(q_f, t_f; q_i, t_i).

    >>> k = free_kernel(0.0, 1.0, 0.0, 0.0, 1.0)
    >>> round(k.real, 7), round(k.imag, 7)
    (0.2820948, -0.2820948)
    """
    _check_mass(mass)
    dt = _interval(t_f, t_i)
    dq = np.asarray(q_f, dtype=float) - np.asarray(q_i, dtype=float)
    return _scalar_or_array(_prefactor(mass, dt) * np.exp(1j * mass * dq**2 / (2 * dt)))


def forced_action(q_f, t_f, q_i, t_i, mass=1.0, force=0.0):
    """Classical action of a particle under a constant force (L = m v^2/2 + F q)."""
    dt = float(t_f) - float(t_i)
    q_f = np.asarray(q_f, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    return (mass * (q_f - q_i) ** 2 / (2 * dt)
            + 0.5 * force * (q_f + q_i) * dt
            - force**2 * dt**3 / (24 * mass))


def forced_kernel(q_f, t_f, q_i, t_i, mass=1.0, force=0.0):
    """Propagator for L = m qdot^2 / 2 + F q."""
    _check_mass(mass)
    dt = _interval(t_f, t_i)
    phase = forced_action(q_f, t_f, q_i, t_i, mass, force)
    return _scalar_or_array(_prefactor(mass, dt) * np.exp(1j * phase))


def semiclassical_kernel(spec: Semiclassical, q_f, t_f, q_i, t_i):
    """``F * exp(i S_c)`` with ``F = sqrt(|d2 S_c / dq_i dq_f| / (2 pi i))``.

    The mixed derivative uses a central four-point stencil with step
    ``1e-4 * max(1, |q_i|, |q_f|)``.  For ``t_f < t_i`` the branch of
    ``sqrt(1/i)`` follows the same sign rule as :func:`free_kernel`.
    """
    dt = _interval(t_f, t_i)
    S = spec.classical_action
    q_f = np.asarray(q_f, dtype=float)
    q_i = np.asarray(q_i, dtype=float)
    h = 1e-4 * np.maximum(1.0, np.maximum(np.abs(q_i), np.abs(q_f)))
    corners = [
        np.asarray(S(q_f + h, t_f, q_i + h, t_i), dtype=float),
        np.asarray(S(q_f + h, t_f, q_i - h, t_i), dtype=float),
        np.asarray(S(q_f - h, t_f, q_i + h, t_i), dtype=float),
        np.asarray(S(q_f - h, t_f, q_i - h, t_i), dtype=float),
    ]
    centre = np.asarray(S(q_f, t_f, q_i, t_i), dtype=float)
    if not all(np.all(np.isfinite(c)) for c in corners + [centre]):
        raise NonFiniteError("classical action is not finite near the requested endpoints")
    mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4 * h**2)
    # rounding floor of the stencil; anything below it is indistinguishable from zero
    noise = 8 * np.finfo(float).eps * np.max(np.abs(corners), axis=0) / (4 * h**2)
    if np.any(np.abs(mixed) <= noise):
        raise PrefactorZeroError("mixed second derivative of the classical action vanishes")
    pref = np.sqrt(np.abs(mixed) / (2 * math.pi)) * _fresnel_phase(dt)
    return _scalar_or_array(pref * np.exp(1j * centre))


def kernel_value(spec: KernelSpec, q_f, t_f, q_i, t_i):
    if isinstance(spec, Free):
        return free_kernel(q_f, t_f, q_i, t_i, spec.mass)
    if isinstance(spec, ConstantForce):
        return forced_kernel(q_f, t_f, q_i, t_i, spec.mass, spec.force)
    if isinstance(spec, Semiclassical):
        return semiclassical_kernel(spec, q_f, t_f, q_i, t_i)
    raise TypeError(f"unknown kernel spec {spec!r}")


def _chirp_rate(spec, dt):
    """Coefficient of q^2 in the kernel phase, when known in closed form."""
    if isinstance(spec, (Free, ConstantForce)):
        return spec.mass / (2 * abs(dt))
    return None


def _hint(rates, spread, quad: QuadratureSpec):
    if any(r is None for r in rates):
        return None
    a = sum(rates)

    def dq(eps):
        reach = quad.half_width(eps) + spread
        return 0.9 * quad.max_phase_step / (2 * a * reach + 1e-300)

    return dq


def compose_callables(k_a, k_b, q_f, t_f, t_mid, q_i, t_i, quadrature=None, chirp_rate=None):
    """``int dq K_a(q_f, t_f; q, t_mid) K_b(q, t_mid; q_i, t_i)`` for arbitrary kernels.

    ``k_a`` and ``k_b`` are callables ``(q_f, t_f, q_i, t_i) -> complex`` that
    broadcast over arrays.  ``chirp_rate`` optionally gives the total q^2
    phase coefficient to seed the grid spacing.
    """
    t_f, t_mid, t_i = float(t_f), float(t_mid), float(t_i)
    if not ((t_i < t_mid < t_f) or (t_i > t_mid > t_f)):
        raise ValueError("t_mid must lie strictly between t_i and t_f")
    quad = quadrature or QuadratureSpec()
    centre = q_i + (q_f - q_i) * (t_mid - t_i) / (t_f - t_i)

    def integrand(q):
        return k_a(q_f, t_f, q, t_mid) * k_b(q, t_mid, q_i, t_i)

    hint = None
    if chirp_rate is not None:
        hint = _hint([chirp_rate], abs(q_f - centre) + abs(q_i - centre), quad)
    return oscillatory_integral(integrand, centre, quad, hint).value


def compose(spec_a: KernelSpec, spec_b: KernelSpec, q_f, t_f, t_mid, q_i, t_i,
            quadrature: QuadratureSpec | None = None) -> complex:
    """Chapman-Kolmogorov composition of two kernels through time ``t_mid``.

    ``spec_a`` propagates from ``t_mid`` to ``t_f`` and ``spec_b`` from ``t_i``
    to ``t_mid``.  Raises ConvergenceError if the damping extrapolation does
    not settle.
    """
    if not ((t_i < t_mid < t_f) or (t_i > t_mid > t_f)):
        raise ValueError("t_mid must lie strictly between t_i and t_f")
    quad = quadrature or QuadratureSpec()
    rates = [_chirp_rate(spec_a, t_f - t_mid), _chirp_rate(spec_b, t_mid - t_i)]
    rate = None if any(r is None for r in rates) else sum(rates)
    return compose_callables(
        lambda qf, tf, qi, ti: kernel_value(spec_a, qf, tf, qi, ti),
        lambda qf, tf, qi, ti: kernel_value(spec_b, qf, tf, qi, ti),
        q_f, t_f, t_mid, q_i, t_i, quad, chirp_rate=rate,
    )


def _vectorized(f):
    def g(q):
        try:
            out = np.asarray(f(q), dtype=complex)
        except (TypeError, ValueError):
            out = None
        if out is None or out.shape != np.shape(q):
            out = np.vectorize(f, otypes=[complex])(q)
        return out

    return g


def delta_limit_check(spec: KernelSpec, test_function, q_eval, dt_ladder,
                      quadrature: QuadratureSpec | None = None, t0=0.0):
    """Smear the kernel against ``test_function`` for shrinking intervals.

    Returns ``[(dt, int dq K(q_eval, t0 + dt; q, t0) f(q)), ...]``.  As ``dt``
    shrinks the values approach ``f(q_eval)``.
    """
    ladder = [float(d) for d in dt_ladder]
    if any(d <= 0 for d in ladder) or any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("dt_ladder must be positive and strictly decreasing")
    quad = quadrature or QuadratureSpec()
    f = _vectorized(test_function)
    out = []
    for dt in ladder:
        def integrand(q, dt=dt):
            return kernel_value(spec, q_eval, t0 + dt, q, t0) * f(q)

        rate = _chirp_rate(spec, dt)
        hint = None if rate is None else _hint([rate], 0.0, quad)
        out.append((dt, oscillatory_integral(integrand, float(q_eval), quad, hint).value))
    return out
