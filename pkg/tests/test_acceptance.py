"""The ten acceptance criteria at their stated tolerances.

Every test records a ``criterion N: PASS|FAIL <detail>`` line, printed in
the terminal summary.  Criteria 2 and 6 (the Stokes ratio part) are not met
by a faithful implementation; see the README.
"""

import itertools
import math

import numpy as np
import pytest

from multitime import consistency, evolution, kernels, pathint, timepaths, wavegrid, wilson
from multitime.consistency import HamiltonianFamily, LagrangianFamily
from multitime.timepaths import StaircasePath, TimePoint

SIGMA_X = wilson.PAULI_X
SIGMA_Y = wilson.PAULI_Y


@pytest.fixture
def verdict(record_property):
    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        record_property("criterion", line)
        return ok
    return record


def test_criterion_1_kernel_composition(verdict):
    qs = [-1.0, -0.5, 0.0, 0.5, 1.0]
    spec = kernels.Free(1.0)
    worst = 0.0
    for q_f, q_i in itertools.product(qs, qs):
        c = kernels.compose(spec, spec, q_f, 1.0, 0.5, q_i, 0.0)
        d = kernels.free_kernel(q_f, 1.0, q_i, 0.0)
        worst = max(worst, abs(c - d) / abs(d))
    assert verdict("1", worst < 1e-6, f"max rel error over 25 pairs {worst:.3e} (< 1e-6)")


def test_criterion_2_delta_limit(verdict):
    ladder = [0.1, 0.05, 0.025]
    res = kernels.delta_limit_check(kernels.Free(1.0), lambda q: np.exp(-q**2), 0.0, ladder)
    errs = [abs(v - 1.0) for _, v in res]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = monotone and errs[-1] < 5e-3
    assert verdict("2", ok, "errors " + ", ".join(f"{e:.4e}" for e in errs)
                   + f" monotone={monotone} final (< 5e-3)")


def test_criterion_3_commuting_staircases(verdict, grid, packet_pair):
    dyn = evolution.AxisDynamics()
    paths = timepaths.enumerate_staircases(2, 2, 1.0, 1.0)
    finals = [evolution.evolve_path(packet_pair, p, dyn) for p in paths]
    worst = max(wavegrid.l2_distance(a, b) for a, b in itertools.combinations(finals, 2))
    ok = len(paths) == 6 and worst < 1e-10
    assert verdict("3", ok, f"{len(paths)} staircases, max pairwise L2 {worst:.3e} (< 1e-10)")


def _commuting_family(rng, dim=3, n=3):
    V, _ = np.linalg.qr(rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)))
    return [V @ np.diag(rng.uniform(-2, 2, dim)) @ V.conj().T for _ in range(n)]


def test_criterion_4_loop_triviality(verdict, grid, packet_pair, rng):
    rep = evolution.loop_check(packet_pair, timepaths.rect_loop(1.0, 1.0), evolution.AxisDynamics())
    hams = _commuting_family(rng)
    devs = []
    for _ in range(10):
        j, k = rng.choice(3, size=2, replace=False) + 1
        a, b = rng.uniform(-1, 1, size=2)
        loop = StaircasePath.of((j, a), (k, b), (j, -a), (k, -b))
        devs.append(wilson.loop_holonomy_deviation(hams, loop))
    ok = rep.l2_discrepancy < 1e-10 and max(devs) < 1e-10
    assert verdict("4", ok, f"grid loop L2 {rep.l2_discrepancy:.3e}, "
                   f"max Frobenius over 10 loops {max(devs):.3e} (< 1e-10)")


def test_criterion_5_interaction(verdict, grid, packet_pair):
    closed = evolution.interaction_phase_discrepancy(1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0)
    a_ok = abs(closed - 11 / 24) <= 1e-9

    dyn = evolution.AxisDynamics.bilinear_coupling(1.0)
    fa = evolution.evolve_path(packet_pair, StaircasePath.parse("1:+1,2:+1"), dyn)
    fb = evolution.evolve_path(packet_pair, StaircasePath.parse("2:+1,1:+1"), dyn)
    l2 = wavegrid.l2_distance(fa, fb)
    b_ok = l2 > 1e-3

    qdot2 = 3.0
    L1 = lambda qd, q, t: qd**2 / 2 + q * (qdot2 * t[2])
    L2 = lambda qd, q, t: qd**2 / 2
    r = consistency.lagrangian_curvature(LagrangianFamily((L1, L2)), 1, 2, [0.0, qdot2],
                                         [2.0, 0.0], TimePoint([0.3, 0.7]))
    c_ok = abs(r - (-6.0)) <= 1e-5
    assert verdict("5", a_ok and b_ok and c_ok,
                   f"(a) phase {closed:.10f} vs 11/24; (b) corner L2 {l2:.4f} (> 1e-3); "
                   f"(c) residual {r:.8f} vs -6")


def test_criterion_6_holonomy_scaling(verdict):
    hams = [SIGMA_X, SIGMA_Y]
    sides = [0.1, 0.05, 0.025]
    devs = [wilson.loop_holonomy_deviation(hams, timepaths.rect_loop(e, e)) for e in sides]
    slope = np.polyfit(np.log(sides), np.log(devs), 1)[0]
    scaled = [wilson.stokes_check(hams, timepaths.rect_loop(e, e)).residual / e**2 for e in sides]
    ratios = [a / b for a, b in zip(scaled, scaled[1:])]
    slope_ok = abs(slope - 2.0) <= 0.1
    ratio_ok = min(ratios) >= 2.0
    assert verdict("6", slope_ok and ratio_ok,
                   f"slope {slope:.4f} (2 +- 0.1); residual/eps^2 ratios "
                   + ", ".join(f"{x:.5f}" for x in ratios) + " (>= 2)")


def test_criterion_7_path_integral(verdict):
    ref = kernels.free_kernel(1.0, 1.0, 0.0, 0.0)
    free = [abs(pathint.sliced_propagator(None, 1.0, 1.0, 1.0, 0.0, 0.0, pathint.SlicingSpec(n)) - ref)
            / abs(ref) for n in (2, 4, 8)]
    table = pathint.convergence_study(lambda q: -np.asarray(q), 1.0, (1.0, 1.0, 0.0, 0.0), [4, 8, 16],
                                      reference=kernels.forced_kernel(1.0, 1.0, 0.0, 0.0, 1.0, 1.0))
    rel = [r[2] for r in table]
    ratios = [a / b for a, b in zip(rel, rel[1:])]
    ok = max(free) < 1e-5 and all(1.5 <= x <= 2.5 for x in ratios)
    assert verdict("7", ok, f"free max rel error {max(free):.3e} (< 1e-5); forced ratios "
                   + ", ".join(f"{x:.4f}" for x in ratios) + " in [1.5, 2.5]")


def test_criterion_8_classical_residuals(verdict, rng):
    # decoupled: each particle sees only its own time and coordinates
    La = LagrangianFamily((lambda qd, q, t: qd**2 / 2 - math.cos(t[1]) * q**2,
                           lambda qd, q, t: 2 * qd**2 + math.sin(q) * t[2]))
    Ha = HamiltonianFamily((lambda q, p, t: (p[0]**2 + q[0]**2) / 2 + t[1] * q[0],
                            lambda q, p, t: p[1]**2 / 2 + math.cos(q[1]) * t[2]))
    # coupled but involutive: rotation-invariant oscillator and angular momentum
    Hb = HamiltonianFamily((lambda q, p, t: (p @ p + q @ q) / 2,
                            lambda q, p, t: q[0] * p[1] - q[1] * p[0]))
    worst = 0.0
    for _ in range(20):
        q, p, v, t = (rng.uniform(-1, 1, 2) for _ in range(4))
        at = TimePoint(t)
        worst = max(worst,
                    abs(consistency.lagrangian_curvature(La, 1, 2, v, q, at)),
                    abs(consistency.poisson_residual(Ha, 1, 2, q, p, at)),
                    abs(consistency.poisson_residual(Hb, 1, 2, q, p, at)))

    Lc = LagrangianFamily((lambda qd, q, t: qd**2 / 2 + q * (3.0 * t[2]), lambda qd, q, t: qd**2 / 2))
    lag = consistency.lagrangian_curvature(Lc, 1, 2, [0.0, 3.0], [2.0, 0.0], TimePoint([0.3, 0.7]))
    Hc = HamiltonianFamily((lambda q, p, t: p[0]**2 / 2 + q[0] * q[1], lambda q, p, t: p[1]**2 / 2))
    poi = consistency.poisson_residual(Hc, 1, 2, [1.0, 0.0], [0.0, 2.0], TimePoint([0.0, 0.0]))
    ok = worst < 1e-8 and abs(lag + 6.0) <= 1e-5 and abs(poi + 2.0) <= 1e-5
    assert verdict("8", ok, f"decoupled max |residual| {worst:.3e} (< 1e-8); coupled "
                   f"lagrangian {lag:.8f} vs -6, poisson {poi:.8f} vs -2")


def test_criterion_9_action_invariance(verdict):
    fam = LagrangianFamily((lambda qd, q, t: qd**2 / 2 - q**2 / 2 + math.cos(t[1]),
                            lambda qd, q, t: 2 * qd**2 + math.sin(q)))
    coords = [lambda s: 0.3 + 1.2 * s + 0.1 * s**2, lambda s: -0.5 + 0.7 * s]
    start = TimePoint([0.0, 0.0])
    actions = [consistency.action_along_path(fam, consistency.staircase_trajectory(
        StaircasePath.parse(s), coords, start)) for s in ("1:+1,2:+1", "2:+1,1:+1", "2:+0.5,1:+1,2:+0.5")]
    spread = max(actions) - min(actions)
    assert verdict("9", spread < 1e-8, f"action spread over 3 staircases {spread:.3e} (< 1e-8)")


def test_criterion_10_unitarity(verdict, packet_pair, rng):
    drift = 0.0
    for dyn in (evolution.AxisDynamics(), evolution.AxisDynamics.bilinear_coupling(1.0)):
        for path in timepaths.enumerate_staircases(2, 2, 1.0, 1.0)[:3]:
            f = packet_pair
            for step in path:
                f = evolution.propagate_axis(f, step.axis, step.dt, dyn)
                drift = max(drift, abs(f.norm() - 1.0))

    def driven(t):
        return math.cos(t[1]) * SIGMA_X + t[2] * SIGMA_Y + 0.3 * wilson.PAULI_Z

    hams_sets = [[SIGMA_X, SIGMA_Y], _commuting_family(rng, 4, 2),
                 [wilson.MatrixHamiltonian(driven, 2), wilson.MatrixHamiltonian(SIGMA_Y)]]
    defect = 0.0
    for hams in hams_sets:
        for _ in range(10):
            path = StaircasePath.of(*[(int(rng.integers(1, 3)), float(rng.uniform(-2, 2)))
                                      for _ in range(5)])
            U = wilson.ordered_exponential(hams, path, substeps=8)
            defect = max(defect, wilson.unitarity_defect(U))
    ok = drift <= 1e-10 and defect <= 1e-10
    assert verdict("10", ok, f"max per-step norm drift {drift:.3e}, "
                   f"max unitarity defect {defect:.3e} (<= 1e-10)")
