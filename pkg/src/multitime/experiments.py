"""Experiment runners behind ``multitime run``.

Each runner takes the validated ``params`` block and returns an
:class:`Outcome`: scalar outputs, an optional data table (the CSV body) and
the list of declared checks.  Defaults reproduce the reference setups
described in the README.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import consistency, evolution, kernels, pathint, timepaths, wavegrid, wilson
from .expr import Expression, bind, function_of
from .timepaths import StaircasePath, TimePoint


@dataclass
class Check:
    """One pass/fail statement; re-derivable from the recorded fields.

    comparators: ``<=``, ``<``, ``>=``, ``>`` compare ``measured`` against
    ``tolerance``; ``within`` means ``|measured - target| <= tolerance``;
    ``in_range`` means ``target[0] <= measured <= target[1]``.
    """

    name: str
    measured: float
    comparator: str
    tolerance: float | None = None
    target: object = None
    passed: bool = field(init=False)

    def __post_init__(self):
        m = float(self.measured)
        c = self.comparator
        if not math.isfinite(m):
            self.passed = False
        elif c == "<=":
            self.passed = m <= self.tolerance
        elif c == "<":
            self.passed = m < self.tolerance
        elif c == ">=":
            self.passed = m >= self.tolerance
        elif c == ">":
            self.passed = m > self.tolerance
        elif c == "within":
            self.passed = abs(m - float(self.target)) <= self.tolerance
        elif c == "in_range":
            lo, hi = self.target
            self.passed = lo <= m <= hi
        else:
            raise ValueError(f"unknown comparator {c!r}")

    def to_dict(self) -> dict:
        d = {"name": self.name, "measured": float(self.measured), "comparator": self.comparator}
        if self.tolerance is not None:
            d["tolerance"] = float(self.tolerance)
        if self.target is not None:
            d["target"] = self.target
        d["passed"] = bool(self.passed)
        return d


@dataclass
class Outcome:
    outputs: dict
    checks: list
    columns: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _cplx(z) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _kernel_spec(p: dict):
    p = p or {"type": "free"}
    mass = float(p.get("mass", 1.0))
    if p["type"] == "forced":
        return kernels.ConstantForce(mass, float(p.get("force", 0.0)))
    return kernels.Free(mass)


def _quadrature(p: dict | None) -> kernels.QuadratureSpec:
    if not p:
        return kernels.QuadratureSpec()
    kw = {}
    if "eps_ladder" in p:
        kw["eps_ladder"] = tuple(p["eps_ladder"])
    for key in ("rtol", "atol", "n_sigma"):
        if key in p:
            kw[key] = float(p[key])
    return kernels.QuadratureSpec(**kw)


# kernel-level experiments

def run_kernel_eval(p: dict, ctx) -> Outcome:
    spec = _kernel_spec(p["kernel"])
    vals = [kernels.kernel_value(spec, *pt) for pt in p["points"]]
    rows = [[*pt, v.real, v.imag, abs(v)] for pt, v in zip(p["points"], vals)]
    checks = []
    if "expected" in p:
        exp = [complex(*e) if isinstance(e, list) else complex(e) for e in p["expected"]]
        if len(exp) != len(vals):
            raise ValueError("expected values and points differ in number")
        err = max(abs(v - e) / max(abs(e), 1e-300) for v, e in zip(vals, exp))
        checks.append(Check("max_rel_error_vs_expected", err, "<=", p.get("tolerance", 1e-12)))
    return Outcome({"values": [_cplx(v) for v in vals]}, checks,
                   ["q_f", "t_f", "q_i", "t_i", "re", "im", "abs"], rows)


def run_compose_check(p: dict, ctx) -> Outcome:
    spec = _kernel_spec(p.get("kernel"))
    t_i, t_mid, t_f = p.get("t_i", 0.0), p.get("t_mid", 0.5), p.get("t_f", 1.0)
    qs = p.get("q_values", [-1.0, -0.5, 0.0, 0.5, 1.0])
    quad = _quadrature(p.get("quadrature"))
    rows, worst = [], 0.0
    for q_f, q_i in itertools.product(qs, qs):
        c = kernels.compose(spec, spec, q_f, t_f, t_mid, q_i, t_i, quad)
        d = kernels.kernel_value(spec, q_f, t_f, q_i, t_i)
        rel = abs(c - d) / abs(d)
        worst = max(worst, rel)
        rows.append([q_f, q_i, c.real, c.imag, d.real, d.imag, rel])
    checks = [Check("max_rel_error", worst, "<=", p.get("tolerance", 1e-6))]
    return Outcome({"pairs": len(rows), "max_rel_error": worst}, checks,
                   ["q_f", "q_i", "composed_re", "composed_im", "direct_re", "direct_im", "rel_error"],
                   rows)


def run_delta_limit(p: dict, ctx) -> Outcome:
    spec = _kernel_spec(p.get("kernel"))
    f = function_of(p.get("test_function", "exp(-q^2)"), "q", p.get("constants"))
    q0 = float(p.get("q_eval", 0.0))
    ladder = p.get("dt_ladder", [0.1, 0.05, 0.025])
    target = complex(np.asarray(f(q0)))
    res = kernels.delta_limit_check(spec, f, q0, ladder, _quadrature(p.get("quadrature")))
    errs = [abs(v - target) for _, v in res]
    rows = [[dt, v.real, v.imag, e] for (dt, v), e in zip(res, errs)]
    worst_ratio = min((a / b for a, b in zip(errs, errs[1:]) if b > 0), default=math.inf)
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    checks = [
        Check("error_decreases_monotonically", 1.0 if monotone else 0.0, ">=", 1.0),
        Check("final_error", errs[-1], "<", p.get("tolerance", 5e-3)),
    ]
    return Outcome({"target": _cplx(target), "errors": errs, "min_error_ratio": worst_ratio},
                   checks, ["dt", "re", "im", "abs_error"], rows)


# grid experiments

def _grid_setup(p: dict):
    g = p.get("grid", {})
    grid = wavegrid.SpatialGrid.centered(int(g.get("n", 256)), float(g.get("extent", 40.0)))
    packs = p.get("packets", [{}, {}])
    psis = [wavegrid.gaussian_packet(grid, float(pk.get("center", 0.0)), float(pk.get("width", 1.0)),
                                     float(pk.get("momentum", 0.0))) for pk in packs]
    field0 = wavegrid.product_state(*psis)
    d = p.get("dynamics", {})
    consts = d.get("constants")
    pots = {}
    for key in ("potential1", "potential2"):
        if key in d:
            pots[key] = function_of(d[key], "q", consts)
    k = float(d.get("coupling", 0.0))
    inter = (lambda q1, q2: -k * q1 * q2) if k != 0 else None
    dyn = evolution.AxisDynamics(float(d.get("mass1", 1.0)), float(d.get("mass2", 1.0)),
                                 pots.get("potential1"), pots.get("potential2"), inter, 1,
                                 float(d.get("dt_max", 1e-2)))
    return field0, dyn


def _grid_checks(p, name, measured):
    tol = p.get("tolerance")
    if p.get("expect", "consistent") == "consistent":
        return Check(name, measured, "<", 1e-10 if tol is None else tol)
    return Check(name, measured, ">", 1e-3 if tol is None else tol)


def _norm_checks(fields, reference=1.0):
    drift = max(abs(f.norm() - reference) for f in fields)
    return Check("max_norm_drift", drift, "<=", 1e-10)


def run_staircase_invariance(p: dict, ctx) -> Outcome:
    field0, dyn = _grid_setup(p)
    n1, n2 = int(p.get("n1", 2)), int(p.get("n2", 2))
    paths = timepaths.enumerate_staircases(n1, n2, float(p.get("T1", 1.0)), float(p.get("T2", 1.0)))
    finals = [evolution.evolve_path(field0, path, dyn) for path in paths]
    worst = 0.0
    rows = []
    for (a, fa), (b, fb) in itertools.combinations(enumerate(finals), 2):
        d = wavegrid.l2_distance(fa, fb)
        worst = max(worst, d)
        rows.append([a, b, str(paths[a]), str(paths[b]), d])
    if "dump_field" in p:
        ctx.dump(finals[0], p["dump_field"])
    expected = timepaths.staircase_count(n1, n2)
    checks = [
        Check("path_count", len(paths), "within", 0.0, expected),
        _grid_checks(p, "max_pairwise_l2", worst),
        _norm_checks(finals),
    ]
    return Outcome({"paths": [str(x) for x in paths], "max_pairwise_l2": worst}, checks,
                   ["path_a", "path_b", "steps_a", "steps_b", "l2_distance"], rows)


def run_loop_check(p: dict, ctx) -> Outcome:
    field0, dyn = _grid_setup(p)
    if "loop" in p:
        loop = StaircasePath.parse(p["loop"])
    else:
        loop = timepaths.rect_loop(float(p.get("dt1", 1.0)), float(p.get("dt2", 1.0)))
    rep = evolution.loop_check(field0, loop, dyn)
    if "dump_field" in p:
        ctx.dump(rep.final_field, p["dump_field"])
    checks = [_grid_checks(p, "loop_l2_deviation", rep.l2_discrepancy),
              _norm_checks([rep.final_field])]
    return Outcome({"loop": str(loop), "l2_deviation": rep.l2_discrepancy,
                    "aligned_deviation": rep.aligned_discrepancy, "phase": rep.phase}, checks)


def run_interaction_discrepancy(p: dict, ctx) -> Outcome:
    args = [float(p.get(key, dflt)) for key, dflt in
            (("k", 1.0), ("mass", 1.0), ("q1", 0.0), ("q1p", 1.0), ("q2", 0.0), ("q2p", 1.0), ("dt1", 1.0))]
    dt2 = float(p.get("dt2", 1.0))
    closed = evolution.interaction_phase_discrepancy(*args)
    measured = evolution.corner_phase_difference(*args, dt2)
    wrapped = math.remainder(closed, 2 * math.pi)
    checks = [Check("kernel_phase_vs_closed_form", measured, "within",
                    p.get("kernel_tolerance", 1e-6), wrapped)]
    if "expected" in p:
        checks.append(Check("closed_form_vs_expected", closed, "within",
                            p.get("tolerance", 1e-9), float(p["expected"])))
    return Outcome({"phase_discrepancy": closed, "kernel_phase_difference": measured}, checks)


# operator experiments

_NAMED = {
    "sigma_x": wilson.PAULI_X, "sigma_y": wilson.PAULI_Y, "sigma_z": wilson.PAULI_Z,
    "identity2": np.eye(2, dtype=complex), "zero2": np.zeros((2, 2), dtype=complex),
}


def _matrix(m) -> np.ndarray:
    if isinstance(m, str):
        return _NAMED[m]
    return wilson.parse_matrix(m)


def _hamiltonians(spec: list) -> list:
    out = []
    for h in spec:
        if isinstance(h, dict):
            base = _matrix(h["base"])
            slopes = [_matrix(s) for s in h.get("slopes", [])]
            if not slopes:
                out.append(wilson.MatrixHamiltonian(base))
                continue
            for s in slopes:
                wilson._check_hermitian(s, " in a slope matrix")

            def H(t, base=base, slopes=slopes):
                return base + sum(t[a + 1] * s for a, s in enumerate(slopes))

            out.append(wilson.MatrixHamiltonian(H, dim=base.shape[0]))
        else:
            out.append(wilson.MatrixHamiltonian(_matrix(h)))
    return wilson.as_hamiltonians(out)


def run_curvature(p: dict, ctx) -> Outcome:
    hams = _hamiltonians(p["hamiltonians"])
    j, k = int(p.get("j", 1)), int(p.get("k", 2))
    at = TimePoint(p.get("at", [0.0] * len(hams)))
    F = wilson.curvature(hams, j, k, at, float(p.get("fd_step", 1e-5)))
    checks = []
    if "expected" in p:
        err = float(np.linalg.norm(F - _matrix(p["expected"])))
        checks.append(Check("frobenius_error_vs_expected", err, "<=", p.get("tolerance", 1e-8)))
    return Outcome({"F": wilson.dump_matrix(F), "frobenius_norm": float(np.linalg.norm(F))}, checks)


def _random_loop(rng, n_axes: int, max_side: float) -> StaircasePath:
    # random rectangle in a random plane, traversed from a random corner ordering
    j, k = rng.choice(n_axes, size=2, replace=False) + 1
    a, b = rng.uniform(-max_side, max_side, size=2)
    return StaircasePath.of((j, a), (k, b), (j, -a), (k, -b))


def run_holonomy(p: dict, ctx) -> Outcome:
    hams = _hamiltonians(p["hamiltonians"])
    substeps = int(p.get("substeps", 1))
    loops = [StaircasePath.parse(s) for s in p.get("loops", [])]
    if "random_loops" in p:
        r = p["random_loops"]
        seed = ctx.seed if ctx.seed is not None else int(r.get("seed", 0))
        rng = np.random.default_rng(seed)
        loops += [_random_loop(rng, len(hams), float(r.get("max_side", 1.0)))
                  for _ in range(int(r.get("count", 10)))]
    rows, checks, outputs = [], [], {}
    devs, unit = [], []
    for loop in loops:
        U = wilson.ordered_exponential(hams, loop, substeps)
        d = wilson.loop_holonomy_deviation(hams, loop, substeps)
        devs.append(d)
        unit.append(wilson.unitarity_defect(U))
        rows.append(["loop", str(loop), d])
    if loops:
        outputs["max_loop_deviation"] = max(devs)
        tol = p.get("tolerance")
        if p.get("expect", "consistent") == "consistent":
            checks.append(Check("max_loop_deviation", max(devs), "<", 1e-10 if tol is None else tol))
        else:
            checks.append(Check("min_loop_deviation", min(devs), ">", 1e-3 if tol is None else tol))
    if "square_sides" in p:
        sides = [float(e) for e in p["square_sides"]]
        sq = [wilson.loop_holonomy_deviation(hams, timepaths.rect_loop(e, e), substeps) for e in sides]
        for e, d in zip(sides, sq):
            U = wilson.ordered_exponential(hams, timepaths.rect_loop(e, e), substeps)
            unit.append(wilson.unitarity_defect(U))
            rows.append(["square", f"{e!r}", d])
        slope = float(np.polyfit(np.log(sides), np.log(sq), 1)[0])
        outputs["square_deviations"] = sq
        outputs["loglog_slope"] = slope
        checks.append(Check("loglog_slope", slope, "within", p.get("slope_tolerance", 0.1),
                            float(p.get("expected_slope", 2.0))))
    checks.append(Check("max_unitarity_defect", max(unit, default=0.0), "<=", 1e-10))
    return Outcome(outputs, checks, ["family", "loop", "frobenius_deviation"], rows)


def run_stokes(p: dict, ctx) -> Outcome:
    hams = _hamiltonians(p["hamiltonians"])
    sides = [float(e) for e in p.get("sides", [0.1, 0.05, 0.025])]
    aspect = float(p.get("aspect", 1.0))
    start = TimePoint(p["start"]) if "start" in p else None
    substeps = int(p.get("substeps", 1))
    fd = float(p.get("fd_step", 1e-5))
    rows, res = [], []
    for e in sides:
        r = wilson.stokes_check(hams, timepaths.rect_loop(e, aspect * e), substeps, start, fd)
        res.append(r.residual)
        rows.append([e, aspect * e, r.residual, r.residual / e**2])
    checks = []
    scaled = [r / e**2 for r, e in zip(res, sides)]
    ratios = [a / b for a, b in zip(scaled, scaled[1:]) if b > 0]
    if "max_residual" in p:
        checks.append(Check("max_residual", max(res), "<=", p["max_residual"]))
    if len(sides) > 1 and "max_residual" not in p:
        checks.append(Check("min_scaled_residual_ratio", min(ratios, default=math.inf), ">=",
                            p.get("min_ratio", 2.0)))
    return Outcome({"residuals": res, "scaled_residuals": scaled, "ratios": ratios}, checks,
                   ["eps1", "eps2", "residual", "residual_over_eps2"], rows)


# classical experiments

def _points(p: dict, sizes: dict, ctx) -> list:
    """Explicit ``points`` plus ``random_points`` drawn uniformly in [-scale, scale]."""
    pts = [{k: np.asarray(pt[k], dtype=float) for k in sizes} for pt in p.get("points", [])]
    if "random_points" in p:
        r = p["random_points"]
        seed = ctx.seed if ctx.seed is not None else int(r.get("seed", 0))
        rng = np.random.default_rng(seed)
        s = float(r.get("scale", 1.0))
        for _ in range(int(r.get("count", 20))):
            pts.append({k: rng.uniform(-s, s, size=n) for k, n in sizes.items()})
    if not pts:
        raise ValueError("no evaluation points given")
    return pts


def _residual_checks(p: dict, values: list) -> list:
    if "expected" in p:
        worst = max(abs(v - p["expected"]) for v in values)
        return [Check("max_abs_error_vs_expected", worst, "<=", p.get("tolerance", 1e-5))]
    return [Check("max_abs_residual", max(abs(v) for v in values), "<", p.get("tolerance", 1e-8))]


def _lagrangian_family(exprs: list, env: dict) -> consistency.LagrangianFamily:
    """Wrap expressions as ``L_i(qdot_i, q_i, t)``; ``env`` binds the other particles."""
    def make(i, e):
        def L(qdot_i, q_i, t):
            values = {**env, **bind("t", list(t)), f"qdot{i + 1}": qdot_i, f"q{i + 1}": q_i}
            return e(values)
        return L

    return consistency.LagrangianFamily(tuple(make(i, e) for i, e in enumerate(exprs)))


def run_lagrangian_residual(p: dict, ctx) -> Outcome:
    exprs = [Expression(s, p.get("constants")) for s in p["lagrangians"]]
    n = len(exprs)
    i, j = int(p.get("i", 1)), int(p.get("j", 2))
    vals = []
    for pt in _points(p, {"qdot": n, "q": n, "t": n}, ctx):
        fam = _lagrangian_family(exprs, {**bind("q", pt["q"]), **bind("qdot", pt["qdot"])})
        vals.append(consistency.lagrangian_curvature(fam, i, j, pt["qdot"], pt["q"],
                                                     TimePoint(pt["t"]),
                                                     float(p.get("fd_step", 1e-5))))
    rows = [[k, v] for k, v in enumerate(vals)]
    return Outcome({"residuals": vals}, _residual_checks(p, vals), ["point", "residual"], rows)


def run_poisson_residual(p: dict, ctx) -> Outcome:
    exprs = [Expression(s, p.get("constants")) for s in p["hamiltonians"]]
    dim = int(p.get("dimension", len(exprs)))

    def make(e):
        return lambda q, p_, t: e({**bind("q", q), **bind("p", p_), **bind("t", list(t))})

    fam = consistency.HamiltonianFamily(tuple(make(e) for e in exprs))
    i, j = int(p.get("i", 1)), int(p.get("j", 2))
    vals = []
    for pt in _points(p, {"q": dim, "p": dim, "t": len(exprs)}, ctx):
        vals.append(consistency.poisson_residual(fam, i, j, pt["q"], pt["p"], TimePoint(pt["t"]),
                                                 float(p.get("fd_step", 1e-5))))
    rows = [[k, v] for k, v in enumerate(vals)]
    return Outcome({"residuals": vals}, _residual_checks(p, vals), ["point", "residual"], rows)


def run_action_invariance(p: dict, ctx) -> Outcome:
    consts = p.get("constants")
    fam = _lagrangian_family([Expression(x, consts) for x in p["lagrangians"]], {})
    coords = [function_of(s, f"t{i + 1}", consts) for i, s in enumerate(p["coordinate_paths"])]
    if len(coords) != len(fam):
        raise ValueError("need one coordinate path per Lagrangian")
    start = TimePoint(p.get("start", [0.0] * len(fam)))
    paths = [StaircasePath.parse(s) for s in p["paths"]]
    ends = {tuple(timepaths.net_displacement(x, len(fam))) for x in paths}
    if len(ends) != 1:
        raise timepaths.PathError("action comparison needs paths with a shared end point")
    actions = []
    for path in paths:
        traj = consistency.staircase_trajectory(path, coords, start, int(p.get("samples_per_unit", 64)))
        actions.append(consistency.action_along_path(fam, traj))
    spread = max(actions) - min(actions)
    rows = [[str(x), a] for x, a in zip(paths, actions)]
    checks = [Check("max_action_spread", spread, "<=", p.get("tolerance", 1e-8))]
    return Outcome({"actions": actions, "spread": spread}, checks, ["path", "action"], rows)


def run_pathint_converge(p: dict, ctx) -> Outcome:
    mass = float(p.get("mass", 1.0))
    endpoints = p.get("endpoints", [1.0, 1.0, 0.0, 0.0])
    n_list = p.get("n_list", [2, 4, 8])
    quad = _quadrature(p.get("quadrature"))
    if "potential" in p:
        V = function_of(p["potential"], "q", p.get("constants"))
        reference = None
        force = None
    else:
        force = float(p.get("force", 0.0))
        V = None if force == 0 else (lambda q: -force * np.asarray(q))
        reference = pathint.reference_kernel(force, mass, *endpoints)
    table = pathint.convergence_study(V, mass, endpoints, n_list, reference,
                                      lambda n: pathint.SlicingSpec(n, quadrature=quad))
    rows = [list(r) for r in table]
    rel = [r[2] for r in table]
    checks = []
    ratios = [a / b for a, b in zip(rel, rel[1:]) if b > 0]
    if force == 0:
        checks.append(Check("max_rel_error", max(rel, default=0.0), "<=", p.get("tolerance", 1e-5)))
    elif table:
        lo, hi = p.get("ratio_range", [1.5, 2.5])
        checks.append(Check("min_error_ratio", min(ratios, default=math.nan), "in_range", None, [lo, hi]))
        checks.append(Check("max_error_ratio", max(ratios, default=math.nan), "in_range", None, [lo, hi]))
    return Outcome({"rel_errors": rel, "ratios": ratios}, checks,
                   ["n_slices", "abs_error", "rel_error"], rows)


RUNNERS: dict[str, Callable] = {
    "kernel-eval": run_kernel_eval,
    "compose-check": run_compose_check,
    "delta-limit": run_delta_limit,
    "staircase-invariance": run_staircase_invariance,
    "loop-check": run_loop_check,
    "interaction-discrepancy": run_interaction_discrepancy,
    "curvature": run_curvature,
    "holonomy": run_holonomy,
    "stokes": run_stokes,
    "lagrangian-residual": run_lagrangian_residual,
    "poisson-residual": run_poisson_residual,
    "action-invariance": run_action_invariance,
    "pathint-converge": run_pathint_converge,
}
