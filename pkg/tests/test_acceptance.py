"""One test per acceptance criterion; each records a PASS/FAIL line.

Run under pytest (lines appear in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""

import itertools
import math
import time

import numpy as np

from retarded_bounds.bounds import bound_curve, build_tables, compute_tau
from retarded_bounds.corollaries import log_case_G_inverse, log_case_instance, sun_thm21_bound
from retarded_bounds.numerics import integrate, invert_monotone, uniform_grid
from retarded_bounds.oracle import FAMILIES, check_dominance, generate_random_instance, solve_equality
from retarded_bounds.presets import LIPOVAN, get_preset
from retarded_bounds.problem import Theorem

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # running as a script from elsewhere
    ACCEPTANCE_LINES = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def rel(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_gronwall():
    inst = get_preset("gronwall").instance
    tables = build_tables(inst)
    grid = uniform_grid(inst.t_max, 2001)
    curve = bound_curve(inst, tables, grid)
    sol = solve_equality(inst, grid)
    err_bound = rel(curve.values[-1], math.e)
    err_oracle = rel(sol.u[-1], curve.values[-1])
    tau = compute_tau(inst, tables)
    ok = err_bound <= 1e-6 and err_oracle <= 1e-5 and tau == inst.t_max
    record(1, "gronwall", ok, f"bound rel err {err_bound:.1e} <= 1e-6, oracle rel err "
                              f"{err_oracle:.1e} <= 1e-5, tau = {tau:g} = t_max")


def test_criterion_2_blowup():
    inst = get_preset("blowup").instance
    tables = build_tables(inst)
    grid = uniform_grid(1.0, 5)
    curve = bound_curve(inst, tables, grid)
    errs = [rel(curve.values[i], 1 / (1 - grid.nodes[i])) for i in (1, 2, 3)]
    tau = compute_tau(inst, tables)
    past = inst.with_(t_max=1.5)
    late = bound_curve(past, build_tables(past), uniform_grid(1.5, 7))
    edge_fails = not late.in_domain[late.grid.nodes >= 1.0].any()
    ok = max(errs) <= 1e-6 and abs(tau - 1.0) <= 1e-4 and edge_fails
    record(2, "blowup", ok, f"max rel err {max(errs):.1e} <= 1e-6, |tau - 1| = {abs(tau - 1):.1e} <= 1e-4, "
                            f"predicate fails for t >= 1: {edge_fails}")


def test_criterion_3_lipovan():
    closed = sun_thm21_bound(LIPOVAN, "1", "0", "1", "t/2", 1.0)
    inst = get_preset("lipovan").instance
    curve = bound_curve(inst, build_tables(inst), uniform_grid(1.0, 3))
    engine = float(curve.values[-1])
    e1, e2 = abs(closed - 1.5), rel(engine, closed)
    record(3, "lipovan", e1 <= 1e-9 and e2 <= 1e-6,
           f"|closed - 1.5| = {e1:.1e} <= 1e-9, engine rel diff {e2:.1e} <= 1e-6")


def _needs_positive_x0(count):
    out, seed = [], 0
    while len(out) < count:
        inst = generate_random_instance(seed, ("gronwall-like", "log-eta")[seed % 2])
        if inst.g_diverges_at_base:
            out.append(inst)
        seed += 1
    return out


def test_criterion_4_x0_x1_invariance():
    grid = uniform_grid(1.0, 41)
    worst = 0.0
    for inst in _needs_positive_x0(20):
        c0 = inst.c0
        curves = []
        for x0, x1 in itertools.product((c0 / 4, c0 / 2), (0.5, 1.0, 2.0)):
            moved = inst.with_(x0=x0, x1=x1)
            curves.append(bound_curve(moved, build_tables(moved), grid))
        ref = curves[0]
        for other in curves[1:]:
            both = ref.in_domain & other.in_domain
            d = np.abs(other.values[both] - ref.values[both]) / np.abs(ref.values[both])
            worst = max(worst, float(d.max(initial=0.0)))
    record(4, "x0/x1 invariance", worst <= 1e-5, f"20 instances, max pairwise rel diff {worst:.1e} <= 1e-5")


def test_criterion_5_dominance():
    violations, worst = 0, -math.inf
    for seed in range(50):
        inst = generate_random_instance(seed, FAMILIES[seed % len(FAMILIES)])
        grid = uniform_grid(inst.t_max, 2001)
        curve = bound_curve(inst, build_tables(inst), grid)
        report = check_dominance(solve_equality(inst, grid), curve, horizon_fraction=0.9)
        violations += not report.passed
        worst = max(worst, report.max_violation)
    record(5, "dominance", violations == 0,
           f"50 instances, {violations} violations, worst excess over slack {worst:.1e} <= 0")


def test_criterion_6_theorem_coherence():
    grid = uniform_grid(1.0, 41)
    worst = 0.0
    for seed in range(20):
        inst = generate_random_instance(seed, FAMILIES[seed % len(FAMILIES)]).with_(g="0")
        tables = build_tables(inst)
        one = bound_curve(inst, tables, grid, theorem_form=Theorem.ONE)
        two = bound_curve(inst, tables, grid, theorem_form=Theorem.TWO)
        both = one.in_domain & two.in_domain
        d = np.abs(one.values[both] - two.values[both]) / np.abs(two.values[both])
        worst = max(worst, float(d.max(initial=0.0)))
    record(6, "theorem coherence", worst <= 1e-6, f"20 instances, max rel diff {worst:.1e} <= 1e-6")


def test_criterion_7_log_round_trip():
    tables = build_tables(log_case_instance(3.0, "1", "1", "t", 1.0, 1.0))
    xs = [0.0, 0.25, 0.5, 1.0, 2.0]
    err = max(abs(float(tables.G(log_case_G_inverse(x, 1.0))) - x) for x in xs)
    at0 = abs(log_case_G_inverse(0.0, 1.0) - 1.0)
    record(7, "log round trip", err <= 1e-8 and at0 <= 1e-12,
           f"max |G(G^-1(x)) - x| = {err:.1e} <= 1e-8, |G^-1(0) - x0| = {at0:.1e} <= 1e-12")


def test_criterion_8_numerics_kernels():
    rng = np.random.default_rng(8)
    worst = 0.0
    # 10 random increasing functions x -> a x^p + b x + e^(k x) - 1, 100 targets each
    for _ in range(10):
        a, p, b, k = rng.uniform(0.1, 3), rng.uniform(0.5, 4), rng.uniform(0, 2), rng.uniform(0, 1)
        F = lambda x, a=a, p=p, b=b, k=k: a * np.power(x, p) + b * x + np.expm1(k * x)  # noqa: E731
        x_true = rng.uniform(1e-3, 20.0, 100)
        x = invert_monotone(F, F(x_true))
        worst = max(worst, float(np.max(np.abs(x - x_true) / x_true)))
    quad = abs(integrate(np.sin, 0.0, math.pi) - 2.0)
    record(8, "numerics kernels", worst <= 1e-9 and quad <= 1e-10,
           f"1000 targets, max inversion rel err {worst:.1e} <= 1e-9, |int sin - 2| = {quad:.1e} <= 1e-10")


if __name__ == "__main__":
    start = time.perf_counter()
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion"):
            try:
                fn()
            except AssertionError:
                failed += 1
    print(f"{8 - failed}/8 criteria passed in {time.perf_counter() - start:.1f} s")
    raise SystemExit(1 if failed else 0)
