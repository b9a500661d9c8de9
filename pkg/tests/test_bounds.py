import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from retarded_bounds.bounds import (
    HorizonError, TauSearch, bound_curve, bound_thm1, bound_thm2, build_tables, compute_tau,
    f_integral, horizon, p_eval, psi_argument, remark_tau,
)
from retarded_bounds.numerics import uniform_grid
from retarded_bounds.problem import InstanceError, ProblemInstance, Theorem

GRONWALL = dict(phi="x", c="1", eta="x", w="1", alpha="t", f="1", g="0")
BLOWUP = {**GRONWALL, "w": "x"}


def make(**kw):
    return ProblemInstance.from_strings(**kw)


def test_G_power_case():
    tables = build_tables(make(phi="x^2", eta="2*x", c="5", x0=0.0))
    assert tables.G(4.0) == pytest.approx(2.0, abs=1e-9)
    assert tables.G(0.0) == 0.0


def test_G_logarithmic():
    tables = build_tables(make(**{**GRONWALL, "c": "3"}, x0=1.0))
    assert tables.G(math.e) == pytest.approx(1.0, abs=1e-9)
    assert tables.G_inv(1.0) == pytest.approx(math.e, rel=1e-9)


def test_Psi_constant_integrand():
    tables = build_tables(make(phi="x", eta="1", w="1", c="1", x1=1.0, x0=0.0))
    assert tables.Psi(3.0) == pytest.approx(2.0, abs=1e-9)
    assert tables.Psi(1.0) == pytest.approx(0.0, abs=1e-12)
    assert tables.Psi_inv(2.0) == pytest.approx(3.0, abs=1e-9)


@pytest.mark.parametrize("x0", [0.0, 1.0, 1.5])
def test_inadmissible_x0_raises(x0):
    with pytest.raises(InstanceError):
        build_tables(make(**GRONWALL, x0=x0))


def test_p_eval_examples():
    inst = make(**{**GRONWALL, "g": "1"}, x0=math.exp(-1))
    tables = build_tables(inst)
    assert p_eval(inst, tables, 1.0) == pytest.approx(2.0, abs=1e-9)
    assert p_eval(inst, tables, 0.0) == pytest.approx(tables.G(1.0), abs=1e-12)
    plain = make(**GRONWALL, x0=0.25)
    t_plain = build_tables(plain)
    assert p_eval(plain, t_plain, 0.7) == pytest.approx(t_plain.G(1.0), abs=1e-12)


@pytest.mark.parametrize("f,alpha,t,expected", [
    ("0", "t", 1.0, 0.0),
    ("1", "t/2", 1.0, 0.5),
    ("t*s", "t", 2.0, 4.0),
    ("1", "t", 0.0, 0.0),
])
def test_f_integral_examples(f, alpha, t, expected):
    inst = make(**{**GRONWALL, "f": f, "alpha": alpha}, t_max=2.0)
    assert f_integral(inst, t) == pytest.approx(expected, abs=1e-10)


def test_tau_unbounded_psi_is_t_max():
    inst = make(**GRONWALL, t_max=3.0)
    tables = build_tables(inst)
    assert not tables.psi_image.bounded
    assert horizon(inst, tables) == (3.0, True)


def test_tau_without_f_is_t_max():
    inst = make(**{**BLOWUP, "f": "0"})
    tables = build_tables(inst)
    assert tables.psi_image.bounded
    assert compute_tau(inst, tables) == 1.0


def test_tau_of_blowup_instance():
    inst = make(**BLOWUP, t_max=1.5)
    tables = build_tables(inst)
    assert tables.M == pytest.approx(2 * math.exp(-1) * 1.0, rel=1e-9)
    tau = compute_tau(inst, tables)
    assert tau == pytest.approx(1.0, abs=1e-6)
    assert tau < 1.0
    assert remark_tau(inst, tables, TauSearch(delta=0.9)) == 0.9
    assert remark_tau(inst, tables, TauSearch(delta=1.2)) == pytest.approx(1.0, abs=1e-6)


def test_remark_tau_rejects_exhausted_budget():
    inst = make(**{**BLOWUP, "g": "1e9", "f": "0.1"}, t_max=3.0)
    tables = build_tables(inst)
    with pytest.raises(HorizonError):
        remark_tau(inst, tables, TauSearch(delta=2.9))


def test_tau_search_validates():
    with pytest.raises(ValueError):
        TauSearch(tol=0.0)
    with pytest.raises(ValueError):
        TauSearch(safety_margin=1.0)


def test_gronwall_bound():
    inst = make(**GRONWALL)
    curve = bound_thm1(inst, build_tables(inst), uniform_grid(1.0, 11))
    np.testing.assert_allclose(curve.values, np.exp(curve.grid.nodes), rtol=1e-9)
    assert curve.tau == 1.0 and curve.tau_capped


def test_blowup_bound_and_domain_edge():
    inst = make(**BLOWUP)
    curve = bound_thm1(inst, build_tables(inst), uniform_grid(1.0, 5))
    np.testing.assert_allclose(curve.values[:4], 1 / (1 - curve.grid.nodes[:4]), rtol=1e-9)
    assert not curve.in_domain[-1] and math.isnan(curve.values[-1])


def test_trivial_data_gives_phi_inverse_of_c():
    inst = make(phi="x^3", c="1+t", eta="x", w="1+x", alpha="t", f="0", g="0", t_max=2.0)
    tables = build_tables(inst)
    for form in (Theorem.ONE, Theorem.TWO):
        curve = bound_curve(inst, tables, uniform_grid(2.0, 9), theorem_form=form)
        np.testing.assert_allclose(curve.values, (1 + curve.grid.nodes) ** (1 / 3), rtol=1e-9)


def test_second_form_gronwall_in_g():
    inst = make(**{**GRONWALL, "f": "0", "g": "1", "alpha": "t/2"}, theorem=2)
    curve = bound_thm2(inst, build_tables(inst), uniform_grid(1.0, 3))
    assert curve.values[-1] == pytest.approx(math.e, rel=1e-9)


def test_psi_argument_forms_differ_only_through_g():
    inst = make(**{**GRONWALL, "g": "0.5"}, x0=0.5)
    tables = build_tables(inst)
    one = psi_argument(inst, tables, 0.8, Theorem.ONE)
    two = psi_argument(inst, tables, 0.8, Theorem.TWO)
    assert one != two
    zero_g = inst.with_(g="0")
    assert psi_argument(zero_g, tables, 0.8, Theorem.ONE) == pytest.approx(
        psi_argument(zero_g, tables, 0.8, Theorem.TWO), abs=1e-12)


# -- invariants --------------------------------------------------------------

coef = st.floats(0.1, 1.5)


@st.composite
def instances(draw):
    kind = draw(st.sampled_from(["gronwall", "power", "sat"]))
    f = f"{draw(coef):.4f}+{draw(coef):.4f}*s"
    g = f"{draw(coef) / 3:.4f}"
    c = f"{1 + draw(coef):.4f}+{draw(coef) / 2:.4f}*t"
    alpha = draw(st.sampled_from(["t", "t/2", "t^2/(1+t)", "0.7*t"]))
    if kind == "gronwall":
        return make(phi="x", c=c, eta="x", w="1", alpha=alpha, f=f, g=g)
    if kind == "power":
        return make(phi="x^2", c=c, eta="2*x", w="1+0.3*x", alpha=alpha, f=f, g=g)
    return make(phi="x", c=c, eta="x+0.1*x^2", w="sqrt(1+x)", alpha=alpha, f=f, g=g)


@settings(max_examples=15)
@given(instances())
def test_bound_starts_at_phi_inverse_c0_and_is_nondecreasing(inst):
    curve = bound_curve(inst, build_tables(inst), uniform_grid(1.0, 21))
    assert curve.values[0] == pytest.approx(float(inst.phi_inv(inst.c0)), rel=1e-12)
    v = curve.values[curve.in_domain]
    assert np.all(np.diff(v) >= -1e-12 * v[1:])
    assert np.all(v > 0)


@settings(max_examples=10)
@given(instances(), st.sampled_from([0.25, 0.75]), st.sampled_from([0.5, 2.0]))
def test_x0_and_x1_do_not_change_the_bound(inst, frac, x1):
    grid = uniform_grid(1.0, 11)
    ref = bound_curve(inst, build_tables(inst), grid)
    moved = inst.with_(x0=frac * inst.c0, x1=x1)
    other = bound_curve(moved, build_tables(moved), grid)
    both = ref.in_domain & other.in_domain
    np.testing.assert_allclose(other.values[both], ref.values[both], rtol=1e-5)


@settings(max_examples=10)
@given(instances(), st.floats(1.05, 2.0))
def test_larger_data_never_lowers_the_bound(inst, factor):
    grid = uniform_grid(1.0, 11)
    base = bound_curve(inst, build_tables(inst), grid)
    for bigger in (inst.with_(c=f"{factor}*({inst.c.text})"),
                   inst.with_(f=f"{factor}*({inst.f.text})"),
                   inst.with_(g=f"{factor}*({inst.g.text})")):
        curve = bound_curve(bigger, build_tables(bigger), grid)
        both = base.in_domain & curve.in_domain
        assert np.all(curve.values[both] >= base.values[both] * (1 - 1e-9))


def test_first_failed_node_is_within_one_spacing_of_tau():
    inst = make(**{**BLOWUP, "f": "1.3"}, t_max=1.0)
    tables = build_tables(inst)
    grid = uniform_grid(1.0, 41)
    curve = bound_thm1(inst, tables, grid)
    first_bad = grid.nodes[np.argmin(curve.in_domain)]
    assert abs(first_bad - curve.tau) <= grid.spacing
    assert curve.tau == pytest.approx(1 / 1.3, abs=1e-6)
