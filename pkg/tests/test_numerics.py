import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from retarded_bounds.numerics import (
    AnchoredIntegral, Grid, HermiteTable, InversionError, QuadratureError,
    cumulative, diverges_at_zero, integrate, invert_monotone, probe_image_sup, uniform_grid,
)


def test_grid_must_start_at_zero_and_increase():
    with pytest.raises(ValueError):
        Grid(np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        Grid(np.array([0.0, 0.5, 0.5]))
    g = uniform_grid(2.0, 5)
    assert g.size == 5 and g.spacing == pytest.approx(0.5)


@pytest.mark.parametrize("h,a,b,expected", [
    (lambda s: 1.0, 0.0, 1.0, 1.0),
    (lambda s: s * s, 0.0, 1.0, 1.0 / 3.0),
    (np.sin, 0.0, math.pi, 2.0),
    (lambda s: 1.0 / np.sqrt(s), 0.0, 1.0, 2.0),  # singular left end
])
def test_integrate_examples(h, a, b, expected):
    assert integrate(h, a, b) == pytest.approx(expected, abs=1e-10 * (1 + expected))


def test_integrate_rejects_interior_blowup():
    with pytest.raises(QuadratureError):
        integrate(lambda s: 1.0 / (s - 0.5), 0.0, 1.0)


def test_cumulative_examples():
    np.testing.assert_allclose(cumulative(lambda s: 1.0, uniform_grid(1.0, 5)), [0, 0.25, 0.5, 0.75, 1.0], atol=1e-14)
    np.testing.assert_allclose(cumulative(lambda s: s, np.array([0.0, 1.0, 2.0])), [0, 0.5, 2.0], atol=1e-13)
    assert np.all(cumulative(lambda s: 0.0, uniform_grid(1.0, 7)) == 0.0)


@given(st.floats(0.1, 5.0), st.integers(2, 30))
def test_cumulative_end_matches_integrate(k, n):
    h = lambda s: np.exp(k * s) / (1 + s)  # noqa: E731
    grid = uniform_grid(1.0, n)
    tol = 1e-10
    run = cumulative(h, grid, tol)
    assert np.all(np.diff(run) >= 0)
    whole = integrate(h, 0.0, 1.0, tol)
    assert abs(run[-1] - whole) <= 2 * tol * (1 + abs(whole))


@pytest.mark.parametrize("F,y,x_lo,expected", [
    (np.exp, 1.0, 0.0, 0.0),
    (lambda x: x**3, 8.0, 0.0, 2.0),
    (lambda x: x**3, 1e-30, 0.0, 1e-10),
    (np.log1p, 50.0, 0.0, math.expm1(50.0)),
])
def test_invert_examples(F, y, x_lo, expected):
    assert invert_monotone(F, y, x_lo) == pytest.approx(expected, rel=1e-10, abs=1e-300)


def test_invert_refuses_targets_above_sup():
    with pytest.raises(InversionError):
        invert_monotone(lambda x: 1 - np.exp(-x), 2.0, 0.0, sup=1.0)
    with pytest.raises(InversionError):
        invert_monotone(lambda x: 1 - np.exp(-x), 2.0, 0.0)
    out = invert_monotone(lambda x: 1 - np.exp(-x), np.array([0.5, 2.0]), 0.0, on_error="nan")
    assert out[0] == pytest.approx(math.log(2.0)) and math.isnan(out[1])


monotone_family = st.tuples(st.floats(0.01, 10), st.floats(0, 5), st.floats(0.5, 3))


@given(monotone_family, st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=20))
def test_inversion_round_trip(params, ys):
    a, b, p = params
    F = lambda x: a * x + b * np.power(x, p)  # noqa: E731
    y = np.array(ys)
    x = invert_monotone(F, y, 0.0)
    assert np.all(np.abs(F(x) - y) <= 1e-9 * (1 + np.abs(y)))


def test_probe_examples():
    assert not probe_image_sup(lambda x: x, 1.0).bounded
    sat = probe_image_sup(lambda x: 1 - np.exp(-x), 1.0)
    assert sat.bounded and sat.sup_estimate == pytest.approx(1.0, abs=1e-9)
    const = probe_image_sup(lambda x: np.full(np.shape(x), 3.0), 1.0)
    assert const.bounded and const.sup_estimate == 3.0
    # the cap is never below the last probed value
    assert sat.sup_estimate >= sat.probe_points[-1, 1]


def test_probe_flags_non_finite_values():
    probe = probe_image_sup(lambda x: np.where(x < 100, x, np.inf), 1.0)
    assert probe.bounded and probe.flagged and probe.sup_estimate >= 64.0


@pytest.mark.parametrize("h,expected", [
    (lambda s: 1.0 / s, True),
    (lambda s: 0.5 / np.sqrt(s), False),
    (lambda s: 1.0, False),
    (lambda s: 1.0 / s**2, True),
])
def test_divergence_examples(h, expected):
    assert diverges_at_zero(h) is expected


def test_hermite_table_is_monotone_and_inverts():
    x = np.linspace(0, 3, 13)
    table = HermiteTable(x, x**3, 3 * x**2)
    fine = np.linspace(0, 3, 400)
    assert np.all(np.diff(table(fine)) >= 0)
    np.testing.assert_allclose(table.inverse(table(fine)), fine, atol=1e-9)


def test_anchored_integral_matches_log():
    tab = AnchoredIntegral(lambda s: 1.0 / s, 1.0, 1.0, k_min=-20, k_max=20)
    xs = np.array([1.0, 1.3, 2.0, 10.0, 1000.0])
    np.testing.assert_allclose(tab(xs), np.log(xs), atol=1e-9)
    np.testing.assert_allclose(tab.inverse(tab(xs)), xs, rtol=1e-11)
    assert np.isnan(tab(0.5))


def test_operations_are_deterministic():
    h = lambda s: np.sqrt(1 + s**3)  # noqa: E731
    assert integrate(h, 0, 2) == integrate(h, 0, 2)
    y = np.linspace(1.1, 5, 50)
    assert np.array_equal(invert_monotone(h, y), invert_monotone(h, y))
