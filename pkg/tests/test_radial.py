"""Radial operators, products and the inverse kernel.

Closed-form values below were obtained symbolically (sympy) for the listed
profiles and frozen here.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kappaform import (
    DomainError,
    GridMismatchError,
    RadialFunction,
    RadialGrid,
    apply_tl,
    apply_tl_inverse,
    inner_angle,
    inner_plain,
    tl_inverse_kernel,
)
from kappaform.radial import fornberg_weights


def rf(grid, f):
    return RadialFunction.from_callable(grid, f)


def test_fornberg_recovers_central_second_difference():
    w = fornberg_weights(0.0, [-1.0, 0.0, 1.0], 2)
    np.testing.assert_allclose(w[2], [1.0, -2.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(w[1], [-0.5, 0.0, 0.5], atol=1e-14)


def test_grid_rejects_bad_parameters():
    with pytest.raises(ValueError):
        RadialGrid(n=10)
    with pytest.raises(ValueError):
        RadialGrid(r_min=0.0)
    with pytest.raises(ValueError):
        RadialGrid(order=7)


def test_grid_nodes_monotone_and_span(grid):
    r = grid.nodes
    assert r[0] == pytest.approx(1e-4, rel=1e-12)
    assert r[-1] == pytest.approx(40.0, rel=1e-12)
    assert np.all(np.diff(r) > 0)


@pytest.mark.parametrize(
    "f, exact",
    [
        (lambda r: r**2 * np.exp(-r), 2.0),
        (lambda r: np.exp(-(r**2)), math.sqrt(math.pi) / 2),
        (lambda r: r * np.exp(-2 * r), 0.25),
    ],
)
def test_integrate_known_moments(grid, f, exact):
    assert grid.integrate(f(grid.nodes)) == pytest.approx(exact, rel=1e-11)


def test_cumulative_matches_closed_form(grid):
    r = grid.nodes
    got = grid.cumulative(np.exp(-r))
    np.testing.assert_allclose(got, -np.expm1(-r), atol=1e-11)
    # with a power weight: int_0^r s^2 e^-s ds
    got2 = grid.cumulative(np.exp(-r), power=2)
    exact2 = 2 - np.exp(-r) * (r**2 + 2 * r + 2)
    np.testing.assert_allclose(got2, exact2, atol=1e-11)


def test_cumulative_tail_matches_closed_form(grid):
    r = grid.nodes
    got = grid.cumulative_tail(np.exp(-r))
    np.testing.assert_allclose(got, np.exp(-r) - np.exp(-grid.r_max), atol=1e-11)


def test_derivative_accuracy(grid):
    r = grid.nodes
    f = np.sin(r) * np.exp(-r / 4)
    d1 = (np.cos(r) - np.sin(r) / 4) * np.exp(-r / 4)
    np.testing.assert_allclose(grid.derivative(f), d1, atol=1e-8)


def test_endpoint_taylor_data(grid):
    u = rf(grid, lambda r: 2 * r + 3 * r**2 - r**3 * np.exp(-r))
    e = u.endpoint
    assert abs(e.u0) < 1e-10
    assert e.u1 == pytest.approx(2.0, rel=1e-8)
    assert e.u2 == pytest.approx(6.0, rel=1e-6)


def test_apply_tl_on_power_law(grid):
    # T_1 (r^2 e^-r) = (-2 + 4r - r^2 + 2) e^-r = (4r - r^2) e^-r
    u = rf(grid, lambda r: r**2 * np.exp(-r))
    t = apply_tl(1, u)
    exact = (4 * grid.nodes - grid.nodes**2) * np.exp(-grid.nodes)
    mask = grid.interior()
    np.testing.assert_allclose(t.values[mask], exact[mask], atol=1e-8)
    assert t.meta["accuracy_ok"]


def test_products_frozen_values(grid):
    u = rf(grid, lambda r: r**2 * np.exp(-r))
    assert inner_plain(u, u) == pytest.approx(0.75, rel=1e-10)
    assert inner_angle(1, u, u) == pytest.approx(0.75, rel=1e-9)
    tu = apply_tl(1, u)
    assert inner_plain(tu, tu) == pytest.approx(1.75, rel=1e-8)


def test_angle_product_gaussian_profile(grid):
    g = rf(grid, lambda r: r**3 * np.exp(-(r**2)))
    exact = 57 * math.sqrt(2 * math.pi) / 256
    assert inner_angle(1, g, g) == pytest.approx(exact, rel=1e-9)
    assert inner_plain(g, apply_tl(1, g)) == pytest.approx(exact, rel=1e-9)


def test_inner_angle_rejects_nonvanishing(grid):
    u = rf(grid, lambda r: np.exp(-r))
    with pytest.raises(DomainError):
        inner_angle(1, u, u)


def test_negative_l_rejected(grid):
    u = rf(grid, lambda r: r**2 * np.exp(-r))
    with pytest.raises(DomainError):
        apply_tl(-1, u)


def test_grid_mismatch(grid):
    other = RadialGrid(1024)
    u = rf(grid, lambda r: r**2 * np.exp(-r))
    v = rf(other, lambda r: r**2 * np.exp(-r))
    with pytest.raises(GridMismatchError):
        inner_plain(u, v)
    with pytest.raises(GridMismatchError):
        RadialFunction(grid, np.zeros(10))


def test_inverse_kernel_symmetric():
    r = np.linspace(0.1, 5, 7)
    for l in range(4):
        k = tl_inverse_kernel(l, r[:, None], r[None, :])
        np.testing.assert_allclose(k, k.T, rtol=0, atol=0)


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_inverse_then_forward(grid, l):
    f = rf(grid, lambda r: r ** (l + 1) * np.exp(-r))
    back = apply_tl(l, apply_tl_inverse(l, f))
    mask = grid.interior()
    err = np.linalg.norm((back.values - f.values)[mask]) / np.linalg.norm(f.values[mask])
    assert err < 1e-7


def test_inverse_exact_profile(grid):
    # T_1 u = (4r - r^2) e^-r for u = r^2 e^-r
    f = rf(grid, lambda r: (4 * r - r**2) * np.exp(-r))
    u = apply_tl_inverse(1, f)
    np.testing.assert_allclose(u.values, grid.nodes**2 * np.exp(-grid.nodes), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(0.5, 2.0),
    b=st.floats(0.5, 2.0),
    p=st.integers(1, 3),
    q=st.integers(1, 3),
)
def test_form_identity_and_symmetry(grid, a, b, p, q):
    u = rf(grid, lambda r: r ** (p + 1) * np.exp(-a * r))
    v = rf(grid, lambda r: r ** (q + 1) * np.exp(-b * r))
    lhs = inner_angle(1, u, v)
    assert lhs == pytest.approx(inner_angle(1, v, u), rel=1e-12)
    assert abs(lhs - inner_plain(u, apply_tl(1, v))) <= 1e-8 * max(1.0, abs(lhs))


@settings(max_examples=20, deadline=None)
@given(c=st.floats(-3, 3), d=st.floats(-3, 3))
def test_products_bilinear(grid, c, d):
    u = rf(grid, lambda r: r**2 * np.exp(-r))
    v = rf(grid, lambda r: r**3 * np.exp(-(r**2)))
    w = u.scaled(c) + v.scaled(d)
    expect = c * inner_plain(u, u) + d * inner_plain(v, u)
    assert inner_plain(w, u) == pytest.approx(expect, rel=1e-12, abs=1e-14)
