import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kappaform import (
    AngularQuadrature,
    DomainError,
    GridMismatchError,
    LongitudinalField,
    RadialFunction,
    RadialGrid,
    SampledVectorField,
    TransversalityError,
    TransverseField,
    decompose,
    divergence_residual,
    make_singular_test_field,
    project_transverse,
    read_field,
    reconstruct,
    sample_longitudinal,
    write_field,
)
from kappaform.fieldops import FIELD_HEADER, gradient_density, origin_slopes, singular_test_modes


def _toroidal(x):
    # curl(psi(r) e_z) with psi = exp(-r^2): -psi'(r)/r (y, -x, 0) ... sign folded in
    r2 = np.sum(x**2, axis=-1)
    g = -2 * np.exp(-r2)
    return np.stack([g * x[..., 1], -g * x[..., 0], 0 * r2], axis=-1)


def _gradient(x):
    # grad(z exp(-r^2))
    r2 = np.sum(x**2, axis=-1)
    e = np.exp(-r2)
    z = x[..., 2]
    return np.stack([-2 * x[..., 0] * z * e, -2 * x[..., 1] * z * e, (1 - 2 * z**2) * e], axis=-1)


def test_cartesian_toroidal_field(grid, quad4):
    f = SampledVectorField.from_callable(grid, quad4, _toroidal)
    assert divergence_residual(f) < 1e-10
    tf = decompose(f, 4)
    r = grid.nodes
    u, w = tf.mode(1, 0)
    # A = -sin(theta) psi' phihat and Phi_10 = -sqrt(3/(8 pi)) sin(theta) phihat
    expect = -2 * math.sqrt(8 * math.pi / 3) * r**2 * np.exp(-(r**2))
    np.testing.assert_allclose(w.values, expect, atol=1e-12)
    assert np.max(np.abs(u.values)) < 1e-12
    for key, (uu, ww) in tf.modes.items():
        if key != (1, 0):
            assert np.max(np.abs(uu.values)) < 1e-12 and np.max(np.abs(ww.values)) < 1e-12


def test_cartesian_gradient_is_annihilated(grid, quad4):
    f = SampledVectorField.from_callable(grid, quad4, _gradient)
    assert divergence_residual(f) > 0.1
    with pytest.raises(TransversalityError):
        decompose(f, 4)
    tf = decompose(f, 4, check=False)
    scale = np.max(np.abs(f.values))
    worst = max(max(np.max(np.abs(u.values)), np.max(np.abs(w.values))) for u, w in tf.modes.values())
    assert worst < 1e-8 * scale


def _random_tf(grid, rng, l_max=4, n_modes=4):
    modes = {}
    for _ in range(n_modes):
        l = int(rng.integers(1, l_max + 1))
        m = int(rng.integers(-l, l + 1))
        a, b = rng.uniform(1.2, 2.0, 2)
        cu, cw = rng.normal(size=2) + 1j * rng.normal(size=2)
        # profiles vanish like r^(l+1) so every mode is regular at the origin
        u = RadialFunction.from_callable(grid, lambda r: cu * r ** (l + 1) * np.exp(-a * r))
        w = RadialFunction.from_callable(grid, lambda r: cw * r ** (l + 1) * np.exp(-b * r**2))
        modes[(l, m)] = (u, w)
    return TransverseField(grid, l_max, modes)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_round_trip_and_transversality(grid, quad4, seed):
    tf = _random_tf(grid, np.random.default_rng(seed))
    f = reconstruct(tf, quad4)
    assert not f.singular
    assert divergence_residual(f) < 1e-6
    back = decompose(f, 4)
    scale = max(np.max(np.abs(u.values)) for u, _ in tf.modes.values())
    assert back.max_abs_diff(tf) < 1e-8 * scale


def test_projector_idempotent_and_kills_gradients(grid, quad4, rng):
    tf = _random_tf(grid, rng)
    lf = LongitudinalField(grid, {(2, 1): RadialFunction.from_callable(grid, lambda r: r**2 * np.exp(-(r**2)))})
    a = reconstruct(tf, quad4)
    f = a + sample_longitudinal(lf, quad4)
    p1 = project_transverse(f)
    p2 = project_transverse(p1)
    assert (p2 - p1).norm() / p1.norm() < 1e-8
    assert (p1 - a).norm() / a.norm() < 1e-8


def test_singular_field_is_tagged_and_transverse(grid, quad4):
    f = make_singular_test_field(grid, [0.3, -0.4, 1.0], lambda r: r * np.exp(-r), quad4)
    assert f.singular
    assert np.max(np.abs(f.values.imag)) < 1e-15 * np.max(np.abs(f.values))
    assert divergence_residual(f) < 1e-6
    tf = decompose(f, 4)
    slopes = origin_slopes(tf)
    assert max(slopes.values()) > 0.1


def test_singular_modes_pattern(grid):
    # sum_m c_m Y_1m = d . xhat
    from kappaform import ylm

    d = np.array([0.2, -0.7, 0.5])
    tf = singular_test_modes(grid, d, lambda r: r * np.exp(-r))
    th, ph = 1.1, 2.3
    n = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
    i = 100
    u0 = tf.modes[(1, 0)][0].values[i] / (math.sqrt(4 * math.pi / 3) * d[2])
    total = sum(tf.modes[(1, m)][0].values[i] * ylm(1, m, th, ph) for m in (-1, 0, 1))
    assert total / u0 == pytest.approx(d @ n, abs=1e-13)


def test_gradient_density_matches_mode_formula(grid, quad4, rng):
    from kappaform.quadform import mode_density

    tf = _random_tf(grid, rng, l_max=3)
    f = reconstruct(tf, AngularQuadrature.for_degree(3))
    a = gradient_density(f)
    b = mode_density(tf)
    mask = grid.interior()
    assert np.max(np.abs(a - b)[mask]) < 1e-7 * np.max(b)


def test_zero_field(grid, quad4):
    f = SampledVectorField.zeros(grid, quad4)
    assert divergence_residual(f) == 0.0
    tf = decompose(f, 4)
    assert tf.pruned().modes == {}


def test_decompose_rejects_unresolved_degree(grid):
    f = SampledVectorField.zeros(grid, AngularQuadrature.for_degree(2))
    with pytest.raises(DomainError):
        decompose(f, 3)


def test_shape_and_finite_checks(grid, quad4):
    with pytest.raises(GridMismatchError):
        SampledVectorField(grid, quad4, np.zeros((grid.n, quad4.size, 2)))
    bad = np.zeros((grid.n, quad4.size, 3))
    bad[3, 2, 1] = np.nan
    with pytest.raises(DomainError):
        SampledVectorField(grid, quad4, bad)
    with pytest.raises(DomainError):
        TransverseField(grid, 2, {(3, 0): (RadialFunction.zeros(grid), RadialFunction.zeros(grid))})
    other = SampledVectorField.zeros(grid, AngularQuadrature.for_degree(3))
    with pytest.raises(GridMismatchError):
        SampledVectorField.zeros(grid, quad4) + other


@pytest.fixture(scope="module")
def small():
    return RadialGrid(256, r_max=12.0), AngularQuadrature.for_degree(2)


@pytest.mark.parametrize("convention", ["colatitude", "latitude"])
def test_field_file_round_trip(tmp_path, small, convention):
    grid, quad = small
    f = make_singular_test_field(grid, [1.0, 0.0, 0.5], lambda r: r * np.exp(-r), quad)
    path = tmp_path / "f.txt"
    write_field(path, f, convention)
    assert path.read_text().splitlines()[0].split() == FIELD_HEADER.split()
    g = read_field(path, grid, quad, convention)
    # 17 significant digits reproduce the real samples exactly
    assert np.array_equal(g.values, f.values.real.astype(complex))
    write_field(tmp_path / "g.txt", g, convention)
    assert (tmp_path / "g.txt").read_bytes() == path.read_bytes()


def test_field_file_errors(tmp_path, small):
    grid, quad = small
    f = make_singular_test_field(grid, [0, 0, 1], lambda r: r * np.exp(-r), quad)
    path = tmp_path / "f.txt"
    write_field(path, f)
    with pytest.raises(GridMismatchError):
        read_field(path, RadialGrid(256, r_max=11.0), quad)
    with pytest.raises(GridMismatchError):
        read_field(path, grid, AngularQuadrature.for_degree(3))
    with pytest.raises(GridMismatchError):
        read_field(path, grid, AngularQuadrature.gauss(4, 8))
    bad = tmp_path / "bad.txt"
    bad.write_text("# x y z\n1 2 3\n")
    with pytest.raises(DomainError):
        read_field(bad, grid, quad)
    with pytest.raises(DomainError):
        write_field(tmp_path / "c.txt", f.scaled(1j))


@settings(max_examples=10, deadline=None)
@given(c=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_reconstruct_is_linear(small, c):
    grid, quad = small
    u = RadialFunction.from_callable(grid, lambda r: r**2 * np.exp(-r))
    w = RadialFunction.from_callable(grid, lambda r: r**3 * np.exp(-r))
    a = TransverseField.single(grid, 2, 1, u, w)
    b = TransverseField.single(grid, 2, 1, u.scaled(c), w.scaled(c))
    fa, fb = reconstruct(a, quad), reconstruct(b, quad)
    np.testing.assert_allclose(fb.values, c * fa.values, atol=1e-12 * (1 + abs(c)))
