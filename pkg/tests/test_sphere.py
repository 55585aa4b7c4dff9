import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kappaform import (
    AngularPoint,
    AngularQuadrature,
    SphericalIndex,
    SphericalIndexError,
    VshKind,
    angular_laplacian_action,
    angular_laplacian_matrix,
    eval_vsh,
    eval_ylm,
    vsh,
    vsh_gram,
    ylm,
)
from kappaform.sphere import angular_laplacian_fd, cartesian_to_angles, colatitude, from_colatitude, unit_vector

THETA = np.array([1e-9, 0.4, 1.3, 2.2, math.pi - 1e-9, 0.0, math.pi])
PHI = np.array([0.1, 2.0, 3.5, 5.9, 1.0, 0.0, 4.0])


def test_low_degree_closed_forms():
    th, ph = 0.7, 1.9
    assert ylm(0, 0, th, ph) == pytest.approx(1 / math.sqrt(4 * math.pi))
    assert ylm(1, 0, th, ph) == pytest.approx(math.sqrt(3 / (4 * math.pi)) * math.cos(th))
    # Condon-Shortley sign on m = 1
    y11 = -math.sqrt(3 / (8 * math.pi)) * math.sin(th) * complex(math.cos(ph), math.sin(ph))
    assert ylm(1, 1, th, ph) == pytest.approx(y11)
    assert ylm(2, 5, th, ph) == 0


@pytest.mark.parametrize("l", range(5))
def test_conjugation_symmetry(l):
    for m in range(-l, l + 1):
        np.testing.assert_allclose(
            ylm(l, -m, THETA, PHI), (-1) ** m * np.conj(ylm(l, m, THETA, PHI)), atol=1e-14
        )


def test_index_validation():
    with pytest.raises(SphericalIndexError):
        SphericalIndex(-1, 0)
    with pytest.raises(SphericalIndexError):
        SphericalIndex(2, 3)
    with pytest.raises(SphericalIndexError):
        vsh(VshKind.PSI, 0, 0, 0.3, 0.2)
    assert SphericalIndex(3, -2).lt == pytest.approx(math.sqrt(12))


def _grad_fd(l, m, theta, phi, h=1e-5):
    """Surface gradient of Y_lm from central differences of Y(x/|x|)."""
    x0 = unit_vector(theta, phi)
    g = np.zeros(x0.shape, dtype=complex)
    for axis in range(3):
        xp, xm = x0.copy(), x0.copy()
        xp[..., axis] += h
        xm[..., axis] -= h
        g[..., axis] = (ylm(l, m, *cartesian_to_angles(xp)) - ylm(l, m, *cartesian_to_angles(xm))) / (2 * h)
    return g


@pytest.mark.parametrize("l, m", [(1, 0), (1, 1), (2, -1), (3, 2), (4, -4)])
def test_psi_phi_against_difference_gradient(l, m):
    th, ph = np.array([0.5, 1.4, 2.6]), np.array([0.3, 4.0, 2.2])
    lt = math.sqrt(l * (l + 1))
    psi = _grad_fd(l, m, th, ph) / lt
    np.testing.assert_allclose(vsh(VshKind.PSI, l, m, th, ph), psi, atol=1e-8)
    phi_expect = np.cross(unit_vector(th, ph), psi)
    np.testing.assert_allclose(vsh(VshKind.PHI, l, m, th, ph), phi_expect, atol=1e-8)


@pytest.mark.parametrize("l", [1, 2, 5])
def test_vsh_finite_at_poles(l):
    for m in range(-l, l + 1):
        for kind in VshKind:
            v = vsh(kind, l, m, np.array([0.0, math.pi]), np.array([0.7, 0.7]))
            assert np.all(np.isfinite(v))
            near = vsh(kind, l, m, np.array([1e-7, math.pi - 1e-7]), np.array([0.7, 0.7]))
            np.testing.assert_allclose(v, near, atol=1e-5)


def test_vsh_tangency_and_radiality():
    th, ph = np.linspace(0.1, 3.0, 6), np.linspace(0.0, 6.0, 6)
    n = unit_vector(th, ph)
    for l in range(1, 4):
        for m in range(-l, l + 1):
            assert np.max(np.abs(np.sum(vsh("Psi", l, m, th, ph) * n, -1))) < 1e-14
            assert np.max(np.abs(np.sum(vsh("Phi", l, m, th, ph) * n, -1))) < 1e-14


@pytest.mark.parametrize("l_max", [0, 1, 3, 6])
def test_gram_identity(l_max):
    quad = AngularQuadrature.for_degree(l_max)
    g = vsh_gram(l_max, quad)
    assert np.max(np.abs(g - np.eye(len(g)))) < 1e-12


def test_gram_size_counts_all_kinds():
    # 3 (l_max + 1)^2 - 2 harmonics: Psi and Phi start at l = 1
    assert vsh_gram(3, AngularQuadrature.for_degree(3)).shape == (46, 46)


def test_under_resolved_quadrature_breaks_gram():
    g = vsh_gram(4, AngularQuadrature.gauss(1, 1))
    assert np.max(np.abs(g - np.eye(len(g)))) > 0.1


def test_quadrature_exactness_and_equality():
    q = AngularQuadrature.gauss(6, 11)
    assert q.exact_degree == 10
    n = q.unit_vectors()
    assert q.integrate(np.ones(q.size)) == pytest.approx(4 * math.pi)
    assert q.integrate(n[:, 2] ** 4) == pytest.approx(4 * math.pi / 5)
    assert q == AngularQuadrature.gauss(6, 11)
    assert q != AngularQuadrature.gauss(6, 12)


@pytest.mark.parametrize("l", range(1, 5))
def test_laplacian_matrix_structure(l):
    lt2 = l * (l + 1)
    mat = angular_laplacian_matrix(l)
    np.testing.assert_allclose(mat, mat.T)
    assert mat[2, 2] == lt2
    assert mat[0, 1] == pytest.approx(-2 * math.sqrt(lt2))
    # the Upsilon/Psi block has eigenvalues (l-1) l and (l+1)(l+2)
    ev = np.sort(np.linalg.eigvalsh(mat[:2, :2]))
    np.testing.assert_allclose(ev, [(l - 1) * l, (l + 1) * (l + 2)], atol=1e-12)


def test_laplacian_l0():
    assert angular_laplacian_action(VshKind.UPSILON, SphericalIndex(0, 0)) == {VshKind.UPSILON: 2.0}


@pytest.mark.parametrize("l", range(0, 5))
def test_laplacian_fd_matches_coefficients(l):
    th, ph = np.array([0.35, 1.2, 2.7]), np.array([0.4, 3.3, 5.1])
    for m in range(-l, l + 1):
        idx = SphericalIndex(l, m)
        for kind in VshKind:
            if l < kind.min_l:
                continue
            fd = angular_laplacian_fd(kind, idx, th, ph)
            exact = sum(c * vsh(k, l, m, th, ph) for k, c in angular_laplacian_action(kind, idx).items())
            assert np.max(np.abs(fd - exact)) < 1e-8


def test_angular_point_validation_and_wrap():
    p = AngularPoint(1.0, 7.0)
    assert p.phi == pytest.approx(7.0 - 2 * math.pi)
    with pytest.raises(ValueError):
        AngularPoint(-0.1, 0.0)
    with pytest.raises(ValueError):
        AngularPoint(0.5, 0.0, "polar")
    lat = AngularPoint(-0.3, 1.0, "latitude")
    assert lat.theta == pytest.approx(math.pi / 2 + 0.3)


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.01, math.pi - 0.01), phi=st.floats(0.0, 6.28))
def test_convention_round_trip(theta, phi):
    psi, ph = from_colatitude(theta, phi, "latitude")
    th2, ph2 = colatitude(psi, ph, "latitude")
    assert float(th2) == pytest.approx(theta, abs=1e-12)
    assert math.cos(float(ph2) - phi) == pytest.approx(1.0, abs=1e-12)
    a = AngularPoint(float(psi), float(ph), "latitude")
    b = AngularPoint(theta, phi)
    idx = SphericalIndex(3, 1)
    assert eval_ylm(idx, a) == pytest.approx(eval_ylm(idx, b), abs=1e-12)
    np.testing.assert_allclose(eval_vsh("Phi", idx, a), eval_vsh("Phi", idx, b), atol=1e-12)
