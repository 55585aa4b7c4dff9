"""Scalar and vector spherical harmonics on the unit sphere.

Conventions
-----------
Angles are the colatitude ``theta`` in [0, pi] (``z = cos(theta)``) and the
azimuth ``phi`` in [0, 2 pi).  Complex harmonics carry the Condon-Shortley
phase.  The alternative chart ``x = (cos psi cos phi, cos psi sin phi,
sin psi)`` is accepted as ``convention="latitude"``; it reaches the lower
hemisphere only through ``psi < 0``.

The three vector harmonics of degree ``l`` are

    Upsilon_lm = rhat Y_lm
    Psi_lm     = r grad Y_lm / lt
    Phi_lm     = (x cross grad) Y_lm / lt = rhat cross Psi_lm

with ``lt = sqrt(l (l + 1))``; ``Psi`` and ``Phi`` need ``l >= 1``.
The tangential derivatives are evaluated with ladder identities so that the
harmonics are regular at the poles.
"""

from __future__ import annotations

import dataclasses
import enum
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .errors import SphericalIndexError

CONVENTIONS = ("colatitude", "latitude")


class VshKind(enum.Enum):
    UPSILON = "Upsilon"
    PSI = "Psi"
    PHI = "Phi"

    @property
    def min_l(self) -> int:
        return 0 if self is VshKind.UPSILON else 1


@dataclasses.dataclass(frozen=True, order=True)
class SphericalIndex:
    l: int
    m: int

    def __post_init__(self):
        if int(self.l) != self.l or self.l < 0:
            raise SphericalIndexError(f"l must be a non-negative integer, got {self.l}")
        if int(self.m) != self.m or abs(self.m) > self.l:
            raise SphericalIndexError(f"|m| <= l violated for (l={self.l}, m={self.m})")

    @property
    def lt(self) -> float:
        return math.sqrt(self.l * (self.l + 1))


def all_indices(l_max: int, l_min: int = 0) -> list[SphericalIndex]:
    return [SphericalIndex(l, m) for l in range(l_min, l_max + 1) for m in range(-l, l + 1)]


@dataclasses.dataclass(frozen=True)
class AngularPoint:
    """A direction given by a polar-type angle and the azimuth."""

    psi: float
    phi: float
    convention: str = "colatitude"

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown polar convention {self.convention!r}")
        phi = float(self.phi) % (2 * math.pi)
        object.__setattr__(self, "phi", phi)
        lo, hi = (0.0, math.pi) if self.convention == "colatitude" else (-math.pi / 2, math.pi)
        if not lo <= self.psi <= hi:
            raise ValueError(f"psi={self.psi} outside [{lo}, {hi}] for {self.convention}")

    @property
    def theta(self) -> float:
        """Colatitude of the point."""
        return float(colatitude(self.psi, self.phi, self.convention)[0])

    def unit_vector(self) -> NDArray[np.float64]:
        return unit_vector(self.psi, self.phi, self.convention)


def unit_vector(psi: ArrayLike, phi: ArrayLike, convention: str = "colatitude") -> NDArray:
    """Cartesian unit vectors, shape ``(..., 3)``."""
    psi = np.asarray(psi, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if convention == "colatitude":
        st, ct = np.sin(psi), np.cos(psi)
        return np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)
    if convention == "latitude":
        cp, sp = np.cos(psi), np.sin(psi)
        return np.stack([cp * np.cos(phi), cp * np.sin(phi), sp], axis=-1)
    raise ValueError(f"unknown polar convention {convention!r}")


def colatitude(psi: ArrayLike, phi: ArrayLike, convention: str = "colatitude"):
    """Convert to ``(theta, phi)`` in the internal colatitude chart."""
    if convention == "colatitude":
        return np.asarray(psi, dtype=float), np.mod(phi, 2 * np.pi)
    n = unit_vector(psi, phi, convention)
    return cartesian_to_angles(n)


def from_colatitude(theta: ArrayLike, phi: ArrayLike, convention: str = "colatitude"):
    """Express internal ``(theta, phi)`` in the requested chart."""
    theta = np.asarray(theta, dtype=float)
    if convention == "colatitude":
        return theta, np.asarray(phi, dtype=float)
    if convention == "latitude":
        return np.pi / 2 - theta, np.asarray(phi, dtype=float)
    raise ValueError(f"unknown polar convention {convention!r}")


def cartesian_to_angles(x: ArrayLike):
    """``(theta, phi)`` of Cartesian points (any non-zero length)."""
    x = np.asarray(x, dtype=float)
    rho = np.hypot(x[..., 0], x[..., 1])
    theta = np.arctan2(rho, x[..., 2])
    phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * np.pi)
    return theta, phi


# -- scalar harmonics -----------------------------------------------------

def ylm(l: int, m: int, theta: ArrayLike, phi: ArrayLike) -> NDArray[np.complex128]:
    """Orthonormal complex ``Y_lm``; zero when ``|m| > l`` or ``l < 0``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if l < 0 or abs(m) > l:
        return np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
    return special.sph_harm_y(l, m, theta, phi)


def _dtheta_ylm(l, m, theta, phi):
    # d/dtheta Y = (e^{-i phi} L+ Y - e^{i phi} L- Y) / 2
    up = math.sqrt((l - m) * (l + m + 1)) * np.exp(-1j * phi) * ylm(l, m + 1, theta, phi)
    dn = math.sqrt((l + m) * (l - m + 1)) * np.exp(1j * phi) * ylm(l, m - 1, theta, phi)
    return 0.5 * (up - dn)


def _m_over_sin_ylm(l, m, theta, phi):
    # m Y_lm / sin(theta), regular at the poles
    if m == 0 or l == 0:
        return np.zeros(np.broadcast(theta, phi).shape, dtype=complex)
    c = -0.5 * math.sqrt((2 * l + 1) / (2 * l - 1))
    a = math.sqrt((l - m) * (l - m - 1)) * np.exp(-1j * phi) * ylm(l - 1, m + 1, theta, phi)
    b = math.sqrt((l + m) * (l + m - 1)) * np.exp(1j * phi) * ylm(l - 1, m - 1, theta, phi)
    return c * (a + b)


def _frame(theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    sp, cp = np.sin(phi), np.cos(phi)
    rhat = np.stack([st * cp, st * sp, ct], axis=-1)
    that = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phat = np.stack([-sp, cp, np.zeros_like(st)], axis=-1)
    return rhat, that, phat


def vsh(kind: VshKind | str, l: int, m: int, theta: ArrayLike, phi: ArrayLike) -> NDArray[np.complex128]:
    """Vector spherical harmonic in Cartesian components, shape ``(..., 3)``."""
    kind = VshKind(kind)
    SphericalIndex(l, m)
    if l < kind.min_l:
        raise SphericalIndexError(f"{kind.value} requires l >= 1, got l={l}")
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    rhat, that, phat = _frame(theta, phi)
    if kind is VshKind.UPSILON:
        return rhat * ylm(l, m, theta, phi)[..., None]
    lt = math.sqrt(l * (l + 1))
    dth = _dtheta_ylm(l, m, theta, phi)[..., None] / lt
    dph = 1j * _m_over_sin_ylm(l, m, theta, phi)[..., None] / lt
    if kind is VshKind.PSI:
        return that * dth + phat * dph
    return phat * dth - that * dph


def eval_ylm(idx: SphericalIndex, point: AngularPoint) -> complex:
    """``Y_lm`` at a single direction."""
    theta, phi = colatitude(point.psi, point.phi, point.convention)
    return complex(ylm(idx.l, idx.m, theta, phi))


def eval_vsh(kind: VshKind | str, idx: SphericalIndex, point: AngularPoint) -> NDArray[np.complex128]:
    """Vector harmonic at a single direction as a complex 3-vector."""
    theta, phi = colatitude(point.psi, point.phi, point.convention)
    return vsh(kind, idx.l, idx.m, theta, phi)


def vsh_labels(l_max: int) -> list[tuple[VshKind, SphericalIndex]]:
    """All ``(kind, (l, m))`` with ``l <= l_max`` in a fixed order."""
    out = []
    for idx in all_indices(l_max):
        for kind in VshKind:
            if idx.l >= kind.min_l:
                out.append((kind, idx))
    return out


# -- quadrature -----------------------------------------------------------

@dataclasses.dataclass(frozen=True, eq=False)
class AngularQuadrature:
    """Gauss-Legendre in ``cos(theta)`` times the trapezoid rule in ``phi``.

    With ``n_theta`` Gauss nodes and ``n_phi`` azimuths the rule integrates
    exactly every polynomial in ``(x, y, z)`` restricted to the sphere of
    degree below ``min(2 n_theta, n_phi)``.
    """

    theta: NDArray[np.float64]
    phi: NDArray[np.float64]
    weights: NDArray[np.float64]
    n_theta: int
    n_phi: int

    @classmethod
    def gauss(cls, n_theta: int, n_phi: int | None = None) -> "AngularQuadrature":
        if n_theta < 1:
            raise ValueError("n_theta must be positive")
        n_phi = 2 * n_theta - 1 if n_phi is None else n_phi
        x, wx = np.polynomial.legendre.leggauss(n_theta)
        th = np.arccos(x)
        ph = 2 * np.pi * np.arange(n_phi) / n_phi
        tt, pp = np.meshgrid(th, ph, indexing="ij")
        ww = np.outer(wx, np.full(n_phi, 2 * np.pi / n_phi))
        return cls(tt.ravel(), pp.ravel(), ww.ravel(), n_theta, n_phi)

    @classmethod
    def for_degree(cls, l_max: int) -> "AngularQuadrature":
        """Rule exact for products of vector harmonics up to ``l_max``.

        Cartesian components of the vector harmonics are polynomials of
        degree ``l + 1`` on the sphere, so products reach ``2 l_max + 2``.
        """
        return cls.gauss(l_max + 2, 2 * l_max + 3)

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def exact_degree(self) -> int:
        return min(2 * self.n_theta, self.n_phi) - 1

    def unit_vectors(self) -> NDArray[np.float64]:
        return unit_vector(self.theta, self.phi)

    def points(self, convention: str = "colatitude") -> list[AngularPoint]:
        psi, phi = from_colatitude(self.theta, self.phi, convention)
        return [AngularPoint(float(a), float(b), convention) for a, b in zip(psi, phi)]

    def integrate(self, f: ArrayLike, axis: int = -1):
        return np.tensordot(np.asarray(f), self.weights, axes=([axis], [0]))

    def __eq__(self, other):
        return (
            isinstance(other, AngularQuadrature)
            and (self.n_theta, self.n_phi) == (other.n_theta, other.n_phi)
        )

    def __hash__(self):
        return hash((self.n_theta, self.n_phi))


def vsh_table(l_max: int, quad: AngularQuadrature) -> tuple[list, NDArray[np.complex128]]:
    """Labels and samples ``(n_labels, n_nodes, 3)`` of all harmonics up to ``l_max``."""
    labels = vsh_labels(l_max)
    table = np.empty((len(labels), quad.size, 3), dtype=complex)
    for i, (kind, idx) in enumerate(labels):
        table[i] = vsh(kind, idx.l, idx.m, quad.theta, quad.phi)
    return labels, table


def vsh_gram(l_max: int, quad: AngularQuadrature) -> NDArray[np.complex128]:
    """Matrix of sphere products ``int conj(Z_a) . Z_b dOmega``."""
    _, table = vsh_table(l_max, quad)
    weighted = table * quad.weights[None, :, None]
    return np.einsum("anc,bnc->ab", table.conj(), weighted)


# -- angular Laplacian ----------------------------------------------------

def angular_laplacian_action(kind: VshKind | str, idx: SphericalIndex) -> dict[VshKind, float]:
    """Coefficients of the (positive) angular Laplacian on a vector harmonic.

    The action mixes ``Upsilon`` and ``Psi`` of the same ``(l, m)`` through a
    symmetric 2x2 block and leaves ``Phi`` diagonal.
    """
    kind = VshKind(kind)
    if idx.l < kind.min_l:
        raise SphericalIndexError(f"{kind.value} requires l >= 1, got l={idx.l}")
    lt2 = float(idx.l * (idx.l + 1))
    lt = math.sqrt(lt2)
    if kind is VshKind.PHI:
        return {VshKind.PHI: lt2}
    if kind is VshKind.UPSILON:
        if idx.l == 0:
            return {VshKind.UPSILON: 2.0}
        return {VshKind.UPSILON: 2.0 + lt2, VshKind.PSI: -2.0 * lt}
    return {VshKind.UPSILON: -2.0 * lt, VshKind.PSI: lt2}


def angular_laplacian_matrix(l: int) -> NDArray[np.float64]:
    """Mixing matrix on ``(Upsilon, Psi, Phi)`` at fixed ``l >= 1``."""
    idx = SphericalIndex(l, 0)
    kinds = list(VshKind)
    mat = np.zeros((3, 3))
    for j, k in enumerate(kinds):
        for target, c in angular_laplacian_action(k, idx).items():
            mat[kinds.index(target), j] = c
    return mat


# central 8th-order second-derivative stencil
_D2_STENCIL = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def angular_laplacian_fd(
    kind: VshKind | str, idx: SphericalIndex, theta: ArrayLike, phi: ArrayLike, h: float = 1e-2
) -> NDArray[np.complex128]:
    """Angular Laplacian by Cartesian finite differences.

    The harmonic is extended off the sphere as a function of ``x / |x|`` only;
    minus its Cartesian Laplacian at ``|x| = 1`` is then the angular part.
    """
    kind = VshKind(kind)
    x0 = unit_vector(theta, phi)
    out = np.zeros(x0.shape, dtype=complex)
    offsets = np.arange(-4, 5)
    for axis in range(3):
        for k, c in zip(offsets, _D2_STENCIL):
            x = x0.copy()
            x[..., axis] += k * h
            th, ph = cartesian_to_angles(x)
            out -= c * vsh(kind, idx.l, idx.m, th, ph)
    return out / h**2
