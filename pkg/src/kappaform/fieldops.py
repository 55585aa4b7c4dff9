"""Vector fields on the product grid and their transverse parametrization.

A divergence-free field is written through two families of radial profiles,

    A = sum_lm ( lt u_lm / r^2 Upsilon_lm + u_lm' / r Psi_lm + w_lm / r Phi_lm ),

which is transverse for any choice of ``u_lm`` and ``w_lm``.  Fields are
stored as Cartesian samples on ``RadialGrid x AngularQuadrature`` with
row-major layout ``(radius, direction, component)``.
"""

from __future__ import annotations

import dataclasses
import math
import os
import tempfile
from typing import Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, GridMismatchError, TransversalityError
from .radial import RadialFunction, RadialGrid
from .sphere import AngularQuadrature, SphericalIndex, VshKind, from_colatitude, colatitude, vsh, ylm


FIELD_HEADER = "# r psi phi A1 A2 A3"


@dataclasses.dataclass(frozen=True, eq=False)
class SampledVectorField:
    """Cartesian samples ``values[i_r, i_omega, k]``.

    ``singular`` marks fields allowed to grow like ``1/|x|`` at the origin.
    """

    grid: RadialGrid
    quad: AngularQuadrature
    values: NDArray[np.complex128]
    singular: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n, self.quad.size, 3):
            raise GridMismatchError(
                f"expected samples of shape {(self.grid.n, self.quad.size, 3)}, got {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("field samples must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: RadialGrid, quad: AngularQuadrature) -> "SampledVectorField":
        return cls(grid, quad, np.zeros((grid.n, quad.size, 3), dtype=complex))

    @classmethod
    def from_callable(
        cls, grid: RadialGrid, quad: AngularQuadrature, func: Callable[[NDArray], ArrayLike], singular=False
    ) -> "SampledVectorField":
        """Sample ``func(x)`` with ``x`` of shape ``(n_r, n_omega, 3)``."""
        x = grid.nodes[:, None, None] * quad.unit_vectors()[None, :, :]
        return cls(grid, quad, np.asarray(func(x), dtype=complex), singular)

    def __add__(self, other: "SampledVectorField") -> "SampledVectorField":
        self._check(other)
        return SampledVectorField(self.grid, self.quad, self.values + other.values, self.singular or other.singular)

    def __sub__(self, other: "SampledVectorField") -> "SampledVectorField":
        self._check(other)
        return SampledVectorField(self.grid, self.quad, self.values - other.values, self.singular or other.singular)

    def scaled(self, c: complex) -> "SampledVectorField":
        return SampledVectorField(self.grid, self.quad, c * self.values, self.singular)

    def _check(self, other: "SampledVectorField") -> None:
        self.grid.check_compatible(other.grid)
        if self.quad != other.quad:
            raise GridMismatchError("fields use different angular quadratures")

    def norm(self) -> float:
        """``L^2`` norm over the truncated ball."""
        dens = np.sum(np.abs(self.values) ** 2, axis=-1)
        ang = self.quad.integrate(dens, axis=1)
        return float(math.sqrt(abs(self.grid.integrate(ang * self.grid.nodes**2))))

    def max_abs_diff(self, other: "SampledVectorField") -> float:
        self._check(other)
        return float(np.max(np.abs(self.values - other.values)))

    @property
    def l_max(self) -> int:
        """Largest degree whose vector harmonics the quadrature resolves exactly."""
        return max(0, min(self.quad.n_theta - 2, (self.quad.n_phi - 3) // 2))

    def vsh_coefficients(self, kind: VshKind, idx: SphericalIndex) -> NDArray[np.complex128]:
        """``int conj(Z) . A dOmega`` at every radius."""
        z = vsh(kind, idx.l, idx.m, self.quad.theta, self.quad.phi)
        return np.einsum("nk,rnk->r", z.conj() * self.quad.weights[:, None], self.values)

    def scalar_coefficients(self, L: int, M: int) -> NDArray[np.complex128]:
        """``int conj(Y_LM) A_k dOmega``, shape ``(n_r, 3)``."""
        y = ylm(L, M, self.quad.theta, self.quad.phi)
        return np.einsum("n,rnk->rk", y.conj() * self.quad.weights, self.values)


@dataclasses.dataclass(frozen=True, eq=False)
class TransverseField:
    """Profiles ``(u_lm, w_lm)`` for ``1 <= l <= l_max``; absent modes are zero."""

    grid: RadialGrid
    l_max: int
    modes: Mapping[tuple[int, int], tuple[RadialFunction, RadialFunction]]

    def __post_init__(self):
        if self.l_max < 1:
            raise DomainError("transverse fields start at l = 1")
        clean = {}
        for key, (u, w) in self.modes.items():
            idx = SphericalIndex(*key)
            if not 1 <= idx.l <= self.l_max:
                raise DomainError(f"mode {key} outside 1 <= l <= {self.l_max}")
            self.grid.check_compatible(u.grid)
            self.grid.check_compatible(w.grid)
            clean[(idx.l, idx.m)] = (u, w)
        object.__setattr__(self, "modes", dict(sorted(clean.items())))

    @classmethod
    def zeros(cls, grid: RadialGrid, l_max: int) -> "TransverseField":
        return cls(grid, l_max, {})

    @classmethod
    def single(
        cls, grid: RadialGrid, l: int, m: int, u=None, w=None, l_max: int | None = None
    ) -> "TransverseField":
        """One ``(l, m)`` mode from profiles, sample arrays or callables of ``r``."""

        def as_rf(f):
            if f is None:
                return RadialFunction.zeros(grid)
            if isinstance(f, RadialFunction):
                return f
            if callable(f):
                return RadialFunction.from_callable(grid, f)
            return RadialFunction(grid, np.asarray(f))

        return cls(grid, l_max or l, {(l, m): (as_rf(u), as_rf(w))})

    def mode(self, l: int, m: int) -> tuple[RadialFunction, RadialFunction]:
        zero = RadialFunction.zeros(self.grid)
        return self.modes.get((l, m), (zero, zero))

    def channels(self):
        """Yield ``(idx, y, chi, phi)`` with the radial factors of Upsilon, Psi, Phi."""
        r = self.grid.nodes
        for (l, m), (u, w) in self.modes.items():
            idx = SphericalIndex(l, m)
            yield idx, idx.lt * u.values / r**2, u.derivative() / r, w.values / r

    def pruned(self, rel_tol: float = 1e-12) -> "TransverseField":
        """Drop modes whose profiles are below ``rel_tol`` times the largest profile value."""
        peak = {key: max(float(np.max(np.abs(u.values))), float(np.max(np.abs(w.values)))) for key, (u, w) in self.modes.items()}
        top = max(peak.values(), default=0.0)
        keep = {key: self.modes[key] for key, p in peak.items() if p > rel_tol * top}
        return TransverseField(self.grid, self.l_max, keep)

    def max_abs_diff(self, other: "TransverseField") -> float:
        """Largest profile discrepancy over both channels and all modes."""
        keys = set(self.modes) | set(other.modes)
        worst = 0.0
        for key in keys:
            for a, b in zip(self.mode(*key), other.mode(*key)):
                worst = max(worst, float(np.max(np.abs(a.values - b.values))))
        return worst


@dataclasses.dataclass(frozen=True, eq=False)
class LongitudinalField:
    """Gradient of the scalar potential ``sum_lm v_lm(r) Y_lm``."""

    grid: RadialGrid
    modes: Mapping[tuple[int, int], RadialFunction]


def default_quadrature(l_max: int) -> AngularQuadrature:
    return AngularQuadrature.for_degree(l_max)


def _sample(grid, quad, terms) -> NDArray[np.complex128]:
    out = np.zeros((grid.n, quad.size, 3), dtype=complex)
    cache = {}
    for kind, idx, profile in terms:
        key = (kind, idx.l, idx.m)
        if key not in cache:
            cache[key] = vsh(kind, idx.l, idx.m, quad.theta, quad.phi)
        out += profile[:, None, None] * cache[key][None, :, :]
    return out


def reconstruct(tf: TransverseField, quad: AngularQuadrature | None = None, singular: bool | None = None) -> SampledVectorField:
    """Cartesian samples of the transverse field."""
    quad = quad or default_quadrature(tf.l_max)
    terms = []
    for idx, y, chi, phi in tf.channels():
        terms += [(VshKind.UPSILON, idx, y), (VshKind.PSI, idx, chi), (VshKind.PHI, idx, phi)]
    if singular is None:
        singular = _has_slope(tf)
    return SampledVectorField(tf.grid, quad, _sample(tf.grid, quad, terms), singular)


def origin_slopes(tf: TransverseField) -> dict[tuple[int, int], float]:
    """``|u'(0)|`` of every ``l = 1`` mode relative to the largest ``|u'|`` in the field."""
    scale = max((float(np.max(np.abs(u.derivative()))) for u, _ in tf.modes.values()), default=0.0)
    scale = scale or 1.0
    return {key: abs(u.endpoint.u1) / scale for key, (u, _) in tf.modes.items() if key[0] == 1}


def _has_slope(tf: TransverseField, rel_tol: float = 1e-6) -> bool:
    return any(v > rel_tol for v in origin_slopes(tf).values())


def sample_longitudinal(lf: LongitudinalField, quad: AngularQuadrature) -> SampledVectorField:
    """Samples of ``grad(sum v_lm Y_lm) = sum v' Upsilon + lt v / r Psi``."""
    r = lf.grid.nodes
    terms = []
    for (l, m), v in lf.modes.items():
        idx = SphericalIndex(l, m)
        terms.append((VshKind.UPSILON, idx, v.derivative()))
        if l >= 1:
            terms.append((VshKind.PSI, idx, idx.lt * v.values / r))
    return SampledVectorField(lf.grid, quad, _sample(lf.grid, quad, terms))


def _extract_u(grid: RadialGrid, l: int, a_up: NDArray, a_psi: NDArray) -> NDArray:
    # u = int ds G_l(r,s) (lt a_up - d/ds (s a_psi)), the derivative moved onto G_l
    r = grid.nodes
    lt = math.sqrt(l * (l + 1))
    inner = grid.cumulative(lt * a_up + (l + 1) * a_psi, power=l + 1)
    outer = grid.cumulative_tail(r ** (-float(l)) * (lt * a_up - l * a_psi))
    return (inner / r**l + r ** (l + 1) * outer) / (2 * l + 1)


def decompose(
    f: SampledVectorField,
    l_max: int | None = None,
    check: bool = True,
    div_tol: float = 1e-6,
) -> TransverseField:
    """Extract ``(u_lm, w_lm)`` of the transverse part of ``f``.

    ``w = r int conj(Phi) . A dOmega``; ``u`` applies the inverse of ``T_l``
    to the combination ``lt a_Upsilon - (s a_Psi)'`` which kills every
    gradient field.  With ``check`` the input must already be transverse
    to ``div_tol`` (see :func:`divergence_residual`).
    """
    l_max = f.l_max if l_max is None else l_max
    if l_max > f.l_max:
        raise DomainError(f"quadrature resolves l <= {f.l_max}, asked for {l_max}")
    if check:
        res = divergence_residual(f, l_max)
        if res > div_tol:
            raise TransversalityError(f"divergence residual {res:.3g} exceeds {div_tol:.3g}; project first")
    grid = f.grid
    r = grid.nodes
    modes = {}
    for l in range(1, l_max + 1):
        for m in range(-l, l + 1):
            idx = SphericalIndex(l, m)
            a_up = f.vsh_coefficients(VshKind.UPSILON, idx)
            a_psi = f.vsh_coefficients(VshKind.PSI, idx)
            a_phi = f.vsh_coefficients(VshKind.PHI, idx)
            u = _extract_u(grid, l, a_up, a_psi)
            w = r * a_phi
            modes[(l, m)] = (RadialFunction(grid, u), RadialFunction(grid, w))
    return TransverseField(grid, max(l_max, 1), modes)


def divergence_residual(f: SampledVectorField, l_max: int | None = None) -> float:
    """``||div A|| / sqrt(||grad A||^2 + ||A / r||^2)`` over the grid interior.

    The divergence is assembled channel by channel,
    ``div A = sum (y' + 2 y / r - lt chi / r) Y_lm``, from the Upsilon and Psi
    coefficients; the denominator uses the Cartesian components expanded in
    scalar harmonics.
    """
    l_max = f.l_max if l_max is None else l_max
    grid = f.grid
    r = grid.nodes
    mask = grid.interior()
    w = grid.weights * r**2
    num = 0.0
    for l in range(0, l_max + 1):
        for m in range(-l, l + 1):
            idx = SphericalIndex(l, m)
            y = f.vsh_coefficients(VshKind.UPSILON, idx)
            d = grid.derivative(y) + 2 * y / r
            if l >= 1:
                d = d - idx.lt * f.vsh_coefficients(VshKind.PSI, idx) / r
            num += np.sum((w * np.abs(d) ** 2)[mask])
    den = _gradient_density(f, l_max + 1)
    den = np.sum((w * den)[mask])
    if den == 0.0:
        return float(math.sqrt(num))
    return float(math.sqrt(num / den))


def _gradient_density(f: SampledVectorField, L_max: int, hardy: bool = True) -> NDArray:
    # angular integral of |grad A|^2 (+ |A|^2 / r^2) from scalar expansions of A_k
    grid = f.grid
    r = grid.nodes
    out = np.zeros(grid.n)
    for L in range(L_max + 1):
        for M in range(-L, L + 1):
            a = f.scalar_coefficients(L, M)
            da = grid.derivative(a)
            out += np.sum(np.abs(da) ** 2 + (L * (L + 1) + hardy) * np.abs(a) ** 2 / r[:, None] ** 2, axis=1)
    return out


def gradient_density(f: SampledVectorField, L_max: int | None = None) -> NDArray:
    """``int |grad A|^2 dOmega`` at every radius (Cartesian components in ``Y_LM``)."""
    return _gradient_density(f, f.l_max + 1 if L_max is None else L_max, hardy=False)


def project_transverse(f: SampledVectorField, l_max: int | None = None) -> SampledVectorField:
    """Transverse projection through the ``(u, w)`` parametrization.

    The ``l = 0`` part of a decaying field is a pure gradient and is dropped.
    """
    tf = decompose(f, l_max, check=False)
    return reconstruct(tf, f.quad, singular=f.singular)


def singular_test_modes(
    grid: RadialGrid, direction: ArrayLike, profile: RadialFunction | Callable, l_max: int = 1
) -> TransverseField:
    """``l = 1`` modes whose angular pattern is ``d . x/|x|``.

    With ``sum_m c_m Y_1m = d . xhat`` the field is real and, for a profile
    with ``u'(0) != 0``, behaves like ``A_0 / |x|`` at the origin.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (3,):
        raise DomainError("direction must be a real 3-vector")
    u = profile if isinstance(profile, RadialFunction) else RadialFunction.from_callable(grid, profile)
    k = math.sqrt(4 * math.pi / 3)
    coef = {
        0: k * d[2],
        1: k * (-d[0] + 1j * d[1]) / math.sqrt(2),
        -1: k * (d[0] + 1j * d[1]) / math.sqrt(2),
    }
    zero = RadialFunction.zeros(grid)
    modes = {(1, m): (u.scaled(c), zero) for m, c in coef.items() if c != 0}
    return TransverseField(grid, l_max, modes)


def make_singular_test_field(
    grid: RadialGrid,
    direction: ArrayLike,
    profile: RadialFunction | Callable,
    quad: AngularQuadrature | None = None,
) -> SampledVectorField:
    """Sampled field of :func:`singular_test_modes`, tagged singular."""
    tf = singular_test_modes(grid, direction, profile)
    return reconstruct(tf, quad, singular=True)


# -- field files ------------------------------------------------------------

def write_field(path: str | os.PathLike, f: SampledVectorField, convention: str = "colatitude") -> None:
    """Write the real part of ``f`` as ``r psi phi A1 A2 A3`` rows (radius-major)."""
    imag = float(np.max(np.abs(f.values.imag))) if f.values.size else 0.0
    if imag > 1e-12 * max(1.0, float(np.max(np.abs(f.values)))):
        raise DomainError(f"field has imaginary part {imag:.3g}; only real fields are written")
    psi, phi = from_colatitude(f.quad.theta, f.quad.phi, convention)
    n_r, n_a = f.grid.n, f.quad.size
    table = np.empty((n_r * n_a, 6))
    table[:, 0] = np.repeat(f.grid.nodes, n_a)
    table[:, 1] = np.tile(psi, n_r)
    table[:, 2] = np.tile(phi, n_r)
    table[:, 3:] = f.values.real.reshape(-1, 3)
    atomic_savetxt(path, table, FIELD_HEADER[2:])


def default_file_mode() -> int:
    """``0o666`` under the process umask (temporary files start at ``0o600``)."""
    mask = os.umask(0)
    os.umask(mask)
    return 0o666 & ~mask


def atomic_savetxt(path, table, header: str) -> None:
    """``numpy.savetxt`` with 17 significant digits through a temporary file."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".txt")
    try:
        with os.fdopen(fd, "w") as fh:
            np.savetxt(fh, table, fmt="%.17g", header=header, comments="# ")
        os.chmod(tmp, default_file_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_field(
    path: str | os.PathLike,
    grid: RadialGrid,
    quad: AngularQuadrature,
    convention: str = "colatitude",
    singular: bool = False,
    rel_tol: float = 1e-10,
) -> SampledVectorField:
    """Read a field file written for ``grid x quad``.

    Rows must follow the canonical radius-major order and their coordinates
    must match the nodes to ``rel_tol``.
    """
    with open(path) as fh:
        first = fh.readline().strip()
    if first.split() != FIELD_HEADER.split():
        raise DomainError(f"{path}: expected header {FIELD_HEADER!r}, found {first!r}")
    table = np.loadtxt(path, comments="#", ndmin=2)
    n_r, n_a = grid.n, quad.size
    if table.shape != (n_r * n_a, 6):
        raise GridMismatchError(f"{path}: expected {n_r * n_a} rows of 6 columns, got {table.shape}")
    r = table[:, 0].reshape(n_r, n_a)
    if not np.allclose(r, grid.nodes[:, None], rtol=rel_tol, atol=0):
        raise GridMismatchError(f"{path}: radii do not match the configured grid")
    theta, phi = colatitude(table[:n_a, 1], table[:n_a, 2], convention)
    x_file = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], -1)
    if not np.allclose(x_file, quad.unit_vectors(), atol=1e-9):
        raise GridMismatchError(f"{path}: directions do not match the configured quadrature")
    values = table[:, 3:].reshape(n_r, n_a, 3)
    return SampledVectorField(grid, quad, values.astype(complex), singular)
