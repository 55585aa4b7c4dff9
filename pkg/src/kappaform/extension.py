"""The one-parameter family of extensions of the ``l = 1`` radial operator.

For a real parameter ``kappa`` the extended operator acts as

    T1k u = T_1 u - (2 / r) u'(0)

on functions with ``u(0) = 0`` whose Taylor data obey ``3 u''(0) = 4 kappa u'(0)``.
``kappa = inf`` is the regular (Friedrichs) member, where the domain
condition degenerates to ``u'(0) = 0`` and the kernels reduce to spherical
Bessel functions.

The continuum eigenfunctions ``p(lam; r)`` are normalized so that
``<p_lam, p_mu>_1 = delta(lam - mu)``; for ``kappa < 0`` a single bound state
``q`` with ``T1k q = -kappa^2 q`` and ``<q, q>_1 = 1`` completes the set.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import integrate, special

from .errors import DomainError
from .radial import RadialFunction, RadialGrid, apply_tl, inner_angle

logger = logging.getLogger(__name__)

FREE = math.inf
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# below this |kappa r| the closed form of q loses digits; use its Taylor series
_Q_SERIES_CUT = 1e-2


@dataclasses.dataclass(frozen=True)
class ExtensionParam:
    """Extension parameter; ``kappa = inf`` selects the regular member."""

    kappa: float

    def __post_init__(self):
        k = float(self.kappa)
        if math.isnan(k) or k == -math.inf:
            raise DomainError(f"kappa must be finite or +inf, got {self.kappa}")
        object.__setattr__(self, "kappa", k)

    @property
    def is_free(self) -> bool:
        return math.isinf(self.kappa)

    @property
    def has_discrete(self) -> bool:
        return self.kappa < 0


def _as_kappa(kappa) -> float:
    return kappa.kappa if isinstance(kappa, ExtensionParam) else ExtensionParam(kappa).kappa


def phase_shift(lam: ArrayLike, kappa: float) -> NDArray | float:
    """Phase ``zeta = -atan2(kappa, lam)`` with ``exp(2 i zeta) = (lam - i kappa)/(lam + i kappa)``."""
    kappa = _as_kappa(kappa)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("phase shift needs lam > 0")
    if math.isinf(kappa):
        out = np.full(lam.shape, -0.5 * math.pi)
    else:
        out = -np.arctan2(kappa, lam) + 0.0  # no signed zero at kappa = 0
    return out if out.ndim else float(out)


def _a_of(x):
    # x j1(x) = sin x / x - cos x, computed without cancellation
    return x * special.spherical_jn(1, x)


def _b_of(x):
    # sin x - (1 - cos x)/x
    with np.errstate(invalid="ignore", divide="ignore"):
        b = np.sin(x) - 2.0 * np.sin(0.5 * x) ** 2 / x
    return np.where(x == 0, 0.0, b)


def _trig_zeta(lam, kappa):
    if math.isinf(kappa):
        return -np.ones_like(lam), np.zeros_like(lam)
    rho = np.hypot(lam, kappa)
    return -kappa / rho, lam / rho


def eval_p_kappa(lam: ArrayLike, kappa: float, r: ArrayLike) -> NDArray:
    """Continuum eigenfunction of the extended operator at eigenvalue ``lam^2``.

    Written as ``(2 / (sqrt(2 pi) lam)) (sin z * x j1(x) - cos z * (sin x - (1 - cos x)/x))``
    with ``x = lam r``; both brackets are evaluated in cancellation-free form
    so the result is accurate down to ``r = 0``.  Broadcasts over ``lam`` and ``r``.
    """
    kappa = _as_kappa(kappa)
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("continuum kernels need lam > 0")
    if np.any(r < 0):
        raise DomainError("radius must be non-negative")
    sz, cz = _trig_zeta(lam, kappa)
    x = lam * r
    return 2.0 * _INV_SQRT_2PI / lam * (sz * _a_of(x) - cz * _b_of(x))


def eval_p_free(l: int, lam: ArrayLike, r: ArrayLike) -> NDArray:
    """Regular kernel ``(-1)^l sqrt(2/pi) r j_l(lam r)`` of ``T_l``."""
    if int(l) != l or l < 1:
        raise DomainError(f"l must be a positive integer, got {l}")
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(lam <= 0):
        raise DomainError("continuum kernels need lam > 0")
    sign = -1.0 if l % 2 else 1.0
    return sign * math.sqrt(2.0 / math.pi) * r * special.spherical_jn(int(l), lam * r)


def q_norm(kappa: float) -> float:
    return math.sqrt(-2.0 / kappa**3)


def eval_q(kappa: float, r: ArrayLike) -> NDArray:
    """Bound state ``sqrt(-2/kappa^3) (kappa e^{kappa r} + (1 - e^{kappa r}) / r)``, ``kappa < 0``."""
    kappa = _as_kappa(kappa)
    if not kappa < 0:
        raise DomainError(f"the bound state exists only for kappa < 0, got {kappa}")
    r = np.asarray(r, dtype=float)
    t = kappa * r
    small = np.abs(t) < _Q_SERIES_CUT
    # e^t - (e^t - 1)/t = sum_n n t^n / (n+1)!
    series = t / 2 + t**2 / 3 + t**3 / 8 + t**4 / 30 + t**5 / 144
    with np.errstate(invalid="ignore", divide="ignore"):
        closed = np.exp(t) - special.expm1(t) / t
    return q_norm(kappa) * kappa * np.where(small, series, closed)


def eval_q_derivative(kappa: float, r: ArrayLike) -> NDArray:
    """``q'(r)``; only used away from the origin."""
    kappa = _as_kappa(kappa)
    r = np.asarray(r, dtype=float)
    e = np.exp(kappa * r)
    return q_norm(kappa) * (kappa**2 * e - kappa * e / r + special.expm1(kappa * r) / r**2)


def discrete_norm(kappa: float, grid: RadialGrid) -> float:
    """``<q, q>_1`` on ``grid`` plus the analytic contribution beyond ``r_max``.

    ``q`` decays only like ``1/r``, so the part past the grid end is of order
    ``2 / (|kappa|^3 r_max^3)`` and is integrated from the closed form.
    """
    q = RadialFunction(grid, eval_q(kappa, grid.nodes))
    inside = float(inner_angle(1, q, q))

    def dens(r):
        return float(eval_q_derivative(kappa, r) ** 2 + 2.0 * eval_q(kappa, r) ** 2 / r**2)

    tail, _ = integrate.quad(dens, grid.r_max, np.inf, epsabs=0.0, epsrel=1e-12)
    return inside + tail


def discrete_residual(kappa: float, grid: RadialGrid) -> float:
    """Relative interior defect of ``T1k q = -kappa^2 q``."""
    q = RadialFunction(grid, eval_q(kappa, grid.nodes))
    res = apply_t1_kappa(kappa, q).values + kappa**2 * q.values
    mask = grid.interior()
    w = grid.weights[mask]
    return float(math.sqrt(np.sum(w * res[mask] ** 2) / np.sum(w * (kappa**2 * q.values[mask]) ** 2)))


def q_taylor(kappa: float) -> tuple[float, float]:
    """Exact ``(q'(0), q''(0))``."""
    c = q_norm(kappa)
    return c * kappa**2 / 2, 2 * c * kappa**3 / 3


def _require_vanishing(u: RadialFunction, zero_tol: float) -> None:
    scale = np.max(np.abs(u.values)) or 1.0
    if abs(u.endpoint.u0) > zero_tol * scale:
        raise DomainError(f"function does not vanish at the origin (u(0)={u.endpoint.u0:.3g})")


def apply_t1_kappa(kappa: float, u: RadialFunction, zero_tol: float = 1e-3) -> RadialFunction:
    """Extended action ``T_1 u - (2/r) u'(0)`` with the fitted ``u'(0)``.

    The action itself does not depend on ``kappa``; the parameter only
    selects the domain, and the boundary residual is attached to ``meta``.
    """
    kappa = _as_kappa(kappa)
    _require_vanishing(u, zero_tol)
    t1 = apply_tl(1, u)
    u1 = u.endpoint.u1
    out = t1.values - 2.0 * u1 / u.grid.nodes
    meta = dict(t1.meta)
    meta["boundary"] = check_boundary_condition(u, kappa)
    return RadialFunction(u.grid, out, u.decay, meta)


@dataclasses.dataclass(frozen=True)
class BoundaryResidual:
    """Normalized defects of the domain condition.

    ``residual`` refers to ``3 u''(0) = 4 kappa u'(0)`` (``u'(0) = 0`` when
    ``kappa`` is infinite); ``literal`` to the form ``3 u''(0) = 4 u'(0)``
    without the parameter, kept as a diagnostic only.
    """

    residual: float
    literal: float
    u1: float
    u2: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.residual <= tol


def _ratio(a, b):
    return 0.0 if b == 0 else float(abs(a) / b)


def check_boundary_condition(u: RadialFunction, kappa: float) -> BoundaryResidual:
    kappa = _as_kappa(kappa)
    e = u.endpoint
    u1, u2 = e.u1, e.u2
    if math.isinf(kappa):
        # kappa u'(0) must stay finite: u'(0) = 0, measured against the slope scale
        slope = np.max(np.abs(u.derivative()))
        res = _ratio(u1, slope)
    else:
        # |kappa| floored at 1 so that kappa = 0 (u''(0) = 0) keeps a nonzero scale
        res = _ratio(3 * u2 - 4 * kappa * u1, 3 * abs(u2) + 4 * max(abs(kappa), 1.0) * abs(u1))
    lit = _ratio(3 * u2 - 4 * u1, 3 * abs(u2) + 4 * abs(u1))
    return BoundaryResidual(res, lit, u1, u2)


def eigen_residual(kappa: float, lam: float, grid: RadialGrid) -> float:
    """Relative interior defect of ``T1k p = lam^2 p`` on ``grid``."""
    p = RadialFunction(grid, eval_p_kappa(lam, kappa, grid.nodes), "none")
    res = apply_t1_kappa(kappa, p).values - lam**2 * p.values
    mask = grid.interior()
    w = grid.weights[mask]
    num = np.sum(w * res[mask] ** 2)
    den = np.sum(w * (lam**2 * p.values[mask]) ** 2)
    return float(math.sqrt(num / den))


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralFamily:
    """Extension parameter plus a midpoint ``lam`` grid for spectral integrals.

    ``l > 1`` is accepted only for the regular member and uses the kernels
    of ``T_l``; this serves the non-extended angular channels.
    """

    param: ExtensionParam
    lambdas: NDArray[np.float64]
    dlam: float
    l: int = 1

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0 or lam[0] <= 0 or np.any(np.diff(lam) <= 0):
            raise DomainError("lambda grid must be positive and strictly increasing")
        if self.l != 1 and not self.param.is_free:
            raise DomainError("only the l = 1 channel carries a finite extension parameter")
        object.__setattr__(self, "lambdas", lam)

    @classmethod
    def uniform(cls, kappa: float, lam_max: float, n: int = 4096, l: int = 1) -> "SpectralFamily":
        """Nodes ``(j - 1/2) lam_max / n``, ``j = 1..n``."""
        if n < 1 or lam_max <= 0:
            raise DomainError("need n >= 1 and lam_max > 0")
        d = lam_max / n
        return cls(ExtensionParam(kappa), (np.arange(n) + 0.5) * d, d, l)

    @classmethod
    def for_grid(cls, kappa: float, grid: RadialGrid, n: int = 4096, l: int = 1) -> "SpectralFamily":
        """Band limit ``pi / (4 h)`` set by the far-field radial spacing ``h``."""
        return cls.uniform(kappa, math.pi / (4.0 * grid.h), n, l)

    @property
    def kappa(self) -> float:
        return self.param.kappa

    @property
    def has_discrete(self) -> bool:
        return self.l == 1 and self.param.has_discrete

    @property
    def lam_max(self) -> float:
        return self.dlam * len(self.lambdas)

    def kernel(self, lam: ArrayLike, r: ArrayLike) -> NDArray:
        if self.l == 1:
            return eval_p_kappa(lam, self.kappa, r)
        return eval_p_free(self.l, lam, r)

    def zeta(self) -> NDArray:
        return phase_shift(self.lambdas, self.kappa)

    def discrete_eigenvalue(self) -> float | None:
        return -self.kappa**2 if self.has_discrete else None

    def kernel_blocks(self, r: NDArray, block: int = 512):
        """Yield ``(slice, p(lam_slice, r))`` blocks to bound memory use."""
        for start in range(0, len(self.lambdas), block):
            sl = slice(start, start + block)
            yield sl, self.kernel(self.lambdas[sl, None], r[None, :])


# -- large-lam tail ------------------------------------------------------
#
# Beyond the band limit L the coefficients of a smooth decaying input follow
# u_hat ~ c2/lam^2 + c3/lam^3 + c4/lam^4.  The missing pieces of the spectral
# integrals are then closed-form: for the norms by direct integration, for the
# inverse transform through J_{F,k}(y) = int_y^inf F(x) x^-k dx with F one of
#   A(x) = sin x / x - cos x,   B(x) = sin x - (1 - cos x) / x.

TAIL_POWERS = (2, 3, 4)
_TAIL_SWITCH = 0.5
_TAIL_TERMS = 14


def _antiderivative(name: str, k: int, x):
    si, ci = special.sici(x)
    s, c = np.sin(x), np.cos(x)
    if name == "A":
        if k == 3:
            return (x**3 * ci - x**2 * s + x * c - s) / (3 * x**3)
        if k == 4:
            return (-(x**4) * si - x**3 * c - x**2 * s + 2 * x * c - 2 * s) / (8 * x**4)
        if k == 5:
            return (-(x**5) * ci + x**4 * s - x**3 * c - 2 * x**2 * s + 6 * x * c - 6 * s) / (30 * x**5)
    else:
        if k == 3:
            return (-(x**3) * si - x**2 * c - x * s - c + 1) / (3 * x**3)
        if k == 4:
            return (-(x**4) * ci + x**3 * s - x**2 * c - 2 * x * s - 2 * c + 2) / (8 * x**4)
        if k == 5:
            return (x**5 * si + x**4 * c + x**3 * s - 2 * x**2 * c - 6 * x * s - 6 * c + 6) / (30 * x**5)
    raise ValueError((name, k))


_ANTIDERIVATIVE_AT_INF = {
    ("A", 3): 0.0, ("A", 4): -math.pi / 16, ("A", 5): 0.0,
    ("B", 3): -math.pi / 6, ("B", 4): 0.0, ("B", 5): math.pi / 60,
}


def _series(name: str):
    """``(coefficient, power)`` pairs of the Maclaurin series of A or B."""
    out = []
    for n in range(_TAIL_TERMS):
        if name == "A":
            if n == 0:
                continue
            out.append(((-1) ** (n + 1) * 2 * n / math.factorial(2 * n + 1), 2 * n))
        else:
            out.append(((-1) ** n * (2 * n + 1) / math.factorial(2 * n + 2), 2 * n + 1))
    return out


def tail_integral(name: str, k: int, y: ArrayLike) -> NDArray:
    """``int_y^inf F(x) x^-k dx`` for ``F`` in {"A", "B"} and ``k`` in 3..5.

    Closed form for ``y >= 0.5``; below, the closed form at 0.5 plus a
    termwise integrated Maclaurin series, which avoids the cancellation of
    the closed form near the origin.
    """
    y = np.asarray(y, dtype=float)
    y0 = _TAIL_SWITCH
    far = _ANTIDERIVATIVE_AT_INF[(name, k)] - _antiderivative(name, k, np.maximum(y, y0))
    yy = np.minimum(y, y0)
    near = np.zeros_like(yy)
    for coef, power in _series(name):
        e = power - k + 1
        if e == 0:
            near += coef * np.log(y0 / yy)
        else:
            near += coef * (y0**e - yy**e) / e
    return far + near


def _power_tail(c: NDArray, lam_max: float, shift: int) -> float:
    # int_L^inf lam^shift (sum_j c_j lam^-j)^2 dlam
    total = 0.0
    for cj, j in zip(c, TAIL_POWERS):
        for ck, k in zip(c, TAIL_POWERS):
            e = j + k - shift - 1
            total += cj * ck * lam_max ** (-e) / e
    return float(total)


def fit_tail(family: "SpectralFamily", u_hat: NDArray, rel_tol: float = 1e-2) -> NDArray | None:
    """Least-squares fit of the asymptotic model on the upper half of the band.

    Returns ``None`` when the model does not describe the samples to
    ``rel_tol`` (oscillatory or unresolved inputs) or for channels ``l > 1``.
    """
    if family.l != 1:
        return None
    lam = family.lambdas
    sel = lam > 0.5 * family.lam_max
    if sel.sum() < 2 * len(TAIL_POWERS):
        return None
    basis = np.stack([lam[sel] ** -float(p) for p in TAIL_POWERS], axis=1)
    coef, *_ = np.linalg.lstsq(basis, u_hat[sel], rcond=None)
    scale = np.linalg.norm(u_hat[sel])
    if scale == 0.0:
        return None
    if np.linalg.norm(basis @ coef - u_hat[sel]) > rel_tol * scale:
        return None
    return coef


def tail_profile(family: "SpectralFamily", coef: NDArray, r: NDArray) -> NDArray:
    """``int_L^inf u_hat_model(lam) p_lam(r) dlam`` through order ``lam^-5``."""
    c2, c3, c4 = coef
    lam_max = family.lam_max
    y = lam_max * np.asarray(r, dtype=float)

    def term(name, k):
        return r ** (k - 1) * tail_integral(name, k, y)

    pref = 2.0 * _INV_SQRT_2PI
    if family.param.is_free:
        return -pref * (c2 * term("A", 3) + c3 * term("A", 4) + c4 * term("A", 5))
    kap = family.kappa
    # sin z = -kappa/lam + O(lam^-3), cos z = 1 - kappa^2/(2 lam^2) + O(lam^-4)
    return pref * (
        -c2 * term("B", 3)
        - c3 * term("B", 4)
        - (c4 - 0.5 * kap**2 * c2) * term("B", 5)
        - kap * c2 * term("A", 4)
        - kap * c3 * term("A", 5)
    )


@dataclasses.dataclass(frozen=True, eq=False)
class SpectralCoefficients:
    """Samples of ``u_hat`` plus the discrete component and tail model.

    ``tail`` holds the coefficients of ``u_hat ~ sum_k c_k lam^-k`` above the
    band limit, or ``None`` when the spectral integrals are plain truncations.
    """

    family: SpectralFamily
    u_hat: NDArray[np.float64]
    u_hat_d: float | None = None
    meta: dict = dataclasses.field(default_factory=dict)
    tail: NDArray | None = None

    def __post_init__(self):
        if (self.u_hat_d is not None) != self.family.has_discrete:
            raise DomainError("discrete component must be present exactly when kappa < 0")
        if np.shape(self.u_hat) != self.family.lambdas.shape:
            raise DomainError("coefficient samples do not match the lambda grid")

    @classmethod
    def zeros(cls, family: SpectralFamily) -> "SpectralCoefficients":
        d = 0.0 if family.has_discrete else None
        return cls(family, np.zeros(len(family.lambdas)), d)

    def norm2(self) -> float:
        """``int |u_hat|^2 dlam + |u_hat_d|^2``."""
        s = float(np.sum(np.abs(self.u_hat) ** 2) * self.family.dlam)
        if self.tail is not None:
            s += _power_tail(self.tail, self.family.lam_max, 0)
        if self.u_hat_d is not None:
            s += abs(self.u_hat_d) ** 2
        return s

    def form(self) -> float:
        """``int lam^2 |u_hat|^2 dlam - kappa^2 |u_hat_d|^2``."""
        lam = self.family.lambdas
        s = float(np.sum(lam**2 * np.abs(self.u_hat) ** 2) * self.family.dlam)
        if self.tail is not None:
            s += _power_tail(self.tail, self.family.lam_max, 2)
        if self.u_hat_d is not None:
            s -= self.family.kappa**2 * abs(self.u_hat_d) ** 2
        return s


def forward_transform(
    u: RadialFunction, fam: SpectralFamily, tail_tol: float = 1e-3, tail_model: bool = True
) -> SpectralCoefficients:
    """``u_hat(lam) = int p_lam T_l u dr`` and ``u_hat_d = int q T_1 u dr``.

    With ``tail_model`` the asymptotic decay above the band limit is fitted
    (:func:`fit_tail`) and later used by the norms and the inverse.
    ``meta["accuracy_ok"]`` is cleared when the input has not decayed at the
    end of the radial grid or when the top tenth of the ``lam`` band still
    carries more than ``tail_tol`` of the spectral mass.
    """
    grid = u.grid
    r = grid.nodes
    tu = apply_tl(fam.l, u)
    g = grid.weights * tu.values
    u_hat = np.empty(len(fam.lambdas))
    for sl, block in fam.kernel_blocks(r):
        u_hat[sl] = block @ g
    u_hat_d = float(eval_q(fam.kappa, r) @ g) if fam.has_discrete else None

    mass = np.abs(u_hat) ** 2
    total = mass.sum()
    top = mass[int(0.9 * len(mass)) :].sum()
    tail = float(top / total) if total > 0 else 0.0
    decayed = u.check_decay(1e-10)
    meta = {"tail_fraction": tail, "decayed": decayed, "accuracy_ok": decayed and tail <= tail_tol}
    if not meta["accuracy_ok"]:
        logger.warning("forward_transform: tail fraction %.3g, decayed=%s", tail, decayed)
    model = fit_tail(fam, u_hat) if tail_model else None
    meta["tail_model"] = model is not None
    return SpectralCoefficients(fam, u_hat, u_hat_d, meta, model)


def inverse_transform(c: SpectralCoefficients, grid: RadialGrid) -> RadialFunction:
    """``u(r) = int u_hat(lam) p_lam(r) dlam + u_hat_d q(r)`` on the nodes of ``grid``."""
    fam = c.family
    r = grid.nodes
    u = np.zeros(len(r))
    for sl, block in fam.kernel_blocks(r):
        u += (c.u_hat[sl] * fam.dlam) @ block
    if c.tail is not None:
        u += tail_profile(fam, c.tail, r)
    if c.u_hat_d is not None:
        u += c.u_hat_d * eval_q(fam.kappa, r)
    return RadialFunction(grid, u, "fast")
