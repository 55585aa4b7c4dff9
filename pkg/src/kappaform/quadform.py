"""The quadratic form of the vector Laplacian and its boundary-subtracted extension.

``Q(A) = int |grad A|^2 d^3x`` is finite for regular fields.  Transverse
fields with an ``A_0 / |x|`` singularity in the ``l = 1`` sector make it
diverge like ``1 / rho``; the extension

    Q_k(A) = lim_{rho -> 0} [ int_{|x| > rho} |grad A|^2
                              - (5 / (3 rho) + 44 kappa / 27) int_{|x| = rho} |A|^2 ]

removes the divergence and leaves a value affine in ``kappa``.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError
from .extension import (
    ExtensionParam,
    SpectralFamily,
    eval_p_kappa,
    eval_q,
    forward_transform,
)
from .fieldops import TransverseField, gradient_density, origin_slopes, reconstruct
from .radial import RadialFunction, apply_tl, inner_angle, inner_plain
from .sphere import AngularQuadrature, VshKind, vsh

logger = logging.getLogger(__name__)

SURFACE_COEFF = 5.0 / 3.0
KAPPA_COEFF = 44.0 / 27.0


@dataclasses.dataclass(frozen=True)
class QuadFormResult:
    """Form value with the ``(rho, partial value)`` table when a limit is taken."""

    value: float
    extrapolation_table: list[tuple[float, float]] = dataclasses.field(default_factory=list)
    converged: bool = True
    meta: dict = dataclasses.field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "converged": self.converged,
            "extrapolation_table": [[r, v] for r, v in self.extrapolation_table],
            "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, float, str, bool, list))},
        }


def form_q(tf: TransverseField, method: str = "modes", regular_tol: float = 1e-6) -> QuadFormResult:
    """``Q(A)`` for a regular transverse field.

    ``method="modes"`` integrates :func:`mode_density`, which needs only first
    derivatives of ``u / r^2``, ``u' / r`` and ``w / r``.  ``"radial"``
    assembles ``(T_l u, T_l u) + <w, w>_l`` channel by channel; it is exact
    for smooth profiles but squares the ``1/r^2`` amplification of noise near
    the origin, so profiles coming out of :func:`decompose` lose accuracy.
    ``"gradient"`` samples the field and integrates ``|grad A|^2`` from the
    scalar-harmonic expansion of its Cartesian components.
    """
    for (_, m), slope in origin_slopes(tf).items():
        if slope > regular_tol:
            raise DomainError(f"mode (1, {m}) has u'(0) != 0; use form_q_kappa_limit")
    if method == "modes":
        value = tf.grid.integrate(mode_density(tf) * tf.grid.nodes**2)
        return QuadFormResult(float(value), meta={"method": method})
    if method == "radial":
        total = 0.0
        for (l, _), (u, w) in tf.modes.items():
            tu = apply_tl(l, u)
            total += inner_plain(tu, tu).real
            total += inner_angle(l, w, w).real
        return QuadFormResult(float(total), meta={"method": method})
    if method == "gradient":
        f = reconstruct(tf)
        dens = gradient_density(f)
        value = tf.grid.integrate(dens * tf.grid.nodes**2)
        return QuadFormResult(float(value), meta={"method": method})
    raise ValueError(f"unknown method {method!r}")


def mode_density(tf: TransverseField) -> NDArray:
    """``int |grad A|^2 dOmega`` at every radius from the ``(u, w)`` profiles.

    With ``A = y Upsilon + chi Psi + phi Phi`` per mode the angular Laplacian
    mixes only ``(y, chi)``, so the density is
    ``|y'|^2 + |chi'|^2 + |phi'|^2 + [(2 + lt^2)|y|^2 - 4 lt Re(conj(y) chi) + lt^2 |chi|^2 + lt^2 |phi|^2] / r^2``.
    """
    grid = tf.grid
    r2 = grid.nodes**2
    out = np.zeros(grid.n)
    for idx, y, chi, phi in tf.channels():
        lt = idx.lt
        lt2 = lt * lt
        for prof in (y, chi, phi):
            out += np.abs(grid.derivative(prof)) ** 2
        ang = (2 + lt2) * np.abs(y) ** 2 - 4 * lt * np.real(np.conj(y) * chi) + lt2 * np.abs(chi) ** 2
        out += (ang + lt2 * np.abs(phi) ** 2) / r2
    return out


def surface_integral(tf: TransverseField, rho: float, quad: AngularQuadrature | None = None) -> float:
    """``int_{|x| = rho} |A|^2`` from the field reconstructed on the sphere."""
    quad = quad or AngularQuadrature.for_degree(tf.l_max)
    grid = tf.grid
    a = np.zeros((quad.size, 3), dtype=complex)
    for idx, y, chi, phi in tf.channels():
        for kind, prof in ((VshKind.UPSILON, y), (VshKind.PSI, chi), (VshKind.PHI, phi)):
            val = grid.interpolate(prof, rho)
            if val != 0:
                a += val * vsh(kind, idx.l, idx.m, quad.theta, quad.phi)
    return float(rho**2 * quad.integrate(np.sum(np.abs(a) ** 2, axis=1)))


def richardson(values: list[float], ratio: float = 2.0, powers=(1, 2)) -> list[list[float]]:
    """Successive elimination of ``rho^p`` terms for ``rho_k = rho_0 ratio^-k``.

    Row ``j`` of the result removes the first ``j`` powers.
    """
    table = [list(values)]
    for p in powers:
        prev = table[-1]
        f = ratio**p
        table.append([(f * prev[k + 1] - prev[k]) / (f - 1) for k in range(len(prev) - 1)])
    return table


def form_q_kappa_limit(
    tf: TransverseField,
    kappa: float,
    rho0: float = 0.5,
    levels: int = 11,
    tol: float = 1e-6,
    volume: str = "modes",
) -> QuadFormResult:
    """Shrinking-ball evaluation of the extended form.

    Radii ``rho_k = rho0 2^-k``, ``k < levels``; the partial values and the
    auxiliary limits are Richardson-extrapolated in ``rho`` (orders 1 and 2).
    ``converged`` requires the last two extrapolants to agree to ``tol``
    relative to ``max(1, |value|)``.  The volume integrand comes from the
    profiles (``volume="modes"``) or from the sampled field (``"gradient"``).
    """
    kappa = ExtensionParam(kappa).kappa
    if math.isinf(kappa):
        raise DomainError("the boundary-limit form needs a finite kappa")
    grid = tf.grid
    rhos = [rho0 * 2.0**-k for k in range(levels)]
    if rhos[-1] < grid.r_min or rho0 >= grid.r_max:
        raise DomainError("ball radii must lie inside the radial grid")
    if volume == "modes":
        dens = mode_density(tf)
    elif volume == "gradient":
        dens = gradient_density(reconstruct(tf))
    else:
        raise ValueError(f"unknown volume route {volume!r}")
    integrand = dens * grid.nodes**2
    quad = AngularQuadrature.for_degree(tf.l_max)
    vol = [float(grid.integral_from(integrand, rho)) for rho in rhos]
    surf = [surface_integral(tf, rho, quad) for rho in rhos]
    partial = [v - (SURFACE_COEFF / rho + KAPPA_COEFF * kappa) * s for v, rho, s in zip(vol, rhos, surf)]

    ext = richardson(partial)
    value = ext[-1][-1]
    delta = abs(ext[-1][-1] - ext[-1][-2])
    converged = bool(delta <= tol * max(1.0, abs(value)))
    surf_limit = richardson(surf)[-1][-1]
    vol_coeff = richardson([rho * v for rho, v in zip(rhos, vol)])[-1][-1]
    meta = {
        "kappa": kappa,
        "surface_limit": surf_limit,
        "volume_divergence": vol_coeff,
        "surface_divergence": SURFACE_COEFF * surf_limit,
        "extrapolation_delta": delta,
        "volume_route": volume,
    }
    if not converged:
        logger.warning("form_q_kappa_limit: extrapolation not converged (delta %.3g)", delta)
    return QuadFormResult(float(value), list(zip(rhos, partial)), converged, meta)


def form_q_kappa_spectral(
    u: RadialFunction, kappa: float, family: SpectralFamily | None = None
) -> float:
    """``<u, T1k u>_1`` as ``int lam^2 |u_hat|^2 dlam - kappa^2 |u_hat_d|^2``."""
    family = family or SpectralFamily.for_grid(kappa, u.grid)
    return forward_transform(u, family).form()


def raised_cosine_window(lam: NDArray, lam_max: float, start: float = 0.5) -> NDArray:
    """1 below ``start * lam_max``, 0 at ``lam_max``, raised cosine in between."""
    t = np.clip((lam / lam_max - start) / (1.0 - start), 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(math.pi * t))


def sqrt_kernel_matrix(
    kappa: float, r: NDArray, s: NDArray | None = None, family: SpectralFamily | None = None
) -> NDArray:
    """``Q_k^(1/2)(r_i, s_j)`` with a raised-cosine damping of the ``lam`` integral.

    ``int p_lam(r) p_lam(s) lam W(lam) dlam - i kappa q(r) q(s)``, the last term
    only for ``kappa < 0``.  The bare integral does not converge at ``r = s``;
    the window makes the kernel a smooth band-limited approximation that is
    exact on inputs whose spectrum lies below the start of the roll-off.
    """
    kappa = ExtensionParam(kappa).kappa
    r = np.atleast_1d(np.asarray(r, dtype=float))
    s = r if s is None else np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(r <= 0) or np.any(s <= 0):
        raise DomainError("kernel arguments must be positive")
    family = family or SpectralFamily.uniform(kappa, 40.0, 4096)
    lam = family.lambdas
    wt = lam * raised_cosine_window(lam, family.lam_max) * family.dlam
    pr = eval_p_kappa(lam[:, None], kappa, r[None, :])
    ps = pr if s is r else eval_p_kappa(lam[:, None], kappa, s[None, :])
    out = (pr * wt[:, None]).T @ ps
    if ps is pr:
        # BLAS does not guarantee a bitwise symmetric product
        out = 0.5 * (out + out.T)
    out = out.astype(complex)
    if family.has_discrete:
        out -= 1j * kappa * np.outer(eval_q(kappa, r), eval_q(kappa, s))
    return out


def eval_sqrt_kernel(kappa: float, r: float, s: float, family: SpectralFamily | None = None) -> complex:
    """Single value of :func:`sqrt_kernel_matrix`; symmetric in ``(r, s)`` by construction."""
    kappa = ExtensionParam(kappa).kappa
    family = family or SpectralFamily.uniform(kappa, 40.0, 4096)
    lam = family.lambdas
    wt = lam * raised_cosine_window(lam, family.lam_max) * family.dlam
    # the product is formed before the sum so r <-> s gives identical roundoff
    prod = eval_p_kappa(lam, kappa, r) * eval_p_kappa(lam, kappa, s)
    val = complex(np.sum(prod * wt))
    if family.has_discrete:
        val -= 1j * kappa * float(eval_q(kappa, r)) * float(eval_q(kappa, s))
    return val
