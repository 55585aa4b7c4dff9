"""Finite-mode polynomial-times-Gaussian states and their exact algebra.

A mode system is a list of frequencies ``omega_i``: ``omega = lam`` for a
continuum sample, ``omega = -i kappa`` for the bound direction of an
extension with ``kappa < 0``.  States are

    P(x) exp(-1/2 sum_i omega_i x_i^2)

with ``P`` a polynomial stored as ``{exponent tuple: coefficient}``.  The
Hamiltonian ``sum_i (-d_i^2 + omega_i^2 x_i^2)`` and the pairs
``b_i = omega_i x_i - d_i``, ``a_i = omega_i x_i + d_i`` act on ``P`` alone:

    a_i P = d_i P,   b_i P = 2 omega_i x_i P - d_i P,
    H P   = sum_i (-d_i^2 P + 2 omega_i x_i d_i P + omega_i P).

Coefficients may be any field type; with :class:`fractions.Fraction` inputs
the continuum algebra is exact.
"""

from __future__ import annotations

import dataclasses
import itertools
import warnings
from collections import defaultdict
from fractions import Fraction
from numbers import Number
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DomainError


MAX_MODES = 16
MAX_DEGREE = 8


@dataclasses.dataclass(frozen=True)
class Mode:
    label: str
    omega: Number
    discrete: bool = False
    channel: str = ""


@dataclasses.dataclass(frozen=True)
class ModeSystem:
    modes: tuple[Mode, ...]
    max_degree: int = MAX_DEGREE

    def __post_init__(self):
        modes = tuple(self.modes)
        if not modes:
            raise DomainError("a mode system needs at least one mode")
        if len(modes) > MAX_MODES:
            raise DomainError(f"at most {MAX_MODES} modes are supported, got {len(modes)}")
        cont = [(m.channel, m.omega) for m in modes if not m.discrete]
        for _, w in cont:
            if not w > 0:
                raise DomainError(f"continuum frequencies must be positive, got {w}")
        if len(set(cont)) != len(cont):
            raise DomainError("continuum frequencies must be distinct within a channel")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def from_spectrum(cls, lams: Sequence[Number], kappa: Number | None = None, channel: str = "") -> "ModeSystem":
        """Continuum samples ``lams`` plus the bound direction when ``kappa < 0``."""
        prefix = f"{channel}:" if channel else ""
        modes = [Mode(f"{prefix}lam={lam}", lam, channel=channel) for lam in lams]
        if kappa is not None and kappa < 0:
            modes.append(Mode(f"{prefix}bound", discrete_omega(kappa), discrete=True, channel=channel))
        return cls(tuple(modes))

    @classmethod
    def product(cls, *systems: "ModeSystem") -> "ModeSystem":
        """Concatenate independent channels into one system."""
        modes = tuple(m for s in systems for m in s.modes)
        return cls(modes, min(s.max_degree for s in systems))

    @property
    def n(self) -> int:
        return len(self.modes)

    @property
    def omegas(self) -> tuple:
        return tuple(m.omega for m in self.modes)

    def vacuum_energy(self):
        return sum(self.omegas)

    def check_index(self, i: int) -> None:
        if not 0 <= i < self.n:
            raise DomainError(f"mode index {i} outside 0..{self.n - 1}")


def discrete_omega(kappa: Number) -> complex:
    """Frequency ``-i kappa`` of the bound direction.

    It satisfies ``omega^2 = -kappa^2`` and gives the Gaussian factor
    ``exp(i kappa x^2 / 2)``.
    """
    if not kappa < 0:
        raise DomainError("the bound direction exists only for kappa < 0")
    return complex(0, -kappa)


def _clean(terms: Mapping[tuple, Number]) -> dict:
    return {k: v for k, v in terms.items() if v != 0}


@dataclasses.dataclass(frozen=True, eq=False)
class ModeState:
    """Polynomial prefactor of a Gaussian state over a :class:`ModeSystem`."""

    system: ModeSystem
    terms: Mapping[tuple[int, ...], Number]

    def __post_init__(self):
        n = self.system.n
        for k in self.terms:
            if len(k) != n or any(e < 0 for e in k):
                raise DomainError(f"bad exponent tuple {k} for {n} modes")
        object.__setattr__(self, "terms", dict(sorted(_clean(self.terms).items())))

    @property
    def degree(self) -> int:
        return max((sum(k) for k in self.terms), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(abs(v) <= tol for v in self.terms.values())

    def _same(self, other: "ModeState") -> None:
        if other.system != self.system:
            raise DomainError("states belong to different mode systems")

    def __add__(self, other: "ModeState") -> "ModeState":
        self._same(other)
        out = defaultdict(int, self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v
        return ModeState(self.system, out)

    def __sub__(self, other: "ModeState") -> "ModeState":
        return self + other.scaled(-1)

    def scaled(self, c: Number) -> "ModeState":
        return ModeState(self.system, {k: c * v for k, v in self.terms.items()})

    def max_abs(self) -> float:
        return max((abs(v) for v in self.terms.values()), default=0.0)

    def __repr__(self):
        return f"ModeState({self.terms!r})"


def vacuum_state(sys: ModeSystem) -> ModeState:
    return ModeState(sys, {(0,) * sys.n: 1})


def monomial(sys: ModeSystem, exponents: Sequence[int], coef: Number = 1) -> ModeState:
    return ModeState(sys, {tuple(exponents): coef})


def _shift(k: tuple, i: int, d: int) -> tuple:
    return k[:i] + (k[i] + d,) + k[i + 1 :]


def _derivative(terms: Mapping, i: int) -> dict:
    out = defaultdict(int)
    for k, v in terms.items():
        if k[i]:
            out[_shift(k, i, -1)] += k[i] * v
    return out


def apply_annihilate(i: int, state: ModeState) -> ModeState:
    """``a_i = omega_i x_i + d_i``; on the prefactor this is ``d_i``."""
    state.system.check_index(i)
    return ModeState(state.system, _derivative(state.terms, i))


def apply_create(i: int, state: ModeState) -> ModeState:
    """``b_i = omega_i x_i - d_i``; on the prefactor ``2 omega_i x_i - d_i``."""
    sys = state.system
    sys.check_index(i)
    if state.degree + 1 > sys.max_degree:
        raise DomainError(f"polynomial degree would exceed {sys.max_degree}")
    w = sys.modes[i].omega
    out = defaultdict(int)
    for k, v in state.terms.items():
        out[_shift(k, i, 1)] += 2 * w * v
    for k, v in _derivative(state.terms, i).items():
        out[k] -= v
    return ModeState(sys, out)


def apply_hamiltonian(sys: ModeSystem, state: ModeState) -> ModeState:
    """``sum_i (-d_i^2 + omega_i^2 x_i^2)`` applied to the full state."""
    if state.system != sys:
        raise DomainError("state belongs to a different mode system")
    out = defaultdict(int)
    for i, mode in enumerate(sys.modes):
        w = mode.omega
        for k, v in state.terms.items():
            e = k[i]
            # 2 omega x d P + omega P on this monomial: omega (2 e + 1)
            out[k] += w * (2 * e + 1) * v
            if e >= 2:
                out[_shift(k, i, -2)] -= e * (e - 1) * v
    return ModeState(sys, out)


def commutator_defect(i: int, j: int, state: ModeState) -> ModeState:
    """``[a_i, b_j] state - 2 omega_i delta_ij state``."""
    ab = apply_annihilate(i, apply_create(j, state))
    ba = apply_create(j, apply_annihilate(i, state))
    out = ab - ba
    if i == j:
        out = out - state.scaled(2 * state.system.modes[i].omega)
    return out


@dataclasses.dataclass(frozen=True)
class FockCoefficients:
    """Coefficient tensor ``sigma[i_1, ..., i_n]`` over mode indices."""

    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=object))

    @property
    def order(self) -> int:
        return self.sigma.ndim

    def is_symmetric(self) -> bool:
        s = self.sigma
        return all(
            np.all(s == np.transpose(s, perm)) for perm in itertools.permutations(range(s.ndim))
        )

    def symmetrized(self) -> "FockCoefficients":
        s = self.sigma
        perms = list(itertools.permutations(range(s.ndim)))
        acc = sum((np.transpose(s, p) for p in perms[1:]), np.transpose(s, perms[0]))
        return FockCoefficients(acc * Fraction(1, len(perms)))


def build_n_particle(sys: ModeSystem, sigma: FockCoefficients | np.ndarray) -> ModeState:
    """``sum sigma[i_1..i_n] b_{i_1} ... b_{i_n}`` applied to the vacuum.

    A non-symmetric tensor is symmetrized first, with a warning.
    """
    if not isinstance(sigma, FockCoefficients):
        sigma = FockCoefficients(sigma)
    if sigma.order and any(d != sys.n for d in sigma.sigma.shape):
        raise DomainError(f"sigma must have every axis of length {sys.n}")
    if sigma.order == 0:
        return vacuum_state(sys).scaled(sigma.sigma.item())
    if not sigma.is_symmetric():
        warnings.warn("sigma is not symmetric; using its symmetrization", stacklevel=2)
        sigma = sigma.symmetrized()
    # b operators commute, so group index tuples by multiset
    grouped = defaultdict(int)
    for idx in itertools.product(range(sys.n), repeat=sigma.order):
        c = sigma.sigma[idx]
        if c != 0:
            grouped[tuple(sorted(idx))] += c
    out = ModeState(sys, {})
    vac = vacuum_state(sys)
    for idx, c in grouped.items():
        st = vac
        for i in idx:
            st = apply_create(i, st)
        out = out + st.scaled(c)
    return out


def eigen_check(sys: ModeSystem, state: ModeState, rel_tol: float = 1e-12):
    """``(True, E)`` when ``H state = E state``, else ``(False, None)``.

    The ratio is read off the highest-degree term; with exact coefficient
    types the comparison is exact, with floats it is relative to ``rel_tol``.
    """
    if state.is_zero():
        raise DomainError("the zero state has no eigenvalue")
    h = apply_hamiltonian(sys, state)
    key = max(state.terms, key=lambda k: (sum(k), k))
    e = h.terms.get(key, 0) / state.terms[key]
    defect = h - state.scaled(e)
    exact = all(not isinstance(v, (float, complex)) for v in list(state.terms.values()) + list(sys.omegas))
    tol = 0.0 if exact else rel_tol * max(h.max_abs(), state.max_abs() * abs(e), 1e-300)
    if defect.is_zero(tol):
        return True, e
    return False, None


def random_state(sys: ModeSystem, degree: int, rng: np.random.Generator, n_terms: int = 6) -> ModeState:
    """Random complex polynomial prefactor of total degree at most ``degree``."""
    terms = {}
    for _ in range(n_terms):
        k = [0] * sys.n
        for _ in range(int(rng.integers(0, degree + 1))):
            k[int(rng.integers(0, sys.n))] += 1
        terms[tuple(k)] = complex(rng.normal(), rng.normal())
    return ModeState(sys, terms)


def occupation_energy(sys: ModeSystem, occupied: Iterable[int]):
    """``E_0 + 2 sum omega_i`` over the occupied indices."""
    return sys.vacuum_energy() + 2 * sum(sys.modes[i].omega for i in occupied)
