"""Batch front end.

    kappaform <command> [--config FILE] [--kappa K]... [--out DIR] [--field FILE]

Commands write JSON reports (and CSV tables where relevant) into ``--out``;
exit status is 0 when every check passes, 1 when a check fails and 2 on
usage, configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import tempfile
import warnings
from fractions import Fraction
from typing import Any

import numpy as np

from . import __version__
from .errors import DomainError, GridMismatchError, TransversalityError
from .extension import (
    check_boundary_condition,
    discrete_norm,
    discrete_residual,
    eigen_residual,
    eval_p_kappa,
    eval_q,
    phase_shift,
)
from .fieldops import (
    LongitudinalField,
    TransverseField,
    decompose,
    default_file_mode,
    divergence_residual,
    make_singular_test_field,
    read_field,
    reconstruct,
    sample_longitudinal,
    write_field,
)
from .fock import (
    ModeSystem,
    apply_create,
    apply_hamiltonian,
    build_n_particle,
    commutator_defect,
    eigen_check,
    random_state,
    vacuum_state,
)
from .quadform import KAPPA_COEFF, form_q, form_q_kappa_limit
from .radial import RadialFunction, RadialGrid
from .sphere import (
    AngularQuadrature,
    SphericalIndex,
    VshKind,
    angular_laplacian_action,
    angular_laplacian_fd,
    angular_laplacian_matrix,
    vsh,
    vsh_gram,
)

logger = logging.getLogger("kappaform")

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULT_CONFIG: dict[str, Any] = {
    "schema_version": SCHEMA_VERSION,
    "grid": {"n": 2048, "r_max": 40.0, "r_min": 1e-4, "efold": 16.0, "order": 8},
    "l_max": 4,
    "kappas": [1.0],
    "convention": "colatitude",
    "quadrature": {"n_theta": None, "n_phi": None},
    "spectrum": {"probe_step": 0.1, "probe_count": 50, "n_lambda": 4096, "lambda_max": None},
    "qform": {"rho0": 0.5, "levels": 11},
    "field": {"kind": "singular", "profile": "r_exp", "direction": [0.0, 0.0, 1.0], "l": 1, "m": 0},
    "fock": {
        "lambdas": [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5],
        "kappa": -2.0,
        "max_degree": 4,
        "random_states": 4,
        "seed": 0,
    },
    "tolerances": {
        "gram": 1e-9,
        "laplacian": 1e-6,
        "eigen_residual": 1e-7,
        "boundary": 1e-6,
        "discrete": 1e-8,
        "divergence": 1e-6,
        "extrapolation": 1e-6,
        "affine": 1e-4,
        "fock": 1e-12,
    },
    "out": "out",
}

PROFILES = {
    "r_exp": lambda r: r * np.exp(-r),
    "r2_exp": lambda r: r**2 * np.exp(-r),
    "r_gauss": lambda r: r * np.exp(-(r**2)),
    "r2_gauss": lambda r: r**2 * np.exp(-(r**2)),
}
FIELD_KINDS = ("singular", "regular", "longitudinal", "zero")


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------

def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown configuration key {path}{k!r}")
        if isinstance(base[k], dict) and base[k] and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


def _parse_kappa(text: str | float) -> float:
    try:
        k = float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"kappa must be a number or 'inf', got {text!r}") from None
    if math.isnan(k) or k == -math.inf:
        raise ConfigError(f"kappa must be finite or +inf, got {text!r}")
    return k


@dataclasses.dataclass(frozen=True)
class RunConfig:
    data: dict

    @classmethod
    def load(cls, path: str | None = None, kappas: list[str] | None = None, out: str | None = None) -> "RunConfig":
        data = copy.deepcopy(DEFAULT_CONFIG)
        if path is not None:
            with open(path) as fh:
                try:
                    user = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}: invalid JSON ({exc})") from None
            if not isinstance(user, dict):
                raise ConfigError(f"{path}: top level must be an object")
            data = _merge(data, user)
        if kappas:
            data["kappas"] = list(kappas)
        if out is not None:
            data["out"] = out
        cfg = cls(data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        d = self.data
        if not d["kappas"]:
            raise ConfigError("kappa list must be non-empty")
        d["kappas"] = [_parse_kappa(k) for k in d["kappas"]]
        for name, tol in d["tolerances"].items():
            if not (isinstance(tol, (int, float)) and tol > 0):
                raise ConfigError(f"tolerance {name!r} must be positive")
        if not (isinstance(d["l_max"], int) and 0 <= d["l_max"] <= 16):
            raise ConfigError("l_max must be an integer in 0..16")
        if d["convention"] not in ("colatitude", "latitude"):
            raise ConfigError("convention must be 'colatitude' or 'latitude'")
        if d["field"]["kind"] not in FIELD_KINDS:
            raise ConfigError(f"field.kind must be one of {FIELD_KINDS}")
        if d["field"]["profile"] not in PROFILES:
            raise ConfigError(f"field.profile must be one of {sorted(PROFILES)}")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def tol(self) -> dict:
        return self.data["tolerances"]

    def grid(self) -> RadialGrid:
        g = self.data["grid"]
        try:
            return RadialGrid(int(g["n"]), float(g["r_max"]), float(g["r_min"]), float(g["efold"]), int(g["order"]))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"invalid grid parameters: {exc}") from None

    def quadrature(self, l_max: int | None = None) -> AngularQuadrature:
        q = self.data["quadrature"]
        l_max = self.data["l_max"] if l_max is None else l_max
        if q["n_theta"] is None and q["n_phi"] is None:
            return AngularQuadrature.for_degree(l_max)
        n_theta = int(q["n_theta"] or l_max + 2)
        return AngularQuadrature.gauss(n_theta, None if q["n_phi"] is None else int(q["n_phi"]))

    def dump(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=True) + "\n"


# -- reports and files --------------------------------------------------------

@dataclasses.dataclass
class CheckReport:
    command: str
    checks: list[dict] = dataclasses.field(default_factory=list)
    info: dict = dataclasses.field(default_factory=dict)

    def add(self, name: str, measured: float, tolerance: float, passed: bool | None = None, **extra) -> bool:
        measured = float(measured)
        ok = bool(measured <= tolerance) if passed is None else bool(passed)
        if math.isnan(measured):
            ok = False
        entry = {"check": name, "measured": _json_float(measured), "tolerance": float(tolerance), "pass": ok}
        entry.update(extra)
        self.checks.append(entry)
        return ok

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "pass": self.passed,
            "checks": self.checks,
            "info": self.info,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _json_float(x: float):
    return x if math.isfinite(x) else str(x)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, default_file_mode())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header: list[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    atomic_write(path, buf.getvalue())


def _kappa_tag(k: float) -> str:
    return "inf" if math.isinf(k) else format(k, "g")


# -- commands -------------------------------------------------------------------

def cmd_print_config(cfg: RunConfig, args) -> int:
    sys.stdout.write(cfg.dump())
    return EXIT_OK


def cmd_vsh_check(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("vsh-check")
    l_max = cfg["l_max"]
    quad = cfg.quadrature()
    gram = vsh_gram(l_max, quad)
    rep.add("gram_identity_max_deviation", np.max(np.abs(gram - np.eye(len(gram)))), cfg.tol["gram"])
    rep.info.update({"l_max": l_max, "n_theta": quad.n_theta, "n_phi": quad.n_phi, "gram_size": len(gram)})

    # finite-difference angular Laplacian at a few generic directions
    theta = np.array([0.3, 1.1, 2.0, 2.9])
    phi = np.array([0.2, 2.5, 4.1, 5.7])
    worst = 0.0
    for l in range(0, min(l_max, 4) + 1):
        for m in range(-l, l + 1):
            idx = SphericalIndex(l, m)
            for kind in VshKind:
                if l < kind.min_l:
                    continue
                fd = angular_laplacian_fd(kind, idx, theta, phi)
                exact = sum(c * vsh(k, l, m, theta, phi) for k, c in angular_laplacian_action(kind, idx).items())
                worst = max(worst, float(np.max(np.abs(fd - exact))))
    rep.add("laplacian_action_fd_max_deviation", worst, cfg.tol["laplacian"])
    asym = max(
        (float(np.max(np.abs(angular_laplacian_matrix(l) - angular_laplacian_matrix(l).T))) for l in range(1, max(l_max, 1) + 1)),
        default=0.0,
    )
    rep.add("laplacian_mixing_symmetry", asym, cfg.tol["laplacian"])
    return rep


def _probe_lambdas(cfg: RunConfig) -> list[float]:
    sp = cfg["spectrum"]
    return [k * float(sp["probe_step"]) for k in range(1, int(sp["probe_count"]) + 1)]


def cmd_spectrum(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("spectrum")
    grid = cfg.grid()
    out = cfg["out"]
    lams = _probe_lambdas(cfg)
    header = ["kind", "lambda", "zeta", "eigen_residual", "boundary_residual", "eigenvalue", "norm"]
    for kappa in cfg["kappas"]:
        tag = _kappa_tag(kappa)
        rows, worst_res, worst_bc = [], 0.0, 0.0
        for lam in lams:
            z = phase_shift(lam, kappa)
            res = eigen_residual(kappa, lam, grid)
            p = RadialFunction(grid, eval_p_kappa(lam, kappa, grid.nodes), "none")
            bc = check_boundary_condition(p, kappa).residual
            worst_res, worst_bc = max(worst_res, res), max(worst_bc, bc)
            rows.append(["continuum", lam, z, res, bc, lam**2, None])
        rep.add(f"eigen_residual[kappa={tag}]", worst_res, cfg.tol["eigen_residual"])
        rep.add(f"boundary_residual[kappa={tag}]", worst_bc, cfg.tol["boundary"])
        if kappa < 0:
            q = RadialFunction(grid, eval_q(kappa, grid.nodes))
            norm = discrete_norm(kappa, grid)
            dres = discrete_residual(kappa, grid)
            bc = check_boundary_condition(q, kappa).residual
            rows.append(["discrete", None, None, dres, bc, -(kappa**2), norm])
            rep.add(f"discrete_norm[kappa={tag}]", abs(norm - 1.0), cfg.tol["discrete"])
            rep.add(f"discrete_eigen_residual[kappa={tag}]", dres, cfg.tol["discrete"])
        path = os.path.join(out, f"spectrum_kappa_{tag}.csv")
        write_csv(path, header, rows)
        rep.info.setdefault("files", []).append(os.path.basename(path))
    return rep


def _load_field(cfg: RunConfig, args):
    if not args.field:
        raise ConfigError("this command needs --field FILE")
    grid = cfg.grid()
    quad = cfg.quadrature()
    return read_field(args.field, grid, quad, cfg["convention"])


def cmd_qform(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("qform")
    f = _load_field(cfg, args)
    res = divergence_residual(f, cfg["l_max"])
    rep.add("divergence_residual", res, cfg.tol["divergence"])
    tf = decompose(f, cfg["l_max"], check=False).pruned()
    qf = cfg["qform"]
    results = {}
    for kappa in cfg["kappas"]:
        if math.isinf(kappa):
            raise ConfigError("qform needs finite kappa values")
        r = form_q_kappa_limit(tf, kappa, rho0=float(qf["rho0"]), levels=int(qf["levels"]), tol=cfg.tol["extrapolation"])
        results[kappa] = r
        rep.add(f"extrapolation[kappa={_kappa_tag(kappa)}]", r.meta["extrapolation_delta"], cfg.tol["extrapolation"] * max(1.0, abs(r.value)))
    ks = sorted(results)
    surf = results[ks[0]].meta["surface_limit"]
    singular = surf > 1e-6 * max(1.0, abs(results[ks[0]].value))
    regular_value = None
    if not singular:
        regular_value = form_q(tf).value
        for k in ks:
            dev = abs(results[k].value - regular_value) / max(abs(regular_value), 1e-300)
            rep.add(f"regular_kappa_independence[kappa={_kappa_tag(k)}]", dev, cfg.tol["extrapolation"])
    if singular:
        # Q_k1 - Q_k2 = (44/27)(k2 - k1) lim |A|^2 over the shrinking sphere
        for k1, k2 in zip(ks, ks[1:]):
            lhs = results[k1].value - results[k2].value
            rhs = KAPPA_COEFF * (k2 - k1) * surf
            rep.add(f"affine_slope[{_kappa_tag(k1)},{_kappa_tag(k2)}]", abs(lhs - rhs) / abs(rhs), cfg.tol["affine"])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "field": os.path.basename(args.field),
        "singular": bool(singular),
        "regular_value": regular_value,
        "surface_limit": surf,
        "results": [dict(kappa=_json_float(k), **results[k].to_json()) for k in ks],
    }
    atomic_write(os.path.join(cfg["out"], "qform_result.json"), json.dumps(doc, indent=2, sort_keys=True) + "\n")
    rep.info["files"] = ["qform_result.json"]
    return rep


def cmd_decompose(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("decompose")
    f = _load_field(cfg, args)
    l_max = cfg["l_max"]
    res = divergence_residual(f, l_max)
    ok = rep.add("divergence_residual", res, cfg.tol["divergence"])
    if not ok:
        logger.warning("field is not transverse (residual %.3g); coefficients describe its transverse part", res)
    tf = decompose(f, l_max, check=False)
    r = f.grid.nodes
    scale = float(np.max(np.abs(f.values))) if f.values.size else 0.0
    floor = 1e-14 * max(scale, 1e-300) * float(r[-1])
    rows = []
    kept = 0
    for (l, m), (u, w) in tf.modes.items():
        for channel, prof in (("u", u), ("w", w)):
            if np.max(np.abs(prof.values)) <= floor:
                continue
            kept += 1
            for ri, v in zip(r, prof.values):
                rows.append([l, m, channel, ri, v.real, v.imag])
    path = os.path.join(cfg["out"], "decompose.csv")
    write_csv(path, ["l", "m", "channel", "r", "value_re", "value_im"], rows)
    if scale > 0:
        back = reconstruct(tf, f.quad)
        rel = (back - f).norm() / max(f.norm(), 1e-300)
        rep.info["reconstruction_rel_l2"] = rel
    rep.info.update({"files": ["decompose.csv"], "channels_written": kept})
    return rep


def cmd_fock_check(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("fock-check")
    fc = cfg["fock"]
    tol = cfg.tol["fock"]
    lams = [Fraction(x) for x in fc["lambdas"]]
    kappa = fc["kappa"]
    systems = {"continuum": ModeSystem.from_spectrum(lams)}
    if kappa is not None and kappa < 0:
        systems["with_bound"] = ModeSystem.from_spectrum(lams, Fraction(kappa))
    rng = np.random.default_rng(int(fc["seed"]))
    for name, sysm in systems.items():
        sysm = dataclasses.replace(sysm, max_degree=int(fc["max_degree"]) + 1)
        worst = 0.0
        for _ in range(int(fc["random_states"])):
            st = random_state(sysm, int(fc["max_degree"]), rng)
            for i in range(sysm.n):
                for j in range(sysm.n):
                    worst = max(worst, commutator_defect(i, j, st).max_abs())
        rep.add(f"commutator[{name}]", worst, tol)

        vac = vacuum_state(sysm)
        ok, e = eigen_check(sysm, vac)
        expect = sysm.vacuum_energy()
        rep.add(f"vacuum_eigenvalue[{name}]", abs(e - expect) if ok else math.inf, tol, value=str(e))
        worst_off = 0.0
        for i in range(sysm.n):
            ok1, e1 = eigen_check(sysm, apply_create(i, vac))
            worst_off = max(worst_off, abs(e1 - e - 2 * sysm.modes[i].omega) if ok1 else math.inf)
        rep.add(f"one_particle_offsets[{name}]", worst_off, tol)
        sigma = np.zeros((sysm.n, sysm.n), dtype=object)
        j = min(1, sysm.n - 1)
        sigma[0, j] += Fraction(1, 2)
        sigma[j, 0] += Fraction(1, 2)
        ok2, e2 = eigen_check(sysm, build_n_particle(sysm, sigma))
        expect2 = e + 2 * (sysm.modes[0].omega + sysm.modes[j].omega)
        rep.add(f"two_particle_offset[{name}]", abs(e2 - expect2) if ok2 else math.inf, tol)
        h = apply_hamiltonian(sysm, vac)
        rep.info[f"vacuum_terms[{name}]"] = len(h.terms)
        if name == "with_bound":
            k = float(kappa)
            bound = ModeSystem(tuple(m for m in sysm.modes if m.discrete))
            okb, eb = eigen_check(bound, vacuum_state(bound))
            expect_b = complex(0, -k)
            rep.add("discrete_vacuum_eigenvalue", abs(eb - expect_b) if okb else math.inf, tol, value=str(eb))
    return rep


def cmd_make_field(cfg: RunConfig, args) -> CheckReport:
    rep = CheckReport("make-field")
    grid = cfg.grid()
    quad = cfg.quadrature()
    spec = cfg["field"]
    prof = PROFILES[spec["profile"]]
    kind = spec["kind"]
    if kind == "singular":
        f = make_singular_test_field(grid, spec["direction"], prof, quad)
    elif kind == "regular":
        tf = TransverseField.single(grid, int(spec["l"]), int(spec["m"]), u=prof, w=prof, l_max=cfg["l_max"])
        f = reconstruct(tf, quad)
    elif kind == "longitudinal":
        l, m = int(spec["l"]), int(spec["m"])
        f = sample_longitudinal(LongitudinalField(grid, {(l, m): RadialFunction.from_callable(grid, prof)}), quad)
    else:
        f = reconstruct(TransverseField.zeros(grid, max(cfg["l_max"], 1)), quad)
    if kind in ("regular", "longitudinal") and int(spec["m"]) != 0:
        # real representative: combine with the conjugate partner
        raise ConfigError("make-field writes real fields; use m = 0 for regular and longitudinal kinds")
    name = args.field or os.path.join(cfg["out"], f"field_{kind}.txt")
    os.makedirs(os.path.dirname(os.path.abspath(name)), exist_ok=True)
    write_field(name, f, cfg["convention"])
    rep.info["files"] = [os.path.basename(name)]
    return rep


COMMANDS = {
    "print-config": cmd_print_config,
    "vsh-check": cmd_vsh_check,
    "spectrum": cmd_spectrum,
    "qform": cmd_qform,
    "decompose": cmd_decompose,
    "fock-check": cmd_fock_check,
    "make-field": cmd_make_field,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kappaform", description="Extension-family spectra, forms and field checks.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="FILE", help="JSON configuration overriding the defaults")
    p.add_argument("--kappa", metavar="K", action="append", help="extension parameter (repeatable; 'inf' for the regular member)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--field", metavar="FILE", help="field file (input for qform/decompose, output for make-field)")
    p.add_argument("--verbose", "-v", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config, args.kappa, args.out)
        handler = COMMANDS[args.command]
        if args.command == "print-config":
            return handler(cfg, args)
        os.makedirs(cfg["out"], exist_ok=True)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = handler(cfg, args)
        report_name = args.command.replace("-", "_") + ".json"
        atomic_write(os.path.join(cfg["out"], report_name), rep.to_json())
    except (ConfigError, GridMismatchError, DomainError, TransversalityError) as exc:
        print(f"kappaform: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"kappaform: I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for c in rep.checks:
        status = "PASS" if c["pass"] else "FAIL"
        print(f"{status} {c['check']}: {c['measured']} (tol {c['tolerance']})")
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
