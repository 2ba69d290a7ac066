"""Command-line front end.

Every subcommand reads an optional YAML run config and writes ``report.txt``
plus CSV tables into the output directory.  Exit codes: 0 when all checks
or certificates pass, 1 on a numerical failure, 2 on a configuration error.

Config keys (all optional)::

    potential: nondegenerate | degenerate | toric | euclidean | path/to/file.yaml
    rho: [0.02, 0.04, 0.08]
    r: [0.6, 0.8]
    N: 32
    tau0: [0, 0, 0, 0, 0, 0]
    tol: 1.0e-11        # projected solve
    gtol: 1.0e-9        # frame search
    cert_tol: 1.0e-8    # certificate
    sweep: {delta: 0.02, count: 5}
    out: results
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import cp2_reference as cp2
from . import fixtures
from .errors import ConfigError, HstoriError
from .kahler_potential import PotentialPolynomial, load_potential
from .torus_geometry import embed, induced_geometry
from .torus_spectral import (
    apply_L0,
    apply_L0_adjoint,
    cokernel_basis,
    flat_inner,
    kernel_basis,
    q_roots,
    write_kernel_report,
)

log = logging.getLogger("hstori")

WORKERS_ENV = "HSTORI_WORKERS"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
BUILTIN_POTENTIALS = ("nondegenerate", "degenerate", "toric", "euclidean")


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    potential: str = "nondegenerate"
    rho: tuple = (0.02, 0.04, 0.08)
    r: tuple | None = None
    N: int = 32
    tau0: tuple = (0.0,) * 6
    tol: float = 1e-11
    gtol: float = 1e-9
    cert_tol: float = 1e-8
    sweep_delta: float = 0.02
    sweep_count: int = 5
    out: str = "results"
    base_dir: str = field(default=".", compare=False)

    def validate(self) -> "RunConfig":
        if self.N % 2 or not 16 <= self.N <= 256:
            raise ConfigError(f"N must be even and in [16, 256], got {self.N}")
        if not self.rho or any(not 0 < x <= 0.15 for x in self.rho):
            raise ConfigError(f"rho values must lie in (0, 0.15], got {self.rho}")
        if min(self.tol, self.gtol, self.cert_tol) < 1e-12:
            raise ConfigError("tolerances must be >= 1e-12")
        if self.r is not None and (len(self.r) != 2 or min(self.r) <= 0):
            raise ConfigError(f"radii must be two positive numbers, got {self.r}")
        if len(self.tau0) != 6:
            raise ConfigError("tau0 must have six entries")
        if not 0 <= self.sweep_delta <= 0.05 or self.sweep_count < 1:
            raise ConfigError("sweep needs 0 <= delta <= 0.05 and count >= 1")
        return self

    def load(self):
        """``(potential, r)`` with built-in default radii when ``r`` is unset."""
        name = self.potential
        if name == "nondegenerate":
            pot, r = fixtures.nondegenerate_fixture()
        elif name == "degenerate":
            pot, r = fixtures.degenerate_fixture()
        elif name == "toric":
            pot, r = fixtures.toric_quartic(), fixtures.NONDEGENERATE_RADII
        elif name == "euclidean":
            pot, r = PotentialPolynomial.euclidean(), fixtures.NONDEGENERATE_RADII
        else:
            path = Path(name)
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            if not path.exists():
                raise ConfigError(f"potential file not found: {path}")
            try:
                pot = load_potential(path, rho=1.0)
            except (HstoriError, KeyError, TypeError, ValueError, yaml.YAMLError) as exc:
                raise ConfigError(f"cannot read potential {path}: {exc}") from exc
            r = fixtures.NONDEGENERATE_RADII
        return pot, tuple(float(x) for x in (self.r or r))


def _listify(x):
    return tuple(float(v) for v in (x if isinstance(x, (list, tuple)) else [x]))


def build_config(args) -> RunConfig:
    data = {}
    base = "."
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        base = str(path.parent)
    known = {"potential", "rho", "r", "N", "tau0", "tol", "gtol", "cert_tol", "sweep", "out"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = RunConfig(args.command, base_dir=base)
        sweep = data.get("sweep") or {}
        cfg = replace(
            cfg,
            potential=str(data.get("potential", cfg.potential)),
            rho=_listify(data["rho"]) if "rho" in data else cfg.rho,
            r=_listify(data["r"]) if data.get("r") is not None else None,
            N=int(data.get("N", cfg.N)),
            tau0=_listify(data["tau0"]) if "tau0" in data else cfg.tau0,
            tol=float(data.get("tol", cfg.tol)),
            gtol=float(data.get("gtol", cfg.gtol)),
            cert_tol=float(data.get("cert_tol", cfg.cert_tol)),
            sweep_delta=float(sweep.get("delta", cfg.sweep_delta)),
            sweep_count=int(sweep.get("count", cfg.sweep_count)),
            out=str(data.get("out", cfg.out)),
        )
        overrides = {}
        for key in ("potential", "N", "tol", "gtol", "out"):
            val = getattr(args, key, None)
            if val is not None:
                overrides[key] = val
        if getattr(args, "rho", None):
            overrides["rho"] = tuple(args.rho)
        if getattr(args, "r", None):
            overrides["r"] = tuple(args.r)
        cfg = replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


class Report:
    """Structured ``key: value`` report, written once at the end of a run."""

    def __init__(self, title: str):
        self.lines = [f"# {title}"]

    def section(self, name: str):
        self.lines.append(f"[{name}]")

    def add(self, key: str, value):
        if isinstance(value, (np.ndarray, list, tuple)):
            value = "[" + ", ".join(f"{float(v):.6e}" for v in np.ravel(value)) + "]"
        elif isinstance(value, (float, np.floating)):
            value = f"{float(value):.6e}"
        self.lines.append(f"  {key}: {value}")

    def write(self, out: Path):
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text("\n".join(self.lines) + "\n")


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating, int, np.integer)) else x for x in row])


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from exc


def _map(fn, items):
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def _slope(xs, ys) -> float:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(xs) < 2 or np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# ---------------------------------------------------------------- subcommands

def cmd_verify_flat(cfg: RunConfig) -> int:
    pot = PotentialPolynomial.euclidean()
    r = cfg.r or fixtures.NONDEGENERATE_RADII
    st = induced_geometry(embed(r, None, cfg.N), pot)
    r1, r2 = r
    h_exact = np.diag([r1**2, r2**2])[:, :, None, None]
    B_exact = np.zeros((2, 2, 2, 1, 1))
    B_exact[0, 0, 0], B_exact[1, 1, 1] = r1**2, r2**2
    checks = {
        "h": float(np.abs(st.h - h_exact).max()),
        "B": float(np.abs(st.B - B_exact).max()),
        "H": float(np.abs(st.H - 1.0).max()),
        "divH": float(np.abs(st.divH).max()),
        "omega_pullback": float(np.abs(st.pullback).max()),
    }
    rep = Report("verify-flat")
    rep.add("r", r)
    rep.add("N", cfg.N)
    rep.add("H_mean", [st.H[0].mean(), st.H[1].mean()])
    ok = True
    for k, v in checks.items():
        passed = v <= 1e-10
        ok &= passed
        rep.add(f"{k}_error", f"{v:.3e} {'PASS' if passed else 'FAIL'}")
    rep.add("status", "PASS" if ok else "FAIL")
    out = Path(cfg.out)
    rep.write(out)
    st.to_csv(out / "flat_torus.csv")
    return EXIT_OK if ok else EXIT_FAIL


def adjoint_identity_check(r, N: int, pairs: int = 100, seed: int = 0, kmax: int = 6) -> float:
    """Max relative gap of ``<L0 x, y> = <x, L0* y>`` over random band-limited pairs."""
    rng = np.random.default_rng(seed)
    from .torus_spectral import SpectralField

    def rand_field():
        c = np.zeros((N, N), complex)
        k = np.r_[0 : kmax + 1, N - kmax : N]
        c[np.ix_(k, k)] = rng.normal(size=(k.size, k.size)) + 1j * rng.normal(size=(k.size, k.size))
        v = np.fft.ifft2(c).real
        return SpectralField(v - v.mean())

    worst = 0.0
    for _ in range(pairs):
        x = (rand_field(), rand_field())
        y = (rand_field(), rand_field())
        lhs = flat_inner(apply_L0(*x, r), y, r)
        rhs = flat_inner(x, apply_L0_adjoint(*y, r), r)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return worst


def cmd_kernel(cfg: RunConfig) -> int:
    r = cfg.r or fixtures.NONDEGENERATE_RADII
    roots, _ = q_roots(r, nmax=20)
    expected = {(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)}
    kern = max(max(p.sup(), q.sup()) for p, q in (apply_L0(u, v, r) for u, v in kernel_basis(r, cfg.N)))
    cok = max(
        max(p.sup(), q.sup()) for p, q in (apply_L0_adjoint(a, b, r) for a, b in cokernel_basis(r).elements(cfg.N))
    )
    adj = adjoint_identity_check(r, cfg.N)
    checks = {
        "roots": set(map(tuple, roots)) == expected,
        "kernel_residual": kern <= 1e-12,
        "cokernel_residual": cok <= 1e-12,
        "adjoint_identity": adj <= 1e-10,
    }
    rep = Report("kernel")
    rep.add("r", r)
    rep.add("roots", " ".join(f"({a},{b})" for a, b in sorted(map(tuple, roots))))
    rep.add("kernel_residual", kern)
    rep.add("cokernel_residual", cok)
    rep.add("adjoint_max_relative_gap", adj)
    for k, v in checks.items():
        rep.add(k, "PASS" if v else "FAIL")
    ok = all(checks.values())
    rep.add("status", "PASS" if ok else "FAIL")
    out = Path(cfg.out)
    rep.write(out)
    write_kernel_report(out / "symbol.csv", r)
    return EXIT_OK if ok else EXIT_FAIL


def _solve_point(args):
    """Full pipeline at one ``rho``; returns a plain dict (picklable)."""
    from .errors import DegenerateCriticalPointError
    from .ls_solver import certify, find_frame

    pot, r, rho, cfg = args
    t0 = time.perf_counter()
    try:
        res = find_frame(pot, rho, r, np.array(cfg.tau0), gtol=cfg.gtol, tol=cfg.tol, N=cfg.N)
    except DegenerateCriticalPointError as exc:
        return {"rho": rho, "status": "degenerate", "error": str(exc)}
    except HstoriError as exc:
        return {"rho": rho, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    u, v = res.fields
    cert = certify(u, v, pot, rho, r, res.frame, tol=cfg.cert_tol, raise_on_fail=False)
    return {
        "rho": rho,
        "status": "certified" if cert.passed else "uncertified",
        "iterations": res.report.iterations,
        "newton_steps": res.iterations,
        "residual_sup": res.report.residual_sup,
        "norm_uv": res.report.norm_uv,
        "tau": res.frame.tau,
        "tau_norm": float(np.linalg.norm(res.frame.tau - np.array(cfg.tau0))),
        "G_norm": float(np.linalg.norm(res.G)),
        "b": res.report.components.b,
        "cert": cert.breakdown,
        "time": time.perf_counter() - t0,
    }


def cmd_solve(cfg: RunConfig) -> int:
    pot, r = cfg.load()
    results = _map(_solve_point, [(pot, r, rho, cfg) for rho in cfg.rho])
    rep = Report("solve")
    rep.add("potential", cfg.potential)
    rep.add("r", r)
    rows = []
    ok = True
    for res in results:
        rep.section(f"rho={res['rho']}")
        rep.add("status", res["status"])
        if "error" in res:
            rep.add("diagnostic", res["error"])
            ok = False
            continue
        ok &= res["status"] == "certified"
        for key in ("iterations", "newton_steps", "residual_sup", "norm_uv", "tau", "tau_norm", "G_norm", "b", "time"):
            rep.add(key, res[key])
        for key, val in res["cert"].items():
            rep.add(f"cert_{key}", val)
        rows.append([res["rho"], res["norm_uv"], res["tau_norm"], res["G_norm"], res["residual_sup"], *res["tau"],
                     res["cert"]["divH_sup"], res["cert"]["pullback_sup"], res["cert"]["a"]])
    if len(rows) >= 2:
        rho = [x[0] for x in rows]
        rep.section("slopes")
        rep.add("norm_uv_slope", _slope(rho, [x[1] for x in rows]))
        rep.add("tau_slope", _slope(rho, [x[2] for x in rows]))
    rep.add("status", "PASS" if ok else "FAIL")
    out = Path(cfg.out)
    rep.write(out)
    _write_csv(out / "solve.csv",
               ["rho", "norm_uv", "tau_norm", "G_norm", "residual_sup", *[f"tau{i+1}" for i in range(6)],
                "divH_sup", "pullback_sup", "a"], rows)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(cfg: RunConfig) -> int:
    from .ls_solver import sweep_radii

    pot, r = cfg.load()
    rho = cfg.rho[0]
    res = sweep_radii(pot, rho, r, cfg.sweep_delta, cfg.sweep_count, np.array(cfg.tau0),
                      gtol=cfg.gtol, tol=cfg.tol, N=cfg.N)
    rep = Report("sweep")
    rep.add("rho", rho)
    rep.add("centre", r)
    rows = []
    for p in res.points:
        c = p.certificate
        rows.append([*p.r, p.norm_uv, *p.frame.tau, p.critical_gradient, c.divH_sup, c.pullback_sup, int(c.passed)])
        rep.section(f"r={p.r[0]:.6f},{p.r[1]:.6f}")
        rep.add("tau", p.frame.tau)
        rep.add("norm_uv", p.norm_uv)
        rep.add("certified", c.passed)
        rep.add("f_r_critical_gradient", p.critical_gradient)
    ok = res.all_certified and res.continuous()
    rep.add("truncated", res.truncated)
    rep.add("continuous", res.continuous())
    rep.add("status", "PASS" if ok else "FAIL")
    out = Path(cfg.out)
    rep.write(out)
    _write_csv(out / "sweep.csv",
               ["r1", "r2", "norm_uv", *[f"tau{i+1}" for i in range(6)], "fr_grad", "divH_sup", "pullback_sup", "certified"],
               rows)
    return EXIT_OK if ok else EXIT_FAIL


def cmd_cp2(cfg: RunConfig) -> int:
    spec = cp2.HopfTorusSpec.equilateral()
    expected_h = np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3
    vol = cp2.hopf_volume(spec)
    generic = cp2.HopfTorusSpec(np.array([0.3, 0.5]))
    gen = cp2.verify_stationary(generic)
    eq = cp2.verify_stationary(spec)
    checks = {
        "metric": float(np.abs(cp2.hopf_metric(spec) - expected_h).max()) <= 1e-12,
        "second_form_111": abs(cp2.hopf_second_form(spec)[0, 0, 0]) <= 1e-12,
        "volume": abs(vol - 1 / (3 * np.sqrt(3))) <= 1e-12,
        "lattice_volume": abs(cp2.lattice_volume(generic) - cp2.hopf_volume(generic)) <= 1e-12,
        "divergence_zero": gen.divergence == 0.0 and eq.divergence == 0.0,
        "not_minimal": gen.mean_curvature_norm > 1e-6,
        "contraction_agrees": eq.contraction_gap <= 1e-14 and gen.contraction_gap <= 1e-12,
    }
    rep = Report("cp2")
    rep.add("equilateral_volume", vol)
    rep.add("generic_H", gen.mean_curvature)
    for k, v in checks.items():
        rep.add(k, "PASS" if v else "FAIL")
    ok = all(checks.values())
    rep.add("status", "PASS" if ok else "FAIL")
    out = Path(cfg.out)
    rep.write(out)
    _write_csv(out / "cp2_grid.csv", ["r1", "r2", "volume", "H_norm"], cp2.radius_grid_rows())
    return EXIT_OK if ok else EXIT_FAIL


def _predict_point(args):
    from .ls_solver import G, predict_G_action, predict_G_leading

    pot, r, rho, cfg = args
    tau = np.array(cfg.tau0)
    g = G(pot, rho, r, tau, tol=cfg.tol, N=cfg.N)
    lead = predict_G_leading(pot, rho, r, tau)
    act = predict_G_action(pot, rho, r, tau, N=cfg.N)
    return rho, g, lead, act


def cmd_predict(cfg: RunConfig) -> int:
    pot, r = cfg.load()
    results = _map(_predict_point, [(pot, r, rho, cfg) for rho in cfg.rho])
    rep = Report("predict")
    rep.add("r", r)
    rep.add("tau0", cfg.tau0)
    rows = []
    for rho, g, lead, act in results:
        gn = max(np.linalg.norm(g), 1e-300)
        rel_l = np.linalg.norm(g - lead) / gn
        rel_a = np.linalg.norm(g - act) / gn
        rep.section(f"rho={rho}")
        rep.add("G", g)
        rep.add("leading", lead)
        rep.add("action_corrected", act)
        rep.add("relative_error_leading", rel_l)
        rep.add("relative_error_action", rel_a)
        rows.append([rho, *g, *lead, *act, rel_l, rel_a])
    out = Path(cfg.out)
    rep.write(out)
    _write_csv(out / "predict.csv",
               ["rho", *[f"G{i+1}" for i in range(6)], *[f"lead{i+1}" for i in range(6)],
                *[f"act{i+1}" for i in range(6)], "rel_leading", "rel_action"], rows)
    return EXIT_OK


COMMANDS = {
    "verify-flat": cmd_verify_flat,
    "kernel": cmd_kernel,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "cp2": cmd_cp2,
    "predict": cmd_predict,
}


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hstori", description="Perturbed Hamiltonian stationary tori.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML run config")
        s.add_argument("--out", help="output directory")
        s.add_argument("--N", type=int)
        s.add_argument("--r", type=float, nargs=2)
        s.add_argument("--rho", type=float, nargs="+")
        s.add_argument("--potential")
        s.add_argument("--tol", type=float)
        s.add_argument("--gtol", type=float)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HstoriError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
