"""Command-line entry points: ``hsc <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import io as hio
from . import semiclassics as sc
from .casimir import CasimirFamily, require_admissible
from .classical import ClassicalState, classical_functionals, fixed_point_residual, solve_classical
from .errors import HscError, InvalidArgument
from .quantum import QuantumState, SCFControls, quantum_functionals, scf_multistart, scf_solve
from .radial import integrate_radial, make_grid
from .spectral import count_below, phase_volume, weyl_ratio

log = logging.getLogger("hsc")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INFEASIBLE = 0, 2, 3, 4


@dataclass
class RunConfig:
    command: str
    m: float = 2.0
    T: float = 1.0
    mass: float = 1.0
    r_max: float = 12.0
    n: int = 1600
    hbar: Optional[float] = None
    hbars: list = field(default_factory=list)
    controls: SCFControls = field(default_factory=SCFControls)
    init: str = "classical"
    state: Optional[str] = None
    out: Optional[str] = None

    def validate(self):
        for name in ("m", "T", "mass", "r_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgument(f"--{name.replace('_', '')} must be positive, got {v}")
        if self.hbar is not None and not self.hbar > 0:
            raise InvalidArgument(f"--hbar must be positive, got {self.hbar}")
        if any(not h > 0 for h in self.hbars):
            raise InvalidArgument("all hbar values must be positive")
        return self

    def family(self) -> CasimirFamily:
        fam = CasimirFamily.power_law(self.m, self.T)
        require_admissible(fam)
        return fam

    def grid(self):
        return make_grid(self.r_max, self.n)


def _floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InvalidArgument(f"bad number list {text!r}") from exc


def _tgrid(text: str) -> list:
    """``a:b:k`` -> k equally spaced temperatures from a to b inclusive."""
    try:
        a, b, k = text.split(":")
        a, b, k = float(a), float(b), int(k)
    except ValueError as exc:
        raise InvalidArgument(f"--tgrid must look like a:b:k, got {text!r}") from exc
    if not (0 < a < b) or k < 2:
        raise InvalidArgument("--tgrid needs 0 < a < b and k >= 2")
    return [float(t) for t in np.linspace(a, b, k)]


def _emit(pairs):
    for k, v in pairs:
        print(f"{k} = {hio.fmt(v)}")


def _load(path, kind=None):
    st = hio.read_state(path)
    if kind == "classical" and not isinstance(st, ClassicalState):
        raise InvalidArgument(f"{path} is not a classical state")
    if kind == "quantum" and not isinstance(st, QuantumState):
        raise InvalidArgument(f"{path} is not a quantum state")
    return st


def _boundary_warning(rho, where):
    vals = rho.values
    top = float(np.max(vals)) if vals.size else 0.0
    if top > 0 and vals[-1] > 1e-12 * top:
        log.warning("%s: density at r_max is %.3g of its maximum; consider a larger --rmax",
                    where, vals[-1] / top)


# --- commands ---------------------------------------------------------------

def cmd_solve_classical(cfg: RunConfig) -> int:
    fam = cfg.family()
    st = solve_classical(fam, cfg.mass, cfg.grid())
    if cfg.out:
        hio.write_state(st, cfg.out)
    fn = classical_functionals(st)
    _emit([("R0", st.R0), ("w0", st.w0), *fn.items(),
           ("virial_ratio", fn["potential_dd"] / fn["kinetic"]),
           ("fixed_point_residual", fixed_point_residual(st))])
    for note in st.notes:
        log.warning(note)
    return EXIT_OK


def _controls(ns) -> SCFControls:
    return SCFControls(alpha_mix=ns.alpha_mix, tol_rho=ns.tol_rho, max_iters=ns.max_iters)


def _report_quantum(st: QuantumState):
    rep = quantum_functionals(st)
    d = rep.as_dict()
    sch = d.pop("schatten")
    _emit([("hbar", st.hbar), *d.items(), ("J_pohozaev", rep.J_pohozaev),
           *((f"tr_Q^{k}", v) for k, v in sch.items()),
           ("occupied_levels", st.occupied_levels()), ("max_occupation", st.max_occupation()),
           ("scf_iters", st.scf_iters), ("residual", st.residual)])


def cmd_solve_quantum(cfg: RunConfig) -> int:
    fam = cfg.family()
    U0 = None
    if cfg.init == "file":
        if not cfg.state:
            raise InvalidArgument("--init file needs --state")
        U0 = _load(cfg.state).U
    if cfg.init == "multi":
        st = scf_multistart(fam, cfg.hbar, cfg.mass, cfg.grid(), cfg.controls)
    else:
        st = scf_solve(fam, cfg.hbar, cfg.mass, init=cfg.init, grid=cfg.grid(), controls=cfg.controls, U0=U0)
    _boundary_warning(st.rho, "solve-quantum")
    if cfg.out:
        hio.write_state(st, cfg.out)
    _report_quantum(st)
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, warm_start=True) -> int:
    if not cfg.hbars:
        raise InvalidArgument("--hbars is required")
    res = sc.run_sweep(cfg.family(), cfg.mass, cfg.hbars, cfg.grid(), cfg.controls, warm_start)
    text = hio.csv_text(sc.CSV_FIELDS, [r.csv_row() for r in res.records])
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    failed = [r for r in res.records if not r.ok()]
    for r in failed:
        log.warning("hbar=%s failed: %s", hio.fmt(r.hbar), r.error)
    return EXIT_NUMERIC if len(failed) == len(res.records) else EXIT_OK


def cmd_weyl(cfg: RunConfig, potential: Optional[str], E: float) -> int:
    if not cfg.hbars:
        raise InvalidArgument("--hbars is required")
    if not E > 0:
        raise InvalidArgument("--E must be positive")
    if cfg.state:
        U = _load(cfg.state).U
    elif potential == "coulomb":
        U = cfg.grid().sample(lambda r: 1.0 / r)
    else:
        raise InvalidArgument("give --potential coulomb or --state FILE")
    vol = phase_volume(U, E)
    rows = []
    for hb in cfg.hbars:
        rows.append([hb, count_below(U, hb, -E), vol, weyl_ratio(U, hb, E)])
    sys.stdout.write(hio.csv_text(["hbar", "count", "phase_volume", "ratio"], rows))
    return EXIT_OK


def cmd_diagnostics(cfg: RunConfig) -> int:
    if not cfg.state:
        raise InvalidArgument("--state is required")
    st = _load(cfg.state)
    if isinstance(st, QuantumState):
        _report_quantum(st)
    else:
        fn = classical_functionals(st)
        _emit([*fn.items(), ("virial_ratio", fn["potential_dd"] / fn["kinetic"]),
               ("fixed_point_residual", fixed_point_residual(st))])
    return EXIT_OK


def cmd_quantize(cfg: RunConfig) -> int:
    if not cfg.state:
        raise InvalidArgument("--state is required")
    st = _load(cfg.state, "classical")
    rho_t = sc.toeplitz_density(st, cfg.hbar)
    _, _, gap, mass = sc.toeplitz_kinetic_check(st, cfg.hbar)
    doc = {"schema": hio.SCHEMA, "kind": "toeplitz_density", "hbar": cfg.hbar,
           "grid": {"r_max": st.grid.r_max, "n": st.grid.n}, "rho": rho_t.values,
           "mass": integrate_radial(rho_t), "source_mass": mass}
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(hio.dumps(doc))
    _emit([("hbar", cfg.hbar), ("classical_mass", mass), ("quantized_mass", integrate_radial(rho_t)),
           ("kinetic_gap", gap), ("kinetic_gap_expected", 1.5 * cfg.hbar * mass)])
    return EXIT_OK


def cmd_wigner(cfg: RunConfig, points_path: Optional[str]) -> int:
    if not cfg.state or not points_path:
        raise InvalidArgument("--state and --points are required")
    st = _load(cfg.state, "quantum")
    try:
        header, rows = hio.read_csv(points_path)
        pts = [sc.PhasePoint(float(a), float(b), float(c)) for a, b, c in rows]
    except (OSError, ValueError, StopIteration) as exc:
        raise InvalidArgument(f"cannot read points file {points_path}: {exc}") from exc
    res = sc.wigner_sample(st, pts)
    for w in res.warnings:
        log.warning(w)
    out = [[p.q_norm, p.p_norm, p.cos_angle, v] for p, v in zip(pts, res.values)]
    text = hio.csv_text(["q_norm", "p_norm", "cos_angle", "W"], out)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_temperature_scan(cfg: RunConfig, T_grid) -> int:
    fam0 = cfg.family()
    scan = sc.temperature_scan(fam0, cfg.mass, cfg.hbar, T_grid, cfg.grid(), cfg.controls)
    rows = [[r.T, r.J, r.mu_h, r.occupied_levels, r.scf_iters, r.error] for r in scan.rows]
    text = hio.csv_text(["T", "J", "mu_h", "occupied_levels", "scf_iters", "error"], rows)
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"# T_c_estimate = {hio.fmt(scan.T_c_estimate)} {scan.T_c_censored}".rstrip(), file=sys.stderr)
    print(f"# T_star_estimate = {hio.fmt(scan.T_star_estimate)}"
          f"{' (censored at grid end)' if scan.T_star_censored else ''}", file=sys.stderr)
    if all(r.error for r in scan.rows):
        return EXIT_NUMERIC
    return EXIT_OK


# --- parser -----------------------------------------------------------------

def _add_model(p, hbar=False, hbars=False):
    p.add_argument("--m", type=float, default=2.0, help="power-law exponent, beta(s) = T s^m")
    p.add_argument("--T", type=float, default=1.0, help="temperature")
    p.add_argument("--mass", type=float, default=1.0)
    p.add_argument("--rmax", type=float, default=12.0)
    p.add_argument("--n", type=int, default=1600, help="interior grid nodes")
    if hbar:
        p.add_argument("--hbar", type=float, required=True)
    if hbars:
        p.add_argument("--hbars", type=str, required=True, help="comma separated")


def _add_scf(p):
    p.add_argument("--alpha-mix", type=float, default=0.3)
    p.add_argument("--tol-rho", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=500)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hsc", description="classical and quantum free-energy minimisers")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-classical")
    _add_model(p)
    p.add_argument("--out")

    p = sub.add_parser("solve-quantum")
    _add_model(p, hbar=True)
    _add_scf(p)
    p.add_argument("--init", choices=["classical", "ball", "file", "multi"], default="classical",
                   help="multi: classical and ball starts, lowest J kept")
    p.add_argument("--state")
    p.add_argument("--out")

    p = sub.add_parser("sweep")
    _add_model(p, hbars=True)
    _add_scf(p)
    p.add_argument("--cold", action="store_true", help="start every hbar from the classical potential")
    p.add_argument("--out")

    p = sub.add_parser("weyl")
    _add_model(p, hbars=True)
    p.add_argument("--potential", choices=["coulomb"])
    p.add_argument("--state")
    p.add_argument("--E", type=float, required=True)
    p.set_defaults(rmax=None, n=None)

    p = sub.add_parser("diagnostics")
    p.add_argument("--state", required=True)

    p = sub.add_parser("quantize")
    p.add_argument("--state", required=True)
    p.add_argument("--hbar", type=float, required=True)
    p.add_argument("--out")

    p = sub.add_parser("wigner")
    p.add_argument("--state", required=True)
    p.add_argument("--points", required=True, help="CSV with columns q_norm,p_norm,cos_angle")
    p.add_argument("--out")

    p = sub.add_parser("temperature-scan")
    _add_model(p, hbar=True)
    _add_scf(p)
    p.add_argument("--tgrid", required=True, help="a:b:k")
    p.add_argument("--out")
    return ap


def _config(ns) -> RunConfig:
    cfg = RunConfig(ns.command)
    for src, dst in (("m", "m"), ("T", "T"), ("mass", "mass"), ("rmax", "r_max"), ("n", "n"),
                     ("hbar", "hbar"), ("init", "init"), ("state", "state"), ("out", "out")):
        v = getattr(ns, src, None)
        if v is not None:
            setattr(cfg, dst, v)
    if ns.command == "weyl" and getattr(ns, "rmax", None) is None:
        # Coulomb levels below -E sit well inside r = 4 for E of order one
        cfg.r_max, cfg.n = 4.0, 20000
    if getattr(ns, "hbars", None):
        cfg.hbars = _floats(ns.hbars)
    if hasattr(ns, "alpha_mix"):
        cfg.controls = _controls(ns)
    return cfg.validate()


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _config(ns)
        cmd = ns.command
        if cmd == "solve-classical":
            return cmd_solve_classical(cfg)
        if cmd == "solve-quantum":
            return cmd_solve_quantum(cfg)
        if cmd == "sweep":
            return cmd_sweep(cfg, warm_start=not ns.cold)
        if cmd == "weyl":
            return cmd_weyl(cfg, ns.potential, ns.E)
        if cmd == "diagnostics":
            return cmd_diagnostics(cfg)
        if cmd == "quantize":
            return cmd_quantize(cfg)
        if cmd == "wigner":
            return cmd_wigner(cfg, ns.points)
        if cmd == "temperature-scan":
            return cmd_temperature_scan(cfg, _tgrid(ns.tgrid))
    except HscError as exc:
        kind = "invalid-argument" if isinstance(exc, InvalidArgument) else type(exc).__name__
        print(f"error ({kind}): {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error (invalid-argument): {exc}", file=sys.stderr)
        return EXIT_INPUT
    ap.error(f"unknown command {ns.command}")
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
