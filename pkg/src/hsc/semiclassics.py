"""Quantisation maps and the hbar -> 0 comparison harness.

Toeplitz (anti-Wick) quantisation of a radial classical state is handled via
its density, which is the classical density smoothed by ``G_{hbar/2}``.  The
Wigner transform of a radial quantum state is sampled pointwise by tensor
Gauss-Legendre quadrature of the off-diagonal kernel.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import eval_legendre

from . import casimir as cas
from .classical import ClassicalState, classical_functionals, solve_classical
from .errors import HscError, InvalidArgument
from .quantum import (QuantumState, SCFControls, assemble_density, occupations,
                      quantum_functionals, scf_solve)
from .radial import FOUR_PI, RadialField, gaussian_convolve_radial, integrate_radial, radial_weights
from .spectral import ChannelSpectrum, solve_all_channels, weyl_ratio

log = logging.getLogger(__name__)

HOLDER_ALPHA = 0.1


@dataclass(frozen=True)
class PhasePoint:
    q_norm: float
    p_norm: float
    cos_angle: float

    def __post_init__(self):
        if self.q_norm < 0 or self.p_norm < 0:
            raise InvalidArgument("phase-point norms must be nonnegative")
        if not -1.0 <= self.cos_angle <= 1.0:
            raise InvalidArgument("cos_angle must lie in [-1, 1]")

    def vectors(self):
        sin = math.sqrt(max(0.0, 1.0 - self.cos_angle ** 2))
        q = np.array([self.q_norm, 0.0, 0.0])
        p = self.p_norm * np.array([self.cos_angle, sin, 0.0])
        return q, p


# --- Toeplitz quantisation -------------------------------------------------

def toeplitz_density(f_state: ClassicalState, hbar: float) -> RadialField:
    """Density of ``Op^T_hbar[f]``: ``G_{hbar/2} * rho_f``."""
    if not hbar > 0:
        raise InvalidArgument("hbar must be positive")
    return gaussian_convolve_radial(f_state.rho, 0.5 * hbar)


def coherent_width(hbar: float, n_nodes: int = 8) -> float:
    """``int x^2 |phi^hbar(x)|^2 dx`` in one dimension, by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    # |phi|^2 = (pi hbar)^(-1/2) exp(-x^2/hbar); substitute x = sqrt(hbar) y
    return float(np.sum(w * hbar * x * x) / math.sqrt(math.pi))


def toeplitz_kinetic_check(f_state: ClassicalState, hbar: float):
    """``(Tr^hbar(-hbar^2 Lap Op^T[f]), int |p|^2 f, gap, mass)``.

    Each Cartesian direction adds ``int (x_j - q_j)^2 |phi|^2 dx`` per unit of
    phase-space mass to the classical second moment.  ``mass`` is the grid
    quadrature of the density, the same one the moments use.
    """
    mass = integrate_radial(f_state.rho)
    if mass == 0:
        return 0.0, 0.0, 0.0, 0.0
    second = 2.0 * classical_functionals(f_state)["kinetic"]
    quantized = second + 3.0 * coherent_width(hbar) * mass
    return quantized, second, quantized - second, mass


def _gaussian_params(A, var_q, var_p):
    if var_q <= 0 or var_p <= 0:
        raise InvalidArgument("Gaussian variances must be positive")
    return float(A), float(var_q), float(var_p)


def wigner_of_toeplitz_gaussian(q, p, A, var_q, var_p, hbar):
    """``W_hbar[Op^T_hbar[f]]`` for ``f = A exp(-|q|^2/2 var_q - |p|^2/2 var_p)``.

    Built from the operator kernel: the p-integral of the coherent-state
    superposition gives a Gaussian in ``x - x'``, the q-integral one in
    ``(x + x')/2``, and the Wigner y-integral is Gaussian again.
    """
    q, p = np.atleast_2d(q), np.atleast_2d(p)
    a1, a2 = 1.0 / (2.0 * var_q), 1.0 / hbar
    c = a1 * a2 / (a1 + a2)
    b = 1.0 / (4.0 * hbar) + var_p / (2.0 * hbar ** 2)
    pref = ((2.0 * math.pi * hbar) ** -1 * (math.pi * hbar) ** -0.5 * math.sqrt(2.0 * math.pi * var_p)
            * math.sqrt(math.pi / (a1 + a2)) * math.sqrt(math.pi / b))
    expo = -c * np.sum(q * q, axis=-1) - np.sum(p * p, axis=-1) / (4.0 * b * hbar ** 2)
    return A * pref ** 3 * np.exp(expo)


def smoothed_gaussian(q, p, A, var_q, var_p, hbar):
    """``G^6_{hbar/2} * f`` for the same Gaussian ``f`` (variance addition)."""
    q, p = np.atleast_2d(q), np.atleast_2d(p)
    sq, sp = var_q + 0.5 * hbar, var_p + 0.5 * hbar
    amp = A * (var_q / sq) ** 1.5 * (var_p / sp) ** 1.5
    return amp * np.exp(-np.sum(q * q, axis=-1) / (2 * sq) - np.sum(p * p, axis=-1) / (2 * sp))


def _phase_grid(n=20, shift=0.0):
    """Fixed deterministic set of ``n`` points in R^6 (q shifted along e_1)."""
    t = np.arange(n, dtype=float)
    q = np.stack([0.13 * t + shift, 0.4 * np.sin(t), 0.3 * np.cos(1.7 * t)], axis=1)
    p = np.stack([0.5 * np.cos(t), 0.07 * t, -0.2 * np.sin(2.3 * t)], axis=1)
    return q, p


def wigner_toeplitz_identity_check(gaussian_f_params, hbar: float, shift: float = 0.0) -> float:
    """Max over a fixed 20-point phase grid of ``|W[Op^T f] - G_{hbar/2} * f|``."""
    A, vq, vp = _gaussian_params(*gaussian_f_params)
    if A == 0:
        return 0.0
    q, p = _phase_grid(20, shift)
    lhs = wigner_of_toeplitz_gaussian(q, p, A, vq, vp, hbar)
    rhs = smoothed_gaussian(q, p, A, vq, vp, hbar)
    return float(np.max(np.abs(lhs - rhs)))


# --- Wigner transform of radial states -------------------------------------

@dataclass
class WignerSamples:
    values: np.ndarray
    warnings: list = field(default_factory=list)


def support_radius(state: QuantumState, rel: float = 1e-16) -> float:
    rho = state.rho.values
    if rho.size == 0 or np.max(rho) <= 0:
        return 0.0
    idx = np.nonzero(rho > rel * np.max(rho))[0]
    return float(min(state.grid.r_max, state.grid.nodes[idx[-1]] + state.grid.h))


class _RadialKernel:
    """Evaluates ``gamma(x, x')`` of a radial state from splined reduced vectors."""

    def __init__(self, state: QuantumState):
        r = np.concatenate([[0.0], state.grid.nodes, [state.grid.r_max]])
        self.r_max = state.grid.r_max
        self.blocks = []
        for ch, lam in zip(state.channels, state.occupations):
            keep = lam > 0
            if not np.any(keep):
                continue
            u = ch.eigenvectors[keep]
            pad = np.zeros((u.shape[0], 1))
            spl = CubicSpline(r, np.hstack([pad, u, pad]), axis=1)
            self.blocks.append((ch.ell, lam[keep], spl, spl.derivative()(0.0)))

    def _radial(self, spl, d0, rr):
        out = np.empty((d0.size, rr.size))
        small = rr < 1e-10
        big = ~small & (rr < self.r_max)
        out[:, small] = d0[:, None]
        out[:, big] = spl(rr[big]) / rr[big]
        out[:, rr >= self.r_max] = 0.0
        return out

    def __call__(self, x1, x2):
        r1 = np.linalg.norm(x1, axis=1)
        r2 = np.linalg.norm(x2, axis=1)
        denom = r1 * r2
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(denom > 0, np.sum(x1 * x2, axis=1) / denom, 1.0)
        cos = np.clip(cos, -1.0, 1.0)
        total = np.zeros(r1.size)
        for ell, lam, spl, d0 in self.blocks:
            R1 = self._radial(spl, d0, r1)
            R2 = self._radial(spl, d0, r2)
            g = np.sum(lam[:, None] * R1 * R2, axis=0)
            total += (2 * ell + 1) / FOUR_PI * eval_legendre(ell, cos) * g
        return total


def _wigner_one(kernel, q, p, hbar, L, n, chunk=16384):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = L * x, L * w
    Y = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    Wt = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
    total = 0.0
    for s in range(0, Y.shape[0], chunk):
        y = Y[s:s + chunk]
        g = kernel(q + 0.5 * y, q - 0.5 * y)
        total += float(np.sum(Wt[s:s + chunk] * g * np.cos(y @ p / hbar)))
    return total


def wigner_sample(state: QuantumState, points: Sequence[PhasePoint], n_nodes: Optional[int] = None,
                  check: bool = True) -> WignerSamples:
    """``W_hbar[Q](q, p) = int gamma(q + y/2, q - y/2) exp(-i p.y/hbar) dy`` at given points.

    The kernel is real and symmetric, so only the cosine part survives.  The
    y-integral runs over the cube of half-width ``L = 2 R_support``; the node
    count per axis grows like ``L / hbar`` since orbitals vary on that scale.
    """
    hbar = state.hbar
    kernel = _RadialKernel(state)
    out = np.zeros(len(points))
    warns = []
    if not kernel.blocks:
        return WignerSamples(out, warns)
    L = 2.0 * support_radius(state)
    n = n_nodes or min(256, max(32, int(math.ceil(8.0 / hbar)), int(math.ceil(4.0 * L / hbar))))
    scale = 8.0 * state.max_occupation()
    for i, pt in enumerate(points):
        q, p = pt.vectors()
        val = _wigner_one(kernel, q, p, hbar, L, n)
        if check:
            fine = _wigner_one(kernel, q, p, hbar, L, int(math.ceil(1.5 * n)))
            if abs(fine - val) > 1e-6 * scale:
                warns.append(f"point {i}: refinement disagreement {abs(fine - val):.3g}")
            val = fine
        out[i] = val
    return WignerSamples(out, warns)


# --- cross constructions ---------------------------------------------------

def build_gamma_from_classical(classical: ClassicalState, hbar: float) -> QuantumState:
    """``beta_tilde(-mu - (-hbar^2/2 Lap - U))`` with the classical ``U`` and ``mu`` frozen."""
    U, mu = classical.U, classical.mu
    channels = solve_all_channels(U, hbar, -mu)
    warns = () if channels else ("no bound states below -mu",)
    occ = occupations(channels, mu, classical.family)
    rho = assemble_density(channels, occ, hbar, U.grid)
    return QuantumState(hbar, classical.family, mu, tuple(channels), tuple(occ), U, rho,
                        label="auxiliary state from classical minimizer", warnings=warns)


def build_f_from_quantum(quantum: QuantumState) -> ClassicalState:
    """``beta_tilde(-mu_hbar - |p|^2/2 + U_hbar(q))`` with ``U_hbar``, ``mu_hbar`` frozen."""
    fam, U, mu = quantum.family, quantum.U, quantum.mu_h
    r = U.grid.nodes
    w = np.clip(U.values - mu, 0.0, None)
    rho = RadialField(U.grid, cas.momentum_moment(fam, w, "density"))
    inside = np.nonzero(U.values > mu)[0]
    if inside.size == 0:
        R0 = 0.0
    elif inside[-1] + 1 < r.size:
        i = inside[-1]
        u0, u1 = U.values[i] - mu, U.values[i + 1] - mu
        R0 = float(r[i] + (r[i + 1] - r[i]) * u0 / (u0 - u1))
    else:
        R0 = float(U.grid.r_max)
    return ClassicalState(fam, mu, U, rho, R0, float(U.values[0] - mu), integrate_radial(rho),
                          ("auxiliary distribution from quantum minimizer",))


def compare_potentials(U_h: RadialField, U: RadialField):
    """``(||grad(U_h - U)||_L2, sup |U_h - U|, C^{0,1/10} seminorm)`` on the grid."""
    if U_h.grid != U.grid:
        raise InvalidArgument("potentials live on different grids")
    grid = U.grid
    D = U_h.values - U.values
    dD = np.gradient(D, grid.h)
    grad = math.sqrt(float(np.sum(radial_weights(grid) * dD * dD)))
    sup = float(np.max(np.abs(D)))
    kmax = min(grid.n - 1, int(math.floor(1.0 / grid.h + 1e-9)))
    holder = 0.0
    for k in range(1, kmax + 1):
        diff = np.abs(D[k:] - D[:-k])
        holder = max(holder, float(np.max(diff)) / (k * grid.h) ** HOLDER_ALPHA)
    return grad, sup, holder


# --- sweeps ----------------------------------------------------------------

CSV_FIELDS = ("hbar", "J_quantum", "J_classical", "mu_h", "mu", "mass_err", "grad_L2_dist",
              "sup_dist", "holder_dist", "weyl_ratio_at_mu", "pohozaev_kin", "pohozaev_pot",
              "lt_endpoint", "lt_dual", "J_gamma_h", "J_f_h", "scf_iters")

NAN = float("nan")


@dataclass
class SweepRecord:
    hbar: float
    J_quantum: float = NAN
    J_classical: float = NAN
    mu_h: float = NAN
    mu: float = NAN
    mass_err: float = NAN
    grad_L2_dist: float = NAN
    sup_dist: float = NAN
    holder_dist: float = NAN
    weyl_ratio_at_mu: float = NAN
    pohozaev_kin: float = NAN
    pohozaev_pot: float = NAN
    lt_endpoint: float = NAN
    lt_dual: float = NAN
    J_gamma_h: float = NAN
    J_f_h: float = NAN
    scf_iters: float = NAN
    mass_gamma_h: float = NAN
    mass_f_h: float = NAN
    tr_q2: float = NAN
    tr_q3: float = NAN
    U_sup: float = NAN
    occupied_levels: float = NAN
    error: str = ""

    def csv_row(self):
        return [getattr(self, k) for k in CSV_FIELDS]

    def ok(self) -> bool:
        return not self.error


def _nan_if_none(x):
    return NAN if x is None else float(x)


def sweep_row(classical: ClassicalState, J_classical: float, state: QuantumState, M: float) -> SweepRecord:
    rep = quantum_functionals(state)
    grad, sup, hold = compare_potentials(state.U, classical.U)
    try:
        weyl = weyl_ratio(state.U, state.hbar, state.mu_h)
    except HscError:
        weyl = NAN
    gamma = build_gamma_from_classical(classical, state.hbar)
    g_rep = quantum_functionals(gamma, diagnostics=False)
    f_state = build_f_from_quantum(state)
    f_rep = classical_functionals(f_state)
    return SweepRecord(
        hbar=state.hbar, J_quantum=rep.J, J_classical=J_classical, mu_h=state.mu_h,
        mu=classical.mu, mass_err=abs(rep.mass - M), grad_L2_dist=grad, sup_dist=sup,
        holder_dist=hold, weyl_ratio_at_mu=weyl,
        pohozaev_kin=_nan_if_none(rep.pohozaev_res_kinetic),
        pohozaev_pot=_nan_if_none(rep.pohozaev_res_potential),
        lt_endpoint=_nan_if_none(rep.lt_endpoint_ratio), lt_dual=_nan_if_none(rep.lt_dual_ratio),
        J_gamma_h=g_rep.J, J_f_h=f_rep["J"], scf_iters=state.scf_iters,
        mass_gamma_h=g_rep.mass, mass_f_h=f_rep["mass"], tr_q2=rep.schatten[2.0],
        tr_q3=rep.schatten[3.0], U_sup=state.U.sup(), occupied_levels=state.occupied_levels())


@dataclass
class SweepResult:
    classical: ClassicalState
    J_classical: float
    records: list
    states: dict = field(default_factory=dict)


def run_sweep(family, M: float, hbars: Sequence[float], grid, controls: Optional[SCFControls] = None,
              warm_start: bool = True, classical: Optional[ClassicalState] = None) -> SweepResult:
    """One classical solve, then an SCF solve and comparison row per hbar (descending)."""
    hbars = [float(h) for h in hbars]
    if any(b >= a for a, b in zip(hbars[:-1], hbars[1:])):
        raise InvalidArgument("hbars must be strictly descending")
    classical = classical or solve_classical(family, M, grid)
    J_cl = classical_functionals(classical)["J"]
    records, states = [], {}
    U0 = classical.U
    for hb in hbars:
        try:
            st = scf_solve(family, hb, M, grid=grid, controls=controls, init="file", U0=U0)
            rec = sweep_row(classical, J_cl, st, M)
            states[hb] = st
            if warm_start:
                U0 = st.U
        except HscError as exc:
            log.warning("hbar=%g failed: %s", hb, exc)
            rec = SweepRecord(hbar=hb, J_classical=J_cl, mu=classical.mu, error=str(exc))
        records.append(rec)
    return SweepResult(classical, J_cl, records, states)


# --- temperature scan ------------------------------------------------------

@dataclass
class TemperatureRow:
    T: float
    J: float = NAN
    mu_h: float = NAN
    occupied_levels: int = -1
    scf_iters: int = 0
    error: str = ""


@dataclass
class TemperatureScan:
    hbar: float
    rows: list
    T_c_estimate: float
    T_c_censored: str
    T_star_estimate: float
    T_star_censored: bool


def _solve_at_T(family0, T, M, hbar, grid, controls, U0):
    fam = family0.with_temperature(T)
    if U0 is None:
        return scf_solve(fam, hbar, M, init="classical", grid=grid, controls=controls)
    return scf_solve(fam, hbar, M, init="file", U0=U0, controls=controls)


def temperature_scan(family0, M: float, hbar: float, T_grid: Sequence[float], grid,
                     controls: Optional[SCFControls] = None, refine_steps: int = 12) -> TemperatureScan:
    """SCF at ``beta = T beta0`` for each ``T``; estimates the pure-state and J<0 thresholds.

    ``T_c_estimate`` is the largest temperature whose state occupies a single
    radial level, refined by bisection against the next grid temperature.
    ``T_star_estimate`` is the largest scanned ``T`` with ``J < 0``, a lower
    bound that is censored when it is the last grid point.
    """
    Ts = [float(t) for t in T_grid]
    if any(b <= a for a, b in zip(Ts[:-1], Ts[1:])):
        raise InvalidArgument("T_grid must be strictly ascending")
    rows, states = [], []
    U0 = None
    for T in Ts:
        try:
            st = _solve_at_T(family0, T, M, hbar, grid, controls, U0)
            J = quantum_functionals(st, diagnostics=False).J
            rows.append(TemperatureRow(T, J, st.mu_h, st.occupied_levels(), st.scf_iters))
            states.append(st)
            U0 = st.U
        except HscError as exc:
            rows.append(TemperatureRow(T, error=str(exc)))
            states.append(None)

    pure = [i for i, r in enumerate(rows) if r.occupied_levels == 1]
    if not pure:
        T_c, cens = NAN, "below grid"
    else:
        i = pure[-1]
        if i == len(rows) - 1:
            T_c, cens = rows[i].T, "above grid"
        else:
            lo, hi = rows[i].T, rows[i + 1].T
            U_lo = states[i].U
            for _ in range(refine_steps):
                mid = 0.5 * (lo + hi)
                try:
                    st = _solve_at_T(family0, mid, M, hbar, grid, controls, U_lo)
                except HscError:
                    hi = mid
                    continue
                if st.occupied_levels() == 1:
                    lo, U_lo = mid, st.U
                else:
                    hi = mid
            T_c, cens = lo, ""
    neg = [r.T for r in rows if not r.error and r.J < 0]
    T_star = max(neg) if neg else NAN
    return TemperatureScan(hbar, rows, T_c, cens, T_star, bool(neg) and T_star == Ts[-1])


def sweep_field_names():
    return [f.name for f in fields(SweepRecord)]
