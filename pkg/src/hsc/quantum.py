"""Self-consistent quantum minimiser ``Q_hbar = beta_tilde(-mu_hbar - E_hat)``.

States are radial: the operator is stored through its partial-wave spectra
``e_{ell,j}``, reduced radial vectors ``u_{ell,j}`` and occupations
``lambda_{ell,j}``, each counted with multiplicity ``2 ell + 1``.  Traces carry
the semi-classical weight ``(2 pi hbar)^3``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import casimir as cas
from .classical import solve_classical
from .errors import InvalidArgument, MassUnreachable, NonConvergence
from .radial import (FOUR_PI, RadialField, RadialGrid, coulomb_energy, integrate_radial,
                     radial_weights, solve_poisson)
from .spectral import ChannelSpectrum, dual_lt_ratio, solve_all_channels

log = logging.getLogger(__name__)


def trace_weight(hbar: float) -> float:
    return (2.0 * math.pi * hbar) ** 3


@dataclass(frozen=True)
class QuantumState:
    hbar: float
    family: cas.CasimirFamily
    mu_h: float
    channels: tuple
    occupations: tuple
    U: RadialField
    rho: RadialField
    scf_iters: int = 0
    residual: float = float("nan")
    label: str = "self-consistent candidate minimizer"
    warnings: tuple = field(default=())

    @property
    def grid(self) -> RadialGrid:
        return self.U.grid

    @property
    def mass(self) -> float:
        return schatten_sum(self, 1.0)

    def levels(self):
        """Yield ``(ell, e, lambda, u)`` for every stored radial level."""
        for ch, lam in zip(self.channels, self.occupations):
            for e, l_, u in zip(ch.eigenvalues, lam, ch.eigenvectors):
                yield ch.ell, float(e), float(l_), u

    def occupied_levels(self) -> int:
        return int(sum(int(np.count_nonzero(lam > 0)) for lam in self.occupations))

    def max_occupation(self) -> float:
        vals = [float(np.max(lam)) for lam in self.occupations if len(lam)]
        return max(vals) if vals else 0.0


@dataclass
class SCFControls:
    alpha_mix: float = 0.3
    alpha_min: float = 0.01
    tol_rho: float = 1e-8
    tol_mu: float = 1e-9
    max_iters: int = 500


def occupations(channels: Sequence[ChannelSpectrum], mu_h: float, family) -> list:
    return [np.asarray(cas.beta_tilde(family, -mu_h - ch.eigenvalues), dtype=float)
            for ch in channels]


def _mass_at(channels, family, hbar, mu):
    s = 0.0
    for ch in channels:
        s += ch.multiplicity * float(np.sum(cas.beta_tilde(family, -mu - ch.eigenvalues)))
    return trace_weight(hbar) * s


def solve_chemical_potential(channels: Sequence[ChannelSpectrum], family, hbar: float,
                             M: float) -> float:
    """``mu`` in ``(0, -e_min]`` with ``(2 pi hbar)^3 sum (2l+1) beta_tilde(-mu - e) = M``."""
    if not M > 0:
        raise InvalidArgument("mass must be positive")
    bound = [ch for ch in channels if len(ch) and ch.eigenvalues[0] < 0]
    if not bound:
        raise MassUnreachable("no bound state below 0", 0.0)
    e_min = min(float(ch.eigenvalues[0]) for ch in bound)
    capacity = _mass_at(bound, family, hbar, 0.0)
    if capacity < M:
        raise MassUnreachable(
            f"bound states hold at most mass {capacity:.6g} < {M:.6g}", capacity)
    hi = -e_min
    f = lambda mu: _mass_at(bound, family, hbar, mu) - M
    if f(hi) >= 0:
        return hi
    mu = brentq(f, 0.0, hi, xtol=1e-15 * max(1.0, hi), rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(mu)


def assemble_density(channels: Sequence[ChannelSpectrum], occ: Sequence[np.ndarray],
                     hbar: float, grid: RadialGrid) -> RadialField:
    """``rho(r) = (2 pi hbar)^3 sum_l (2l+1)/(4 pi) sum_j lambda u^2 / r^2``."""
    acc = np.zeros(grid.n)
    for ch, lam in zip(channels, occ):
        if len(lam) == 0:
            continue
        acc += ch.multiplicity * (lam @ (ch.eigenvectors ** 2))
    r = grid.nodes
    return RadialField(grid, trace_weight(hbar) * acc / (FOUR_PI * r * r))


def _build_state(U: RadialField, family, hbar, M, mu_guess=None, **kw) -> QuantumState:
    # levels above -mu_guess/2 cannot be occupied unless mu halves in one pass
    e_max = 0.0 if mu_guess is None else -0.5 * mu_guess
    channels = solve_all_channels(U, hbar, e_max)
    try:
        mu = solve_chemical_potential(channels, family, hbar, M)
    except MassUnreachable:
        mu = None
    if mu is None or -mu >= e_max:
        channels = solve_all_channels(U, hbar, 0.0)
        mu = solve_chemical_potential(channels, family, hbar, M)
    occ = occupations(channels, mu, family)
    rho = assemble_density(channels, occ, hbar, U.grid)
    return QuantumState(hbar, family, mu, tuple(channels), tuple(occ), U, rho, **kw)


def _kinetic(state: QuantumState) -> float:
    """``Tr^hbar((-hbar^2/2) Laplacian Q)`` as the discrete quadratic form."""
    grid = state.grid
    h, r = grid.h, grid.nodes
    total = 0.0
    for ch, lam in zip(state.channels, state.occupations):
        if len(lam) == 0:
            continue
        u = ch.eigenvectors
        du = np.diff(u, axis=1, prepend=0.0, append=0.0)
        grad = np.sum(du * du, axis=1) / h
        cent = ch.ell * (ch.ell + 1) * np.sum(u * u / (r * r), axis=1) * h
        total += ch.multiplicity * float(lam @ (grad + cent))
    return trace_weight(state.hbar) * 0.5 * state.hbar ** 2 * total


def schatten_sum(state: QuantumState, alpha: float) -> float:
    s = sum(ch.multiplicity * float(np.sum(lam ** alpha))
            for ch, lam in zip(state.channels, state.occupations))
    return trace_weight(state.hbar) * s


def schatten_trace(state: QuantumState, alpha: float) -> float:
    """``Tr^hbar(Q^alpha)``."""
    if alpha < 1:
        raise InvalidArgument("Schatten exponent must be >= 1")
    return schatten_sum(state, alpha)


def _trace_of(state: QuantumState, fn) -> float:
    s = 0.0
    for ch, lam in zip(state.channels, state.occupations):
        if len(lam):
            s += ch.multiplicity * float(np.sum(fn(lam)))
    return trace_weight(state.hbar) * s


def free_energy(state: QuantumState) -> float:
    kin = _kinetic(state)
    cas_ = _trace_of(state, lambda lam: np.asarray(cas.beta(state.family, lam)))
    pdd = coulomb_energy(state.rho, state.rho)
    return kin - 0.5 * pdd + cas_


def scf_solve(family, hbar: float, M: float, init: str = "classical",
              grid: Optional[RadialGrid] = None, controls: Optional[SCFControls] = None,
              U0: Optional[RadialField] = None) -> QuantumState:
    """Damped fixed-point iteration for the quantum minimiser at mass ``M``.

    ``init`` is ``"classical"`` (potential of the classical minimiser),
    ``"ball"`` (uniform ball of radius ``r_max/4``) or ``"file"`` (``U0``).
    """
    if not hbar > 0 or not M > 0:
        raise InvalidArgument("hbar and M must be positive")
    cas.require_admissible(family)
    controls = controls or SCFControls()
    if init == "file" or U0 is not None:
        if U0 is None:
            raise InvalidArgument("init='file' needs an initial potential")
        U = U0
        grid = U0.grid
    elif grid is None:
        raise InvalidArgument("a grid is required")
    elif init == "classical":
        U = solve_classical(family, M, grid).U
    elif init == "ball":
        R = grid.r_max / 4.0
        rho = grid.sample(lambda r: np.where(r <= R, 3.0 * M / (FOUR_PI * R ** 3), 0.0))
        U = solve_poisson(rho)
    else:
        raise InvalidArgument(f"unknown init mode {init!r}")

    alpha = controls.alpha_mix
    prev = None
    J_prev = math.inf
    resid = math.inf
    for it in range(1, controls.max_iters + 1):
        state = _build_state(U, family, hbar, M, None if prev is None else prev.mu_h)
        U_new = solve_poisson(state.rho)
        J = free_energy(state)
        if prev is not None:
            rmax = float(np.max(state.rho.values))
            resid = float(np.max(np.abs(state.rho.values - prev.rho.values))) / rmax
            dmu = abs(state.mu_h - prev.mu_h)
            log.debug("scf %d: J=%.12g mu=%.12g resid=%.3e alpha=%.3g", it, J, state.mu_h, resid, alpha)
            if resid < controls.tol_rho and dmu < controls.tol_mu:
                return replace(state, U=U_new, scf_iters=it, residual=resid)
            if J > J_prev + 1e-14 * abs(J_prev):
                alpha = max(0.5 * alpha, controls.alpha_min)
        prev, J_prev = state, J
        U = RadialField(U.grid, (1.0 - alpha) * U.values + alpha * U_new.values)
    raise NonConvergence(f"SCF did not converge in {controls.max_iters} iterations "
                         f"(residual {resid:.3e})", resid)


def scf_multistart(family, hbar: float, M: float, grid: RadialGrid,
                   controls: Optional[SCFControls] = None, inits=("classical", "ball")) -> QuantumState:
    """Run ``scf_solve`` from each init and keep the lowest free energy.

    Inits that fail are skipped; if all fail the last error is raised.
    """
    best, best_J, last_exc = None, math.inf, None
    for init in inits:
        try:
            st = scf_solve(family, hbar, M, init=init, grid=grid, controls=controls)
        except (NonConvergence, MassUnreachable) as exc:
            log.warning("init %s failed: %s", init, exc)
            last_exc = exc
            continue
        J = free_energy(st)
        log.info("init %s: J=%.12g", init, J)
        if J < best_J:
            best, best_J = st, J
    if best is None:
        raise last_exc
    return best


def scf_pass(state: QuantumState, M: float) -> QuantumState:
    """One undamped pass from a converged state (fixed-point check)."""
    nxt = _build_state(state.U, state.family, state.hbar, M, state.mu_h)
    return replace(nxt, U=solve_poisson(nxt.rho))


def pohozaev_residuals(state: QuantumState, kinetic=None, pdd=None):
    """Relative deviations from the two virial-type identities.

    ``kinetic = (mu M + S)/3`` and ``int int rho rho/|x-y| = 4 (mu M + S)/3``
    with ``S = Tr^hbar((s beta')(Q))``.  ``(None, None)`` for the zero state.
    """
    kinetic = _kinetic(state) if kinetic is None else kinetic
    pdd = coulomb_energy(state.rho, state.rho) if pdd is None else pdd
    if kinetic <= 0 or pdd <= 0:
        return None, None
    S = _trace_of(state, lambda lam: np.asarray(cas.s_beta_prime(state.family, lam)))
    base = state.mu_h * state.mass + S
    return abs(kinetic - base / 3.0) / kinetic, abs(pdd - 4.0 * base / 3.0) / pdd


def lieb_thirring_ratios(state: QuantumState, kinetic=None):
    """Endpoint ``||rho||_{5/3} / (||Q||^{2/5} (2 kinetic)^{3/5})`` and dual (alpha=1) ratios."""
    kinetic = _kinetic(state) if kinetic is None else kinetic
    qn = state.max_occupation()
    if qn <= 0 or kinetic <= 0:
        return None, None
    rho53 = integrate_radial(RadialField(state.grid, state.rho.values ** (5.0 / 3.0))) ** 0.6
    endpoint = rho53 / (qn ** 0.4 * (2.0 * kinetic) ** 0.6)
    return endpoint, dual_lt_ratio(state.U, state.hbar, 1.0)


@dataclass
class FreeEnergyReport:
    mass: float
    kinetic: float
    potential_dd: float
    casimir: float
    J: float
    mu: float
    pohozaev_res_kinetic: Optional[float]
    pohozaev_res_potential: Optional[float]
    lt_endpoint_ratio: Optional[float]
    lt_dual_ratio: Optional[float]
    schatten: dict

    @property
    def J_pohozaev(self) -> float:
        """``-(1/3) mu M + Tr^hbar(beta - (1/3) s beta')``; equals ``J`` on a self-consistent state."""
        return self._J_alt

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "mass", "kinetic", "potential_dd", "casimir", "J", "mu",
            "pohozaev_res_kinetic", "pohozaev_res_potential",
            "lt_endpoint_ratio", "lt_dual_ratio")}
        d["schatten"] = {str(k): v for k, v in self.schatten.items()}
        return d


def quantum_functionals(state: QuantumState, diagnostics: bool = True) -> FreeEnergyReport:
    kin = _kinetic(state)
    casimir = _trace_of(state, lambda lam: np.asarray(cas.beta(state.family, lam)))
    pdd = coulomb_energy(state.rho, state.rho)
    mass = state.mass
    if diagnostics:
        pk, pp = pohozaev_residuals(state, kin, pdd)
        lt_e, lt_d = lieb_thirring_ratios(state, kin)
    else:
        pk = pp = lt_e = lt_d = None
    rep = FreeEnergyReport(mass, kin, pdd, casimir, kin - 0.5 * pdd + casimir, state.mu_h,
                           pk, pp, lt_e, lt_d,
                           {a: schatten_sum(state, a) for a in (1.0, 2.0, 3.0)})
    sbp = _trace_of(state, lambda lam: np.asarray(cas.s_beta_prime(state.family, lam)))
    rep._J_alt = -state.mu_h * mass / 3.0 + casimir - sbp / 3.0
    return rep
