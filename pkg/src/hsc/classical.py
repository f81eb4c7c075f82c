"""Isotropic classical minimiser ``Q = beta_tilde(-mu - |p|^2/2 + U(q))`` by shooting.

With ``w = U - mu`` the self-consistency condition becomes the Emden-type
problem ``w'' + (2/r) w' = -4 pi rho(w)``, ``w(0) = w0``, ``w'(0) = 0``, where
``rho(w)`` is the density moment of ``beta_tilde``.  The first zero of ``w``
is the support radius ``R0``; Gauss's law gives the mass and ``mu = M / R0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import casimir as cas
from .errors import DomainTooSmall, InvalidArgument, NoSolution, NumericError
from .radial import (FOUR_PI, RadialField, RadialGrid, coulomb_energy, integrate_radial,
                     radial_weights, solve_poisson)

ODE_SUBSTEPS = 4


@dataclass(frozen=True)
class ClassicalState:
    family: cas.CasimirFamily
    mu: float
    U: RadialField
    rho: RadialField
    R0: float
    w0: float
    mass: float
    notes: tuple = field(default=())

    @property
    def grid(self) -> RadialGrid:
        return self.U.grid

    @property
    def w(self) -> np.ndarray:
        """``U - mu`` clipped at zero (the local occupation argument at p = 0)."""
        return np.clip(self.U.values - self.mu, 0.0, None)


@dataclass(frozen=True)
class ShotProfile:
    U: RadialField
    R0: float
    mass: float
    mu: float
    w_nodes: np.ndarray  # w at grid nodes inside the support, 0 outside


def _density_fn(family):
    if family.kind == "power_law":
        dens = cas.power_moment(family, "density")
        c, e = dens.coeff, dens.expo
        return lambda w: c * w ** e if w > 0 else 0.0
    return lambda w: cas.momentum_moment(family, w, "density") if w > 0 else 0.0


def _rk4_step(f, r, y, dr):
    k1 = f(r, y)
    k2 = f(r + 0.5 * dr, (y[0] + 0.5 * dr * k1[0], y[1] + 0.5 * dr * k1[1]))
    k3 = f(r + 0.5 * dr, (y[0] + 0.5 * dr * k2[0], y[1] + 0.5 * dr * k2[1]))
    k4 = f(r + dr, (y[0] + dr * k3[0], y[1] + dr * k3[1]))
    return (y[0] + dr / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            y[1] + dr / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))


def shoot(family: cas.CasimirFamily, w0: float, grid: RadialGrid) -> ShotProfile:
    """Integrate the Emden-type IVP from ``w(0) = w0`` to the first zero of ``w``."""
    if not w0 > 0:
        raise InvalidArgument(f"central value w0 must be positive, got {w0}")
    rho = _density_fn(family)

    def rhs(r, y):
        return (y[1], -FOUR_PI * rho(y[0]) - 2.0 * y[1] / r)

    dr = grid.h / ODE_SUBSTEPS
    rho0 = rho(w0)
    # regular series start through the coordinate singularity
    y = (w0 - (2.0 * math.pi / 3.0) * rho0 * dr * dr, -(4.0 * math.pi / 3.0) * rho0 * dr)
    if y[0] <= 0.0:
        raise NumericError(f"support radius below the ODE step for w0={w0:.6g}")
    r = dr
    w_nodes = np.zeros(grid.n)
    step = 1
    while True:
        if step % ODE_SUBSTEPS == 0:
            w_nodes[step // ODE_SUBSTEPS - 1] = y[0]
        y_new = _rk4_step(rhs, r, y, dr)
        if not (math.isfinite(y_new[0]) and math.isfinite(y_new[1])):
            raise NumericError(f"shooting blew up at r={r:.6g} for w0={w0:.6g}")
        if y_new[0] <= 0.0:
            break
        r += dr
        y = y_new
        step += 1
        if r >= grid.r_max - dr:
            raise DomainTooSmall(f"w never vanished before r_max={grid.r_max} (w0={w0:.6g})")
    # bisect on the last step length for the zero of w
    lo, hi = 0.0, dr
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _rk4_step(rhs, r, y, mid)[0] > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * r:
            break
    R0 = r + 0.5 * (lo + hi)
    _, dw = _rk4_step(rhs, r, y, R0 - r)
    mass = -R0 * R0 * dw
    mu = mass / R0
    nodes = grid.nodes
    inside = nodes < R0
    w_nodes = np.where(inside, w_nodes, 0.0)
    U = np.where(inside, w_nodes + mu, mass / nodes)
    return ShotProfile(RadialField(grid, U), R0, mass, mu, w_nodes)


def _state_from_shot(family, w0, shot: ShotProfile, notes=()) -> ClassicalState:
    rho_v = np.asarray(cas.momentum_moment(family, shot.w_nodes, "density"))
    rho = RadialField(shot.U.grid, np.where(shot.w_nodes > 0, rho_v, 0.0))
    return ClassicalState(family, shot.mu, shot.U, rho, shot.R0, w0, shot.mass, tuple(notes))


def _mass_or_none(family, w0, grid):
    try:
        return shoot(family, w0, grid).mass
    except (DomainTooSmall, NumericError):
        return None


def solve_classical(family: cas.CasimirFamily, M: float, grid: RadialGrid,
                    w_lo: float = 1e-6, w_hi: float = 1e6) -> ClassicalState:
    """Bisection on the central value ``w0`` until the shot mass equals ``M``."""
    if not M > 0:
        raise InvalidArgument(f"mass must be positive, got {M}")
    cas.require_admissible(family)
    ws = np.geomspace(w_lo, w_hi, 73)
    masses = [_mass_or_none(family, w, grid) for w in ws]
    feasible = [i for i, m in enumerate(masses) if m is not None]
    if not feasible:
        raise DomainTooSmall("no central value gives a solution inside r_max")
    brackets = []
    for a, b in zip(feasible[:-1], feasible[1:]):
        if b == a + 1 and (masses[a] - M) * (masses[b] - M) <= 0:
            brackets.append((ws[a], ws[b]))
    if not brackets:
        if masses[feasible[0]] > M:
            raise DomainTooSmall(
                f"mass {M} needs a support radius beyond r_max={grid.r_max}")
        raise NoSolution(f"no central value in [{w_lo}, {w_hi}] reaches mass {M}")
    roots = [_bisect_w0(family, M, grid, a, b) for a, b in brackets]
    states = [_state_from_shot(family, w0, shot) for w0, shot in roots]
    if len(states) == 1:
        return states[0]
    # non-monotone mass(w0): keep the lowest free energy, flag it
    Js = [classical_functionals(s)["J"] for s in states]
    best = states[int(np.argmin(Js))]
    note = f"mass(w0) not monotone: {len(states)} roots, J values {Js}"
    return ClassicalState(best.family, best.mu, best.U, best.rho, best.R0, best.w0,
                          best.mass, (note,))


def _bisect_w0(family, M, grid, a, b):
    ma = shoot(family, a, grid).mass - M
    shot = None
    for _ in range(200):
        mid = math.sqrt(a * b)
        shot = shoot(family, mid, grid)
        fm = shot.mass - M
        if abs(fm) < 1e-8 * M * 1e-2:
            return mid, shot
        if (fm < 0) == (ma < 0):
            a, ma = mid, fm
        else:
            b = mid
        if b / a - 1 < 1e-15:
            break
    if abs(shot.mass - M) >= 1e-8 * M:
        raise NoSolution(f"mass bisection stalled at |dM|={abs(shot.mass - M):.3g}")
    return mid, shot


def classical_functionals(state: ClassicalState) -> dict:
    """Mass, kinetic, ``int int rho rho/|x-y|``, Casimir and ``J`` of a classical state."""
    fam, grid = state.family, state.grid
    w = state.w
    wts = radial_weights(grid)
    kinetic = float(np.sum(wts * cas.momentum_moment(fam, w, "kinetic")))
    casimir = float(np.sum(wts * cas.momentum_moment(fam, w, "casimir")))
    pdd = coulomb_energy(state.rho, state.rho)
    mass = integrate_radial(state.rho)
    return {"mass": mass, "kinetic": kinetic, "potential_dd": pdd, "casimir": casimir,
            "J": kinetic - 0.5 * pdd + casimir, "mu": state.mu}


def lagrange_identity_terms(state: ClassicalState, n_p: int = 64):
    """``(-mu M, int (|p|^2/2 - U + beta'(Q)) Q dq dp)`` by direct phase-space quadrature.

    The p-integral uses Gauss-Legendre in ``x = |p| / sqrt(2 w)`` with the
    family's ``beta'`` evaluated on ``Q`` itself.
    """
    fam, grid = state.family, state.grid
    x, wx = np.polynomial.legendre.leggauss(n_p)
    x, wx = 0.5 * (x + 1.0), 0.5 * wx
    w = state.w
    U = state.U.values
    vals = np.zeros(grid.n)
    for i in np.nonzero(w > 0)[0]:
        pmax = math.sqrt(2.0 * w[i])
        p = pmax * x
        Q = np.asarray(cas.beta_tilde(fam, w[i] - 0.5 * p * p))
        integrand = (0.5 * p * p - U[i] + np.asarray(cas.beta_prime(fam, Q))) * Q
        vals[i] = FOUR_PI * pmax * np.sum(wx * p * p * integrand)
    total = float(np.sum(radial_weights(grid) * vals))
    return -state.mu * state.mass, total


def fixed_point_residual(state: ClassicalState) -> float:
    """``||U - Poisson(rho(U))||_sup / ||U||_sup``."""
    rho = RadialField(state.grid, cas.momentum_moment(state.family, state.w, "density"))
    return (state.U - solve_poisson(rho)).sup() / state.U.sup()
