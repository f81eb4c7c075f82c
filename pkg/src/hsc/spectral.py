"""Partial-wave spectra of ``-(hbar^2/2) Laplacian - U`` and Weyl-type counting.

Each angular momentum channel ``ell`` is the symmetric tridiagonal
three-point discretisation of
``-(hbar^2/2) u'' + hbar^2 ell(ell+1)/(2 r^2) u - U u`` on the interior grid
nodes with ``u(0) = u(r_max) = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .errors import InvalidArgument, NumericError, UndefinedRatio
from .radial import RadialField, radial_weights

# eigenvalues this close to a threshold count as not below it
THRESHOLD_EPS = 1e-12


@dataclass(frozen=True)
class Tridiagonal:
    diag: np.ndarray
    off: np.ndarray

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


@dataclass(frozen=True)
class ChannelSpectrum:
    ell: int
    hbar: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # shape (k, n); reduced radial u with sum(u^2) h = 1

    @property
    def multiplicity(self) -> int:
        return 2 * self.ell + 1

    def __len__(self):
        return len(self.eigenvalues)


def build_channel_hamiltonian(U: RadialField, ell: int, hbar: float) -> Tridiagonal:
    if not hbar > 0:
        raise InvalidArgument(f"hbar must be positive, got {hbar}")
    if ell < 0 or int(ell) != ell:
        raise InvalidArgument(f"ell must be a nonnegative integer, got {ell}")
    r, h = U.grid.nodes, U.grid.h
    kin = hbar * hbar / (h * h)
    diag = kin + hbar * hbar * ell * (ell + 1) / (2.0 * r * r) - U.values
    off = np.full(U.grid.n - 1, -0.5 * kin)
    return Tridiagonal(diag, off)


def _lower_bound(H: Tridiagonal) -> float:
    """Gershgorin lower bound on the spectrum."""
    rad = np.zeros_like(H.diag)
    rad[:-1] += np.abs(H.off)
    rad[1:] += np.abs(H.off)
    return float(np.min(H.diag - rad)) - 1.0


def solve_channel(U: RadialField, ell: int, hbar: float, e_max: float) -> ChannelSpectrum:
    """All eigenpairs of channel ``ell`` strictly below ``e_max``.

    LAPACK ``stebz`` (Sturm bisection) gives the values and ``stein``
    (inverse iteration) the vectors.
    """
    if e_max > 0:
        raise InvalidArgument("e_max must be <= 0 on a truncated domain")
    H = build_channel_hamiltonian(U, ell, hbar)
    cut = e_max - THRESHOLD_EPS
    n = U.grid.n
    lo = _lower_bound(H)
    if lo >= cut:
        return ChannelSpectrum(int(ell), float(hbar), np.empty(0), np.empty((0, n)))
    try:
        w, v = eigh_tridiagonal(H.diag, H.off, select="v", select_range=(lo, cut),
                                lapack_driver="stebz")
    except LinAlgError as exc:
        raise NumericError(f"eigenvector iteration failed in channel ell={ell}: {exc}") from exc
    keep = w < cut
    w, v = w[keep], v[:, keep]
    vecs = v.T / math.sqrt(U.grid.h)
    # deterministic sign: first significant component positive
    for row in vecs:
        i = int(np.argmax(np.abs(row) > 1e-8 * np.max(np.abs(row))))
        if row[i] < 0:
            row *= -1.0
    return ChannelSpectrum(int(ell), float(hbar), w, vecs)


def sturm_count(H: Tridiagonal, x: float) -> int:
    """Number of eigenvalues of ``H`` strictly below ``x`` (LDL^T inertia)."""
    d = H.diag - x
    e2 = H.off * H.off
    neg = 0
    q = d[0]
    tiny = np.finfo(float).tiny
    if q < 0:
        neg += 1
    for i in range(1, d.size):
        if q == 0:
            q = tiny
        q = d[i] - e2[i - 1] / q
        if q < 0:
            neg += 1
    return neg


def _sturm_count_block(U: RadialField, ells: np.ndarray, hbar: float, x: float) -> np.ndarray:
    """Sturm counts below ``x`` for several channels at once."""
    r, h = U.grid.nodes, U.grid.h
    kin = hbar * hbar / (h * h)
    cent = hbar * hbar * (ells * (ells + 1.0))[:, None] / (2.0 * r * r)[None, :]
    d = kin + cent - U.values[None, :] - x
    e2 = 0.25 * kin * kin
    tiny = np.finfo(float).tiny
    q = d[:, 0].copy()
    neg = (q < 0).astype(np.int64)
    for i in range(1, r.size):
        q = np.where(q == 0, tiny, q)
        q = d[:, i] - e2 / q
        neg += q < 0
    return neg


def count_below(U: RadialField, hbar: float, threshold: float, block: int = 8) -> int:
    """``sum_ell (2 ell + 1) #{e_{ell,j} < threshold}``.

    The ell scan stops at the first channel with no eigenvalue below the
    threshold; channel minima are nondecreasing in ell.
    """
    if not threshold < 0:
        raise InvalidArgument("threshold must be negative")
    x = threshold - THRESHOLD_EPS
    total = 0
    ell0 = 0
    while True:
        ells = np.arange(ell0, ell0 + block, dtype=float)
        counts = _sturm_count_block(U, ells, hbar, x)
        for ell, c in zip(ells.astype(int), counts):
            if c == 0:
                return total
            total += (2 * ell + 1) * int(c)
        ell0 += block


def solve_all_channels(U: RadialField, hbar: float, e_max: float, ell_max: int = 100000):
    """Channel spectra below ``e_max`` for ell = 0, 1, ... until a channel is empty."""
    out = []
    prev_min = -np.inf
    for ell in range(ell_max + 1):
        ch = solve_channel(U, ell, hbar, e_max)
        if len(ch) == 0:
            break
        if ch.eigenvalues[0] < prev_min - 1e-9 * max(1.0, abs(prev_min)):
            raise NumericError(f"channel minimum decreased at ell={ell}")
        prev_min = ch.eigenvalues[0]
        out.append(ch)
    return out


def phase_volume(U: RadialField, E: float) -> float:
    """Lebesgue measure of ``{(q, p): |p|^2/2 - U(q) <= -E}``.

    Radially this is ``(32 sqrt(2) pi^2 / 3) int r^2 (U - E)_+^(3/2) dr``; the
    trapezoid rule starts from the vanishing integrand at ``r = 0``.
    """
    if not E > 0:
        raise InvalidArgument("E must be positive")
    r, h = U.grid.nodes, U.grid.h
    g = r * r * np.clip(U.values - E, 0.0, None) ** 1.5
    integral = h * (np.sum(g) - 0.5 * g[-1])
    return float(32.0 * math.sqrt(2.0) * math.pi ** 2 / 3.0 * integral)


def weyl_ratio(U: RadialField, hbar: float, E: float) -> float:
    vol = phase_volume(U, E)
    if vol <= 0:
        raise UndefinedRatio("phase-space volume is zero")
    return (2.0 * math.pi * hbar) ** 3 * count_below(U, hbar, -E) / vol


def lp_power(U: RadialField, p: float) -> float:
    """``int U_+^p dx`` with the grid quadrature."""
    return float(np.sum(radial_weights(U.grid) * np.clip(U.values, 0.0, None) ** p))


def clr_ratio(U: RadialField, hbar: float, E: float, r_exp: float):
    """Quantum and classical CLR-type ratios as a pair.

    ``N E^(r-3/2) hbar^3 / ||U||_r^r`` and ``vol E^(r-3/2) / ||U||_r^r``.
    """
    if r_exp < 1.5:
        raise InvalidArgument("CLR exponent must be >= 3/2")
    norm = lp_power(U, r_exp)
    if norm == 0:
        return 0.0, 0.0
    scale = E ** (r_exp - 1.5) / norm
    n = count_below(U, hbar, -E)
    return n * hbar ** 3 * scale, phase_volume(U, E) * scale


def dual_lt_ratio(U: RadialField, hbar: float, alpha: float) -> float:
    """``(2 pi hbar)^3 sum |e|^alpha / int U^(3/2 + alpha)`` over bound states."""
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    channels = solve_all_channels(U, hbar, 0.0)
    if not channels:
        return 0.0
    s = sum(ch.multiplicity * float(np.sum(np.abs(ch.eigenvalues) ** alpha)) for ch in channels)
    return (2.0 * math.pi * hbar) ** 3 * s / lp_power(U, 1.5 + alpha)


__all__ = [
    "ChannelSpectrum", "Tridiagonal", "build_channel_hamiltonian", "solve_channel",
    "sturm_count", "count_below", "solve_all_channels", "phase_volume", "weyl_ratio",
    "clr_ratio", "dual_lt_ratio", "lp_power",
]
