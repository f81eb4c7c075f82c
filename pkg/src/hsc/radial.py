"""Uniform radial grids, quadrature and Newtonian potentials of radial densities.

Everything here works on samples at the interior nodes ``r_i = i*h``,
``i = 1..n`` of ``[0, r_max]``.  Integrals use the composite trapezoid rule
with the node ``r = 0`` included implicitly (its ``r**2`` weight vanishes) and
the last sample carried out to ``r_max``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NumericError

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.r_max) or self.r_max <= 0:
            raise InvalidArgument(f"r_max must be positive, got {self.r_max}")
        if int(self.n) != self.n or self.n < 16:
            raise InvalidArgument(f"grid needs n >= 16 interior nodes, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        h = float(self.r_max) / (self.n + 1)
        nodes = h * np.arange(1, self.n + 1, dtype=float)
        nodes.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", nodes)

    def field(self, values) -> "RadialField":
        return RadialField(self, values)

    def sample(self, fn) -> "RadialField":
        """Field with values ``fn(r)`` at the nodes."""
        return RadialField(self, np.asarray(fn(self.nodes), dtype=float))

    def zeros(self) -> "RadialField":
        return RadialField(self, np.zeros(self.n))


def make_grid(r_max: float, n: int) -> RadialGrid:
    return RadialGrid(float(r_max), n)


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise InvalidArgument(
                f"field has shape {v.shape}, grid expects ({self.grid.n},)")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    def __add__(self, other):
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def scaled(self, c: float) -> "RadialField":
        return RadialField(self.grid, c * self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _check_same_grid(a: RadialField, b: RadialField):
    if a.grid != b.grid:
        raise InvalidArgument("fields live on different grids")


def _finite(values, what="field"):
    if not np.all(np.isfinite(values)):
        raise NumericError(f"{what} has non-finite samples")


def _check_density(rho: RadialField):
    _finite(rho.values, "density")
    if np.any(rho.values < 0):
        raise InvalidArgument("density has negative samples")


def radial_weights(grid: RadialGrid) -> np.ndarray:
    """Quadrature weights ``w`` with ``sum(w * f) ~ 4*pi*int_0^r_max r^2 f dr``.

    The last weight absorbs the segment ``[r_n, r_max]`` on which ``f`` is
    held at its last sample.
    """
    r, h = grid.nodes, grid.h
    w = FOUR_PI * h * r * r
    w[-1] = FOUR_PI * 0.5 * h * (r[-1] ** 2 + grid.r_max ** 2)
    return w


def integrate_radial(f: RadialField) -> float:
    """``4*pi*int r^2 f dr`` over ``[0, r_max]`` (composite trapezoid)."""
    _finite(f.values)
    return float(np.sum(radial_weights(f.grid) * f.values))


def _cumtrapz_from_zero(g: np.ndarray, h: float) -> np.ndarray:
    """Running trapezoid integral of samples ``g`` at ``h, 2h, ...`` with ``g(0)=0``."""
    c = np.empty_like(g)
    c[0] = 0.5 * h * g[0]
    c[1:] = 0.5 * h * (g[1:] + g[:-1])
    return np.cumsum(c)


def solve_poisson(rho: RadialField) -> RadialField:
    """Newtonian potential ``U = (1/|x|) * rho`` of a radial density.

    ``U(r) = (4 pi / r) int_0^r s^2 rho ds + 4 pi int_r^{r_max} s rho ds``.
    """
    _check_density(rho)
    grid = rho.grid
    r, h, rho_v = grid.nodes, grid.h, rho.values
    inner = _cumtrapz_from_zero(r * r * rho_v, h)
    g = r * rho_v
    seg = 0.5 * h * (g[1:] + g[:-1])
    outer = np.empty_like(g)
    # tail [r_n, r_max] with rho held at its last sample
    outer[-1] = 0.5 * h * rho_v[-1] * (r[-1] + grid.r_max)
    outer[:-1] = outer[-1] + np.cumsum(seg[::-1])[::-1]
    return RadialField(grid, FOUR_PI * (inner / r + outer))


def coulomb_energy(rho1: RadialField, rho2: RadialField) -> float:
    """``int int rho1(x) rho2(y) / |x - y| dx dy`` (no -1/2 prefactor).

    Evaluated as the average of ``int rho1 U[rho2]`` and ``int rho2 U[rho1]``
    so the result is exactly symmetric in its arguments.
    """
    _check_same_grid(rho1, rho2)
    _check_density(rho1)
    _check_density(rho2)
    w = radial_weights(rho1.grid)
    a = float(np.sum(w * rho1.values * solve_poisson(rho2).values))
    b = float(np.sum(w * rho2.values * solve_poisson(rho1).values))
    return 0.5 * (a + b)


def _gaussian_kernel(r_eval: np.ndarray, s: np.ndarray, a: float) -> np.ndarray:
    """Radial reduction kernel of the 3D Gaussian ``G_a`` (rows: r, cols: s)."""
    r = r_eval[:, None]
    norm = 1.0 / np.sqrt(2.0 * np.pi * a)
    base = np.exp(-((r - s) ** 2) / (2.0 * a))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = norm * s * base * (-np.expm1(-2.0 * r * s / a)) / r
    # r -> 0 limit: (2 pi a)^(-3/2) 4 pi s^2 exp(-s^2/2a)
    k0 = 2.0 * norm / a * s * s * np.exp(-s * s / (2.0 * a))
    return np.where(r > 0, k, k0)


def gaussian_convolve_radial(f: RadialField, a: float, at=None):
    """Convolve a radial field with the centred 3D Gaussian of variance ``a``.

    Returns a :class:`RadialField` on the input grid, or an array of values at
    the radii ``at`` (``r = 0`` allowed) when given.
    """
    if not a > 0:
        raise InvalidArgument(f"Gaussian variance must be positive, got {a}")
    _finite(f.values)
    grid = f.grid
    s = np.append(grid.nodes, grid.r_max)
    vals = np.append(f.values, f.values[-1])
    wq = np.full(s.size, grid.h)
    wq[-1] = 0.5 * grid.h
    r_eval = grid.nodes if at is None else np.atleast_1d(np.asarray(at, dtype=float))
    out = _gaussian_kernel(r_eval, s, a) @ (wq * vals)
    if at is None:
        return RadialField(grid, out)
    return out
