"""Casimir functions ``beta``, their derivatives and inverse-derivative ``beta_tilde``.

A family is either a power law ``beta(s) = T s**m`` or a pair of user
callables ``(beta0, beta0_prime)`` scaled by the temperature ``T``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from .errors import InvalidArgument, InvalidFamily

_PROBE = np.logspace(-8, 8, 161)


@dataclass(frozen=True)
class CasimirFamily:
    kind: str
    m: Optional[float] = None
    T: float = 1.0
    beta0: Optional[Callable] = field(default=None, compare=False, repr=False)
    beta0_prime: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgument(f"temperature must be positive, got {self.T}")
        if self.kind == "power_law":
            if self.m is None or not self.m > 1:
                raise InvalidFamily(f"power law needs m > 1 for beta' to be invertible, got {self.m}")
        elif self.kind == "custom":
            if self.beta0 is None or self.beta0_prime is None:
                raise InvalidFamily("custom family needs beta and beta' callables")
            d = np.asarray([self.beta0_prime(s) for s in _PROBE], dtype=float)
            if not np.all(np.isfinite(d)) or np.any(np.diff(d) <= 0):
                raise InvalidFamily("custom beta' is not strictly increasing on the probe set")
        else:
            raise InvalidFamily(f"unknown family kind {self.kind!r}")

    @classmethod
    def power_law(cls, m: float, T: float = 1.0) -> "CasimirFamily":
        return cls("power_law", m=float(m), T=float(T))

    @classmethod
    def custom(cls, beta0, beta0_prime, T: float = 1.0) -> "CasimirFamily":
        return cls("custom", T=float(T), beta0=beta0, beta0_prime=beta0_prime)

    def with_temperature(self, T: float) -> "CasimirFamily":
        return replace(self, T=float(T))

    @property
    def k(self) -> float:
        """Polytropic exponent ``1/(m-1)`` of ``beta_tilde`` (power law only)."""
        return 1.0 / (self.m - 1.0)

    def describe(self) -> dict:
        return {"kind": self.kind, "m": self.m, "T": self.T}


def require_admissible(family: CasimirFamily):
    """Raise :class:`InvalidFamily` unless (A1)-(A4) hold (power law: 5/3 < m <= 3)."""
    if family.kind == "power_law":
        if not (5.0 / 3.0 < family.m <= 3.0):
            if family.m > 3.0:
                raise InvalidFamily("(A4) violated: m must satisfy 5/3 < m ≤ 3")
            raise InvalidFamily("(A2) violated: m must satisfy 5/3 < m ≤ 3")
        return
    report = validate_assumptions(family)
    if not report.all_passed:
        failed = ", ".join(k for k, v in report.checks.items() if not v[0])
        raise InvalidFamily(f"custom family fails {failed}")


def _nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise InvalidArgument("Casimir functions are defined for s >= 0 only")
    return s


def _out(x, like):
    return float(x) if np.ndim(like) == 0 else x


def beta(family: CasimirFamily, s):
    s_ = _nonneg(s)
    if family.kind == "power_law":
        v = family.T * s_ ** family.m
    else:
        v = family.T * np.vectorize(family.beta0, otypes=[float])(s_)
    return _out(v, s)


def beta_prime(family: CasimirFamily, s):
    s_ = _nonneg(s)
    if family.kind == "power_law":
        v = family.T * family.m * s_ ** (family.m - 1.0)
    else:
        v = family.T * np.vectorize(family.beta0_prime, otypes=[float])(s_)
    return _out(v, s)


def s_beta_prime(family: CasimirFamily, s):
    s_ = _nonneg(s)
    return _out(s_ * np.asarray(beta_prime(family, s_)), s)


def _invert_custom(family: CasimirFamily, t: np.ndarray) -> np.ndarray:
    """Solve ``T beta0'(s) = t`` for ``t > 0`` by vectorised bisection."""
    bp = np.vectorize(family.beta0_prime, otypes=[float])
    target = t / family.T
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(2000):
        short = bp(hi) < target
        if not short.any():
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, hi * 2.0, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        below = bp(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 1e-13 * np.maximum(hi, 1e-300)):
            break
    return 0.5 * (lo + hi)


def beta_tilde(family: CasimirFamily, t):
    """``(beta')^{-1}(t)`` for ``t >= 0`` and 0 for ``t < 0``."""
    t_ = np.asarray(t, dtype=float)
    pos = t_ > 0
    out = np.zeros_like(t_)
    if np.any(pos):
        if family.kind == "power_law":
            out[pos] = (t_[pos] / (family.T * family.m)) ** family.k
        else:
            out[pos] = _invert_custom(family, t_[pos])
    return _out(out, t)


@dataclass
class AssumptionReport:
    checks: dict  # name -> (passed, detail)

    @property
    def all_passed(self) -> bool:
        return all(v[0] for v in self.checks.values())

    @property
    def status(self) -> str:
        # spot checks on a probe set never certify the assumptions
        return "numerically consistent" if self.all_passed else "violated"


def _log_slope(family, s1, s2):
    b1, b2 = beta(family, s1), beta(family, s2)
    if b1 <= 0 or b2 <= 0:
        return float("nan")
    return math.log(b2 / b1) / math.log(s2 / s1)


def validate_assumptions(family: CasimirFamily) -> AssumptionReport:
    s = _PROBE
    checks = {}
    b = np.asarray(beta(family, s))
    bp = np.asarray(beta_prime(family, s))
    b0, bp0 = beta(family, 0.0), beta_prime(family, 0.0)
    mid = np.asarray(beta(family, 0.5 * (s[1:] + s[:-1])))
    secant = np.all(mid < 0.5 * (b[1:] + b[:-1]))
    mono = np.all(np.diff(bp) > 0)
    a1 = b0 == 0 and bp0 == 0 and secant and mono
    checks["A1"] = (bool(a1), f"beta(0)={b0}, beta'(0)={bp0}, secant convex={secant}, beta' increasing={mono}")
    hi_slope = _log_slope(family, 1e6, 1e8)
    checks["A2"] = (bool(hi_slope > 5.0 / 3.0), f"large-s growth exponent ~ {hi_slope:.6g} (need > 5/3)")
    lo_slope = _log_slope(family, 1e-8, 1e-6)
    checks["A3"] = (bool(lo_slope > 5.0 / 3.0), f"small-s growth exponent ~ {lo_slope:.6g} (need > 5/3)")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(b > 0, s * bp / b, 0.0)
    sup = float(np.max(ratio))
    checks["A4"] = (bool(sup <= 3.0 * (1 + 1e-12)), f"sup s beta'/beta ~ {sup:.6g} (need <= 3)")
    return AssumptionReport(checks)


def _check_order(order: str):
    if order not in ("density", "kinetic", "casimir"):
        raise InvalidArgument(f"unknown moment order {order!r}")


def _power_moment_coeff(j: float, weight_pow: int) -> float:
    """``int (|p|^2/2)^i (a - |p|^2/2)_+^j dp = coeff * a^(j + i + 3/2)`` for i in {0, 1}."""
    if weight_pow == 0:
        return 2.0 ** 2.5 * math.pi * special.beta(1.5, j + 1.0)
    return 2.0 ** 2.5 * math.pi * special.beta(2.5, j + 1.0)


@dataclass(frozen=True)
class _PowerMoment:
    coeff: float
    expo: float

    def __call__(self, a):
        a_ = np.asarray(a, dtype=float)
        v = np.where(a_ > 0, self.coeff * np.abs(a_) ** self.expo, 0.0)
        return _out(v, a)


def power_moment(family: CasimirFamily, order: str):
    """Closed-form ``a -> momentum_moment(family, a, order)`` for a power law."""
    _check_order(order)
    k, T, m = family.k, family.T, family.m
    scale = (T * m) ** (-k)
    if order == "density":
        return _PowerMoment(scale * _power_moment_coeff(k, 0), k + 1.5)
    if order == "kinetic":
        return _PowerMoment(scale * _power_moment_coeff(k, 1), k + 2.5)
    # beta(beta_tilde(t)) = T (Tm)^(-(k+1)) t^(k+1)
    return _PowerMoment(T * (T * m) ** (-(k + 1.0)) * _power_moment_coeff(k + 1.0, 0), k + 2.5)


def _custom_moment(family, a, order):
    if a <= 0:
        return 0.0
    pmax = math.sqrt(2.0 * a)

    def occ(p):
        return beta_tilde(family, a - 0.5 * p * p)

    if order == "density":
        g = lambda p: 4 * math.pi * p * p * occ(p)
    elif order == "kinetic":
        g = lambda p: 4 * math.pi * p * p * 0.5 * p * p * occ(p)
    else:
        g = lambda p: 4 * math.pi * p * p * beta(family, occ(p))
    val, _ = integrate.quad(g, 0.0, pmax, epsrel=1e-10, epsabs=0.0, limit=200)
    return val


def momentum_moment(family: CasimirFamily, a, order: str):
    """p-marginals of ``beta_tilde(a - |p|^2/2)`` over ``R^3``.

    ``density``: ``int beta_tilde dp``; ``kinetic``: ``int |p|^2/2 beta_tilde dp``;
    ``casimir``: ``int beta(beta_tilde) dp``.
    """
    _check_order(order)
    if family.kind == "power_law":
        return power_moment(family, order)(a)
    a_ = np.asarray(a, dtype=float)
    v = np.vectorize(lambda x: _custom_moment(family, x, order), otypes=[float])(a_)
    return _out(v, a)
