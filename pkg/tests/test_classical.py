import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from hsc import casimir as cas
from hsc.casimir import CasimirFamily
from hsc.classical import (classical_functionals, fixed_point_residual, lagrange_identity_terms,
                           shoot, solve_classical)
from hsc.errors import DomainTooSmall, InvalidArgument, InvalidFamily
from hsc.radial import make_grid

FAM = CasimirFamily.power_law(2.0, 1.0)


def lane_emden_first_zero(n_index):
    def rhs(x, y):
        return [y[1], -max(y[0], 0.0) ** n_index - 2 * y[1] / x]
    x0 = 1e-6
    y0 = [1 - x0 * x0 / 6, -x0 / 3]
    hit = lambda x, y: y[0]
    hit.terminal, hit.direction = True, -1
    sol = solve_ivp(rhs, (x0, 20), y0, events=hit, rtol=1e-12, atol=1e-14)
    return sol.t_events[0][0]


FINE = make_grid(0.25, 2000)


@pytest.fixture(scope="module")
def fine_state():
    # about 500 nodes inside the support
    return solve_classical(FAM, 1.0, FINE)


def test_support_radius_matches_lane_emden(fine_state):
    # w'' + 2w'/r = -4 pi c w^(k+3/2) is Lane-Emden of index k + 3/2 after scaling
    dens = cas.power_moment(FAM, "density")
    alpha = math.sqrt(4 * math.pi * dens.coeff * fine_state.w0 ** (dens.expo - 1))
    xi1 = lane_emden_first_zero(dens.expo)
    assert fine_state.R0 == pytest.approx(xi1 / alpha, rel=1e-6)


def test_mass_radius_scaling():
    # index 5/2 polytrope: R0 ~ M^(-3)
    r1 = solve_classical(FAM, 1.0, FINE).R0
    r2 = solve_classical(FAM, 2.0, FINE).R0
    assert r2 / r1 == pytest.approx(0.125, rel=1e-6)


def test_state_mass_and_mu(fine_state):
    assert fine_state.mass == pytest.approx(1.0, rel=1e-8)
    assert fine_state.mu == pytest.approx(fine_state.mass / fine_state.R0, rel=1e-12)
    assert np.all(fine_state.rho.values >= 0)


def test_virial_on_resolved_grid(fine_state):
    fn = classical_functionals(fine_state)
    assert fn["potential_dd"] / fn["kinetic"] == pytest.approx(4.0, abs=1e-4)
    assert fn["J"] < 0
    assert fixed_point_residual(fine_state) < 1e-5


def test_fixed_point_residual_second_order():
    res = [fixed_point_residual(solve_classical(FAM, 1.0, make_grid(0.25, n))) for n in (500, 1000)]
    assert math.log2(res[0] / res[1]) == pytest.approx(2.0, abs=0.5)


def test_lagrange_identity(fine_state):
    lhs, rhs = lagrange_identity_terms(fine_state)
    assert rhs == pytest.approx(lhs, rel=1e-3)


def test_shoot_profile_outside_is_kepler(fine_state):
    g = fine_state.grid
    out = g.nodes > fine_state.R0
    np.testing.assert_allclose(fine_state.U.values[out], fine_state.mass / g.nodes[out], rtol=1e-12)


def test_errors():
    g = make_grid(12.0, 1600)
    with pytest.raises(InvalidArgument):
        solve_classical(FAM, 0.0, g)
    with pytest.raises(InvalidFamily):
        solve_classical(CasimirFamily.power_law(4.0), 1.0, g)
    # R0 ~ M^-3 puts the support far outside r_max
    with pytest.raises(DomainTooSmall):
        solve_classical(FAM, 0.01, g)
    with pytest.raises(InvalidArgument):
        shoot(FAM, -1.0, g)
