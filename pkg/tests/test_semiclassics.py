import math
from types import SimpleNamespace

import numpy as np
import pytest

from hsc import semiclassics as sc
from hsc.casimir import CasimirFamily
from hsc.errors import InvalidArgument, NonConvergence
from hsc.quantum import QuantumState, assemble_density
from hsc.radial import integrate_radial, make_grid
from hsc.spectral import ChannelSpectrum

FAM = CasimirFamily.power_law(2.0, 1.0)


def radial_state(ell, u, lam, hbar, grid):
    ch = ChannelSpectrum(ell, hbar, np.array([-1.0]), u[None, :])
    occ = [np.array([lam])]
    rho = assemble_density([ch], occ, hbar, grid)
    return QuantumState(hbar, FAM, 0.5, (ch,), tuple(occ), grid.zeros(), rho)


def test_wigner_of_gaussian_orbital():
    g = make_grid(12.0, 2400)
    r = g.nodes
    # phi = pi^(-3/4) exp(-r^2/2): u = r sqrt(4 pi) phi
    u = r * math.sqrt(4 * math.pi) * math.pi ** -0.75 * np.exp(-r * r / 2)
    st = radial_state(0, u, 1.0, 0.5, g)
    pts = [sc.PhasePoint(0, 0, 1), sc.PhasePoint(0.5, 0.3, 0.2), sc.PhasePoint(1.2, 0.4, -0.7)]
    res = sc.wigner_sample(st, pts)
    expect = [8 * math.exp(-p.q_norm ** 2 - p.p_norm ** 2 / 0.25) for p in pts]
    np.testing.assert_allclose(res.values, expect, rtol=1e-6, atol=1e-9)
    assert not res.warnings


def test_wigner_of_oscillator_p_shell():
    # sum over the three first excited oscillator states (hbar = 1): 8 e^{-R^2} (2 R^2 - 3)
    g = make_grid(12.0, 2400)
    r = g.nodes
    u = math.sqrt(8 * math.pi / 3) * math.pi ** -0.75 * r * r * np.exp(-r * r / 2)
    st = radial_state(1, u, 1.0, 1.0, g)
    pts = [sc.PhasePoint(0, 0, 1), sc.PhasePoint(0.7, 0.5, 0.3), sc.PhasePoint(1.1, 0.9, -1.0)]
    res = sc.wigner_sample(st, pts)
    R2 = [p.q_norm ** 2 + p.p_norm ** 2 for p in pts]
    expect = [8 * math.exp(-x) * (2 * x - 3) for x in R2]
    np.testing.assert_allclose(res.values, expect, rtol=1e-6, atol=1e-8)


def test_wigner_of_empty_state():
    g = make_grid(4.0, 64)
    st = QuantumState(0.5, FAM, 0.1, (), (), g.zeros(), g.zeros())
    assert np.all(sc.wigner_sample(st, [sc.PhasePoint(0, 0, 1)]).values == 0)


def test_toeplitz_wigner_identity_1d_brute_force():
    """Direct quadrature of W[Op^T f] per dimension against the variance-addition form."""
    hbar, s, t, q0, p0 = 0.3, 0.7, 1.3, 0.4, -0.3
    q = np.linspace(-12, 12, 801)
    p = np.linspace(-12, 12, 801)
    y = np.linspace(-12, 12, 801)
    dq, dp, dy = q[1] - q[0], p[1] - p[0], y[1] - y[0]
    fq = np.exp(-q * q / (2 * s))
    fp = np.exp(-p * p / (2 * t))
    # kernel at (q0 + y/2, q0 - y/2) from coherent states (pi hbar)^(-1/4) e^{-(x-q)^2/2hbar + i p x/hbar}
    gq = np.exp(-((q0 + y[:, None] / 2 - q) ** 2 + (q0 - y[:, None] / 2 - q) ** 2) / (2 * hbar)) @ fq * dq
    gp = np.exp(1j * np.outer(y, p) / hbar) @ fp * dp
    K = gq * gp / (2 * math.pi * hbar) / math.sqrt(math.pi * hbar)
    W = float(np.real(np.sum(K * np.exp(-1j * p0 * y / hbar)) * dy))
    sq, sp = s + hbar / 2, t + hbar / 2
    expect = math.sqrt(s / sq) * math.sqrt(t / sp) * math.exp(-q0 ** 2 / (2 * sq) - p0 ** 2 / (2 * sp))
    assert W == pytest.approx(expect, rel=1e-9)
    closed = sc.wigner_of_toeplitz_gaussian(np.array([[q0, 0, 0]]), np.array([[p0, 0, 0]]), 1.0, s, t, hbar)
    one_dim = sc.wigner_of_toeplitz_gaussian(np.zeros((1, 3)), np.zeros((1, 3)), 1.0, s, t, hbar)
    assert float(closed[0] / one_dim[0] ** (2 / 3)) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("hbar", [0.1, 0.3, 1.0])
def test_wigner_toeplitz_identity(hbar):
    assert sc.wigner_toeplitz_identity_check((2.0, 0.5, 1.5), hbar) < 1e-12
    assert sc.wigner_toeplitz_identity_check((1.0, 0.8, 0.3), hbar, shift=0.7) < 1e-12
    assert sc.wigner_toeplitz_identity_check((0.0, 1.0, 1.0), hbar) == 0.0
    with pytest.raises(InvalidArgument):
        sc.wigner_toeplitz_identity_check((1.0, 0.0, 1.0), hbar)


def test_coherent_width():
    for h in (0.05, 0.5, 2.0):
        assert sc.coherent_width(h) == pytest.approx(h / 2, rel=1e-14)


def test_toeplitz_on_classical_state(bench_classical):
    for h in (0.1, 0.5):
        rho = sc.toeplitz_density(bench_classical, h)
        assert integrate_radial(rho) == pytest.approx(integrate_radial(bench_classical.rho), abs=1e-10)
        quant, second, gap, mass = sc.toeplitz_kinetic_check(bench_classical, h)
        assert gap == pytest.approx(1.5 * h * mass, rel=1e-12)
        assert quant > second


def test_compare_potentials_oracles():
    g = make_grid(5.0, 999)
    U = g.sample(lambda r: 1.0 / (1 + r))
    assert sc.compare_potentials(U, U) == (0.0, 0.0, 0.0)
    grad, sup, hold = sc.compare_potentials(U + g.sample(lambda r: 0 * r + 0.3), U)
    assert grad == pytest.approx(0.0, abs=1e-12) and sup == pytest.approx(0.3) and hold < 1e-12
    # D = r: |Dr| / |dr|^0.1 peaks at |dr| = 1
    grad, sup, hold = sc.compare_potentials(U + g.sample(lambda r: r), U)
    assert hold == pytest.approx(1.0, rel=1e-9)
    assert sup == pytest.approx(g.nodes[-1])
    assert grad == pytest.approx(math.sqrt(4 * math.pi * 5.0 ** 3 / 3), rel=1e-3)
    with pytest.raises(InvalidArgument):
        sc.compare_potentials(make_grid(4.0, 999).zeros(), U)


def test_phase_point_validation():
    with pytest.raises(InvalidArgument):
        sc.PhasePoint(-1, 0, 0)
    with pytest.raises(InvalidArgument):
        sc.PhasePoint(0, 0, 1.5)
    q, p = sc.PhasePoint(2.0, 3.0, 0.5).vectors()
    assert float(q @ p) == pytest.approx(3.0)


def test_sweep_requires_descending_hbar():
    with pytest.raises(InvalidArgument):
        sc.run_sweep(FAM, 1.0, [0.25, 0.5], make_grid(12.0, 200))


def test_csv_fields_are_the_report_columns():
    assert ",".join(sc.CSV_FIELDS) == (
        "hbar,J_quantum,J_classical,mu_h,mu,mass_err,grad_L2_dist,sup_dist,holder_dist,"
        "weyl_ratio_at_mu,pohozaev_kin,pohozaev_pot,lt_endpoint,lt_dual,J_gamma_h,J_f_h,scf_iters")
    assert set(sc.CSV_FIELDS) <= set(sc.sweep_field_names())


def _fake_scan(monkeypatch, levels_at, J_at, fail_above=math.inf):
    def solve(family0, T, M, hbar, grid, controls, U0):
        if T > fail_above:
            raise NonConvergence("no", 1.0)
        return SimpleNamespace(T=T, U=None, mu_h=1.0, scf_iters=1,
                               occupied_levels=lambda: levels_at(T))

    monkeypatch.setattr(sc, "_solve_at_T", solve)
    monkeypatch.setattr(sc, "quantum_functionals",
                        lambda st, diagnostics=False: SimpleNamespace(J=J_at(st.T)))


def test_temperature_scan_bisection(monkeypatch):
    _fake_scan(monkeypatch, lambda T: 1 if T <= 2.3 else 2, lambda T: T - 3.5)
    scan = sc.temperature_scan(FAM, 1.0, 0.5, [1, 2, 3, 4], None, refine_steps=30)
    assert scan.T_c_estimate == pytest.approx(2.3, abs=1e-8) and scan.T_c_censored == ""
    assert scan.T_star_estimate == 3 and not scan.T_star_censored


def test_temperature_scan_censoring(monkeypatch):
    _fake_scan(monkeypatch, lambda T: 1, lambda T: -1.0)
    scan = sc.temperature_scan(FAM, 1.0, 0.5, [1, 2, 3], None)
    assert scan.T_c_estimate == 3 and scan.T_c_censored == "above grid"
    assert scan.T_star_estimate == 3 and scan.T_star_censored
    _fake_scan(monkeypatch, lambda T: 3, lambda T: -1.0, fail_above=2.5)
    scan = sc.temperature_scan(FAM, 1.0, 0.5, [1, 2, 3], None)
    assert math.isnan(scan.T_c_estimate) and scan.T_c_censored == "below grid"
    assert scan.rows[-1].error and scan.T_star_estimate == 2
    with pytest.raises(InvalidArgument):
        sc.temperature_scan(FAM, 1.0, 0.5, [2, 1], None)
