import math

import numpy as np
import pytest

from hsc.errors import InvalidArgument
from hsc.radial import make_grid
from hsc.spectral import (build_channel_hamiltonian, clr_ratio, count_below, dual_lt_ratio,
                          phase_volume, solve_all_channels, solve_channel, sturm_count, weyl_ratio)

PHASE_VOLUME_COULOMB_E1 = 2 * math.sqrt(2) * math.pi ** 3 / 3


def bohr_count(hbar, E):
    """Levels -1/(2 hbar^2 n^2) below -E, each with degeneracy n^2."""
    nmax = math.ceil(1.0 / (hbar * math.sqrt(2 * E))) - 1
    return sum(n * n for n in range(1, nmax + 1))


@pytest.fixture(scope="module")
def coulomb_fine():
    # three-point error is about (h^2/4) relative on 1s; h = 1/60 puts it below 1e-4
    g = make_grid(400.0, 24000)
    return g.sample(lambda r: 1.0 / r)


def test_coulomb_levels_match_bohr(coulomb_fine):
    for ell in (0, 1, 2):
        ch = solve_channel(coulomb_fine, ell, 1.0, -1e-3)
        for j, e in enumerate(ch.eigenvalues[:2]):
            n = ell + 1 + j
            assert e == pytest.approx(-1.0 / (2 * n * n), rel=1e-4)


def test_eigenvectors_normalised_and_signed(coulomb_fine):
    ch = solve_channel(coulomb_fine, 0, 1.0, -0.01)
    h = coulomb_fine.grid.h
    np.testing.assert_allclose(np.sum(ch.eigenvectors ** 2, axis=1) * h, 1.0, rtol=1e-10)
    assert np.all(ch.eigenvectors[:, 0] > 0)
    # 1s reduced radial function 2 r e^{-r}
    r = coulomb_fine.grid.nodes
    assert np.max(np.abs(ch.eigenvectors[0] - 2 * r * np.exp(-r))) < 1e-3


def test_sturm_count_matches_dense():
    g = make_grid(6.0, 200)
    U = g.sample(lambda r: 4.0 * np.exp(-r))
    for ell in (0, 3):
        H = build_channel_hamiltonian(U, ell, 0.3)
        w = np.linalg.eigvalsh(H.dense())
        for x in (-3.0, -1.0, -0.2, 0.5):
            assert sturm_count(H, x) == int(np.sum(w < x))


def test_count_below_matches_channel_solves():
    g = make_grid(6.0, 600)
    U = g.sample(lambda r: 4.0 * np.exp(-r))
    chans = solve_all_channels(U, 0.2, -0.5)
    assert count_below(U, 0.2, -0.5) == sum(c.multiplicity * len(c) for c in chans)


@pytest.mark.parametrize("hbar", [0.2, 0.1, 0.05])
def test_weyl_counts_are_bohr_counts(hbar):
    U = make_grid(4.0, 20000).sample(lambda r: 1.0 / r)
    assert count_below(U, hbar, -1.0) == bohr_count(hbar, 1.0)


def test_phase_volume_coulomb():
    U = make_grid(4.0, 20000).sample(lambda r: 1.0 / r)
    assert phase_volume(U, 1.0) == pytest.approx(PHASE_VOLUME_COULOMB_E1, rel=1e-3)


def test_phase_volume_harmonic_well():
    # U = c - r^2/2 : {|p|^2 + r^2 <= 2(c - E)} is a 6-ball of radius sqrt(2(c-E))
    c, E = 3.0, 1.0
    U = make_grid(5.0, 4000).sample(lambda r: c - 0.5 * r * r)
    R = math.sqrt(2 * (c - E))
    assert phase_volume(U, E) == pytest.approx(math.pi ** 3 / 6 * R ** 6, rel=1e-5)


def test_weyl_ratio_close_to_one_semiclassically():
    U = make_grid(4.0, 20000).sample(lambda r: 1.0 / r)
    assert abs(weyl_ratio(U, 0.05, 1.0) - 1.0) < 0.1


def test_clr_and_dual_lt_ratios():
    U = make_grid(8.0, 2000).sample(lambda r: 3.0 * np.exp(-r * r))
    q, c = clr_ratio(U, 0.1, 0.5, 2.0)
    assert q > 0 and c > 0
    assert dual_lt_ratio(U, 0.2, 1.0) > 0
    with pytest.raises(InvalidArgument):
        clr_ratio(U, 0.1, 0.5, 1.0)


def test_threshold_validation():
    U = make_grid(4.0, 100).sample(lambda r: 1.0 / r)
    with pytest.raises(InvalidArgument):
        solve_channel(U, 0, 1.0, 0.5)
    with pytest.raises(InvalidArgument):
        count_below(U, 1.0, 0.0)
    with pytest.raises(InvalidArgument):
        build_channel_hamiltonian(U, -1, 1.0)
