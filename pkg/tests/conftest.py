import pytest

from hsc.casimir import CasimirFamily
from hsc.classical import solve_classical
from hsc.quantum import scf_solve
from hsc.radial import make_grid
from hsc import semiclassics as sc

BENCH_HBARS = (0.5, 0.35, 0.25, 0.18, 0.125)
ACCEPTANCE_LINES = []


def report(number, passed, detail):
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bench_family():
    return CasimirFamily.power_law(2.0, 1.0)


@pytest.fixture(scope="session")
def bench_grid():
    return make_grid(12.0, 1600)


@pytest.fixture(scope="session")
def bench_classical(bench_family, bench_grid):
    return solve_classical(bench_family, 1.0, bench_grid)


@pytest.fixture(scope="session")
def bench_quantum(bench_family, bench_grid):
    return scf_solve(bench_family, 0.25, 1.0, init="ball", grid=bench_grid)


@pytest.fixture(scope="session")
def bench_sweep(bench_family, bench_grid, bench_classical):
    return sc.run_sweep(bench_family, 1.0, BENCH_HBARS, bench_grid, classical=bench_classical)


@pytest.fixture(scope="session")
def warm_sweep():
    """Same sweep at T = 10, where the support spans many grid cells."""
    fam = CasimirFamily.power_law(2.0, 10.0)
    return sc.run_sweep(fam, 1.0, BENCH_HBARS, make_grid(12.0, 1600))


@pytest.fixture(scope="session")
def temperature_scans(bench_family, bench_grid):
    # wide enough that both critical temperatures fall inside the grid
    Ts = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    return {h: sc.temperature_scan(bench_family, 1.0, h, Ts, bench_grid, refine_steps=8)
            for h in (0.5, 0.25)}
