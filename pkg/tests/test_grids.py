import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from waveop_lab.grids import (
    BesselRangeError,
    GridError,
    make_log_energy_grid,
    make_radial_grid,
    riccati_h_out,
    riccati_j,
    riccati_y,
    spherical_bessel,
)


def test_trapezoid_nodes_and_weights():
    g = make_radial_grid(8, 1.0, "uniform_trapezoid")
    np.testing.assert_allclose(g.nodes, np.arange(1, 9) / 8, rtol=0, atol=1e-15)
    np.testing.assert_allclose(g.weights[1:-1], 1 / 8, rtol=1e-14)


def test_gauss_legendre_polynomial_exact():
    g = make_radial_grid(16, 1.0)
    assert abs(g.integrate(g.nodes ** 2) - 1 / 3) < 1e-12


def test_gauss_legendre_exponential():
    g = make_radial_grid(400, 40.0)
    assert abs(g.integrate(np.exp(-g.nodes)) - (1 - math.exp(-40))) < 1e-10


@pytest.mark.parametrize("n,r_max", [(4, 1.0), (16, 0.0), (16, -1.0)])
def test_rejects_unusable_grids(n, r_max):
    with pytest.raises(GridError):
        make_radial_grid(n, r_max)


@given(st.integers(0, 31), st.integers(1, 8), st.floats(0.5, 20.0))
def test_composite_rule_integrates_polynomials(deg, panels, r_max):
    g = make_radial_grid(16 * panels, r_max)
    exact = r_max ** (deg + 1) / (deg + 1)
    assert abs(g.integrate(g.nodes ** deg) - exact) <= 1e-12 * exact


def test_trapezoid_second_order():
    # integrand vanishing at r = 0, like every reduced radial function
    errs = []
    for n in (200, 400, 800):
        g = make_radial_grid(n, 4.0, "uniform_trapezoid")
        errs.append(abs(g.integrate(g.nodes * np.exp(-g.nodes ** 2)) - (1 - math.exp(-16.0)) / 2))
    assert 3.5 < errs[0] / errs[1] < 4.5 and 3.5 < errs[1] / errs[2] < 4.5


def test_gauss_legendre_refinement_is_spectral():
    e = [abs(make_radial_grid(n, 8.0).integrate(np.exp(-make_radial_grid(n, 8.0).nodes ** 2))
             - math.sqrt(math.pi) / 2 * math.erf(8.0)) for n in (16, 32)]
    assert e[1] < 1e-3 * e[0] or e[1] < 1e-14


def test_log_grid_powers_of_two():
    g = make_log_energy_grid(64, 1.0, 2.0 ** 63)
    np.testing.assert_allclose(g.nodes, 2.0 ** np.arange(64), rtol=1e-13)


def test_log_grid_step():
    g = make_log_energy_grid(128, 1e-3, 1e3)
    assert abs(g.step - math.log(1e6) / 127) < 1e-15
    assert g.nodes[0] == 1e-3 and abs(g.nodes[-1] / 1e3 - 1) < 1e-14


@given(st.sampled_from([64, 128, 256, 512]), st.floats(1e-8, 1.0), st.floats(1.5, 1e8))
def test_log_grid_constant_ratio(n, lo, ratio):
    g = make_log_energy_grid(n, lo, lo * ratio)
    r = g.nodes[1:] / g.nodes[:-1]
    assert np.max(np.abs(r / r[0] - 1)) < 1e-14


@pytest.mark.parametrize("n,lo,hi", [(100, 1.0, 2.0), (32, 1.0, 2.0), (64, 0.0, 1.0), (64, 2.0, 1.0)])
def test_log_grid_rejects(n, lo, hi):
    with pytest.raises(GridError):
        make_log_energy_grid(n, lo, hi)


def test_bessel_values():
    assert abs(spherical_bessel(0, math.pi).j) < 1e-14
    assert abs(spherical_bessel(1, 1.0).j - (math.sin(1) - math.cos(1))) < 1e-15
    assert abs(spherical_bessel(1, 1.0).j - 0.30116867893975674) < 1e-15
    assert abs(spherical_bessel(5, 0.5).wronskian - 4.0) < 1e-9 * 4


@pytest.mark.parametrize("ell", range(13))
def test_wronskian_sweep(ell):
    x = np.geomspace(1e-3, 1e3, 400)
    try:
        b = spherical_bessel(ell, x)
    except BesselRangeError:
        x = x[x > 0.05 * (ell + 1)]
        b = spherical_bessel(ell, x)
    np.testing.assert_allclose(b.wronskian, 1 / x ** 2, rtol=1e-10)


def test_hankel_by_construction():
    b = spherical_bessel(3, np.linspace(0.5, 30, 50))
    assert np.array_equal(b.h1, b.j + 1j * b.y)


def test_overflow_guard():
    with pytest.raises(BesselRangeError):
        spherical_bessel(12, 1e-30)


def test_ell_cap():
    with pytest.raises(ValueError):
        spherical_bessel(13, 1.0)


@given(st.integers(0, 8), st.floats(50.0, 500.0))
def test_riccati_asymptotics(ell, x):
    # j^ ~ sin(x - l pi/2), y^ ~ -cos(x - l pi/2) with O(l^2/x) corrections
    tol = 2 * (ell * (ell + 1) / 2 + 1) / x
    assert abs(riccati_j(ell, x) - math.sin(x - ell * math.pi / 2)) < tol
    assert abs(riccati_y(ell, x) + math.cos(x - ell * math.pi / 2)) < tol
    h = riccati_h_out(ell, x)
    assert abs(abs(h) - 1) < tol


@given(st.integers(0, 10), st.floats(1e-2, 1e2))
def test_riccati_wronskian(ell, x):
    # j^ y^' - j^' y^ = 1
    from waveop_lab.grids import riccati_j_deriv, riccati_y_deriv

    w = riccati_j(ell, x) * riccati_y_deriv(ell, x) - riccati_j_deriv(ell, x) * riccati_y(ell, x)
    assert abs(w - 1) < 1e-9
