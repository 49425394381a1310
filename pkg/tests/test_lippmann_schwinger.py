import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import legendre as L

from waveop_lab.grids import make_log_energy_grid, make_radial_grid, riccati_j
from waveop_lab.levinson import k_max_for, winding_from_lippmann_schwinger
from waveop_lab.lippmann_schwinger import (
    born_from_kernel,
    born_phase_shift,
    build_B,
    check_t_window,
    free_outgoing_resolvent,
    ls_grid,
    phase_from_s,
    s_matrix_channel,
    t_matrix,
)
from waveop_lab.potentials import gaussian, square_well, square_well_phase_shift, zero
from waveop_lab.radial_oracle import phase_shifts
from waveop_lab.spectral_transform import build_M

SW = square_well(4, 1)


def mod_pi(d):
    return np.abs((np.asarray(d) + math.pi / 2) % math.pi - math.pi / 2)


def test_imaginary_part_is_rank_one():
    g = make_radial_grid(64, 2.0)
    lam, ell = 2.3, 1
    k = math.sqrt(lam)
    R0 = free_outgoing_resolvent(ell, lam, g).matrix
    j = riccati_j(ell, k * g.nodes)
    np.testing.assert_allclose(R0.imag, np.outer(j, j * g.weights) / k, atol=1e-12)


def _panel_second_derivative(grid, values):
    out = np.empty_like(values)
    edges = grid.panel_edges
    for p in range(edges.size - 1):
        idx = slice(16 * p, 16 * p + 16)
        a, b = edges[p], edges[p + 1]
        x = (2 * grid.nodes[idx] - (a + b)) / (b - a)
        c = np.linalg.solve(L.legvander(x, 15), values[idx])
        out[idx] = L.legval(x, L.legder(c, 2)) * (2 / (b - a)) ** 2
    return out


@pytest.mark.parametrize("ell", [0, 2])
def test_resolvent_inverts_free_operator(ell):
    # (H0_l - lam) R0 f = f, with H0_l applied by per-panel spectral differentiation
    g = make_radial_grid(16 * 16, 2.0, breakpoints=(1.0,))
    r = g.nodes
    f = np.where(r < 1, r ** 2 * (1 - r) ** 6, 0.0)
    lam = 3.0
    u = free_outgoing_resolvent(ell, lam, g).matrix @ f
    resid = -_panel_second_derivative(g, u) + (ell * (ell + 1) / r ** 2 - lam) * u - f
    inner = r > 0.05
    assert np.max(np.abs(resid[inner])) < 1e-8 * np.max(np.abs(f)) * 1e3


def test_born_normalisation_from_kernel():
    p = gaussian(0.01, 1)
    g = ls_grid(p, 4.0)
    for ell in (0, 1, 3):
        a = born_from_kernel(p, ell, 4.0, g)
        b = born_phase_shift(p, ell, 2.0, g)
        assert abs(a - b) <= 1e-8 * abs(b)


def test_born_matches_numerov_to_first_order():
    k = 1.3
    mism = []
    for v0 in (0.01, 0.005):
        p = square_well(v0, 1)
        born = born_phase_shift(p, 0, k, ls_grid(p, 4.0))
        exact = phase_shifts(p, 0, [k], make_radial_grid(2000, 2.0, "uniform_trapezoid", (1.0,))).delta[0]
        mism.append(abs(exact - born) / abs(born))
    assert mism[0] < 0.05
    # relative mismatch is O(V0): halving V0 halves it
    assert 1.8 < mism[0] / mism[1] < 2.2


def test_rejects_nonpositive_energy():
    with pytest.raises(ValueError):
        free_outgoing_resolvent(0, 0.0, make_radial_grid(16, 1.0))


def test_free_t_matrix_is_zero():
    tm = t_matrix(zero(), 0, 1.0, make_radial_grid(16, 1.0))
    assert np.all(tm.matrix == 0) and tm.s == 1


def test_t_matrix_s_wave_at_unit_energy():
    tm = t_matrix(SW, 0, 1.0, ls_grid(SW, 25.0))
    d_ref = float(square_well_phase_shift(4, 1, 1.0))
    assert abs(tm.s - np.exp(2j * d_ref)) < 1e-6
    assert tm.condition < 1e10


@pytest.mark.parametrize("lam", [0.01, 0.5, 3.0, 20.0, 90.0])
def test_t_matrix_symmetry(lam):
    for p in (SW, gaussian(3, 1)):
        tm = t_matrix(p, 1, lam, ls_grid(p, 100.0))
        assert tm.symmetry_residual < 1e-8


def test_free_s_matrix():
    gE = make_log_energy_grid(64, 1e-2, 1e2)
    assert np.all(s_matrix_channel(zero(), 2, gE, ls_grid(zero(), 1e2)) == 1)


@given(st.integers(0, 4), st.floats(1e-3, 400.0))
def test_unitarity_property(ell, lam):
    g = ls_grid(SW, 400.0)
    s = s_matrix_channel(SW, ell, np.array([lam]), g)[0]
    assert abs(abs(s) - 1) < 1e-7


def test_phase_agrees_with_numerov_and_degrades_gracefully_at_low_k():
    grid_nu = make_radial_grid(1100, 1.1, "uniform_trapezoid", (1.0,))
    for k, tol in ((np.linspace(0.3, 5, 25), 1e-6), (np.linspace(0.05, 0.3, 10), 1e-4)):
        s = s_matrix_channel(SW, 0, k ** 2, ls_grid(SW, 25.0))
        ref = phase_shifts(SW, 0, k, grid_nu).delta
        assert np.max(mod_pi(phase_from_s(s) - ref)) < tol


def test_s_converges_under_panel_refinement():
    lam = np.array([0.7, 9.0, 24.0])
    a = s_matrix_channel(gaussian(3, 1), 2, lam, ls_grid(gaussian(3, 1), 25.0, 0.5))
    b = s_matrix_channel(gaussian(3, 1), 2, lam, ls_grid(gaussian(3, 1), 25.0, 0.25))
    c = s_matrix_channel(gaussian(3, 1), 2, lam, ls_grid(gaussian(3, 1), 25.0, 0.125))
    assert np.max(np.abs(a - c)) < 1e-10 and np.max(np.abs(b - c)) < 1e-12


def test_winding_over_the_levinson_range():
    k = np.geomspace(1e-3, k_max_for(SW), 200)
    d = winding_from_lippmann_schwinger(SW, 0, k)
    # arg s0 = 2 delta0 winds once: total variation 2 pi
    assert abs(2 * (d[0] - d[-1]) - 2 * math.pi) < 0.05 * 2 * math.pi / 2 + 0.05


def test_t_window():
    with pytest.raises(ValueError, match="5/2, sigma-5/2"):
        check_t_window(1.0, 16.0)
    check_t_window(8.0, 16.0)
    with pytest.raises(ValueError):
        build_B(SW, 0, make_log_energy_grid(64, 1e-2, 1e2), ls_grid(SW, 1e2), 14.0)


def test_free_B_is_zero():
    gE = make_log_energy_grid(64, 1e-2, 1e2)
    B = build_B(zero(), 0, gE, ls_grid(zero(), 1e2), 3.0)
    assert np.all(B.columns == 0) and B.bound == 0


def test_pairing_with_M_reproduces_s_minus_one():
    gE = make_log_energy_grid(64, 1e-2, 1e2)
    gr = ls_grid(SW, gE.lam_max)
    B = build_B(SW, 0, gE, gr)
    M = build_M(0, gr, gE, B.t_weight)
    diag = -2j * math.pi * np.einsum("ji,ji->j", M.rows, B.columns)
    assert np.max(np.abs(diag - (B.s - 1))) < 1e-8


def test_B_bounded_as_lambda_decreases():
    bounds = []
    for lo in (1e-3, 1e-4):
        gE = make_log_energy_grid(64, lo, 1e2)
        bounds.append(build_B(SW, 0, gE, ls_grid(SW, gE.lam_max)).bound)
    assert abs(bounds[1] / bounds[0] - 1) < 0.05
