import numpy as np
import pytest

from waveop_lab.dilation import constant_multiplier, theta_multiplier
from waveop_lab.grids import make_log_energy_grid
from waveop_lab.potentials import gaussian, square_well, zero
from waveop_lab.wave_operators import (
    assemble_exact,
    assemble_ra_formula,
    assemble_w_plus,
    channel_problem,
    check_unimodular,
    dilated_family,
    eigenfunction_apply,
    extract_remainder,
    intertwining_defect,
    isometry_defect,
    normalized_packets,
    packet_corpus,
    potential_matrix,
    singular_values,
    time_dependent_apply,
    w_plus_remainder,
)

G = make_log_energy_grid(256, 1e-3, 1e3)
SW = square_well(4, 1)


@pytest.fixture(scope="module")
def sw_channel():
    cp = channel_problem(SW, 0, G)
    ex = assemble_exact(0, cp.M_op, cp.theta, cp.B_op)
    ra = assemble_ra_formula(0, cp.s, cp.theta)
    return cp, ex, ra


def test_free_channel_is_identity():
    cp = channel_problem(zero(), 1, G)
    ex = assemble_exact(1, cp.M_op, cp.theta, cp.B_op)
    ra = assemble_ra_formula(1, cp.s, cp.theta)
    assert np.array_equal(ex.matrix, np.eye(G.n)) and np.allclose(ra.matrix, np.eye(G.n), atol=1e-15)


def test_formula_with_unit_symbol_is_S(sw_channel):
    cp, _, _ = sw_channel
    one = assemble_ra_formula(0, cp.s, constant_multiplier(G, 1.0))
    np.testing.assert_allclose(one.matrix, np.diag(cp.s), atol=1e-12)
    none = assemble_ra_formula(0, cp.s, constant_multiplier(G, 0.0))
    np.testing.assert_allclose(none.matrix, np.eye(G.n), atol=1e-15)


def test_formula_norm_bounded_for_s_minus_one():
    w = assemble_ra_formula(0, -np.ones(G.n), theta_multiplier(G))
    assert np.linalg.norm(w.weighted(), 2) <= 3 + 1e-12


def test_unimodular_guard():
    with pytest.raises(ValueError):
        check_unimodular(np.array([1.0, 1.1]))
    with pytest.raises(ValueError):
        assemble_ra_formula(0, np.full(G.n, 0.5), theta_multiplier(G))


def test_exact_is_isometric_and_intertwines(sw_channel):
    cp, ex, _ = sw_channel
    pk = packet_corpus(G)
    vm = potential_matrix(SW, 0, G, cp.grid_r)
    assert isometry_defect(ex, pk) < 1e-3
    assert intertwining_defect(ex, pk, vm) < 1e-3


def test_formula_alone_is_not_isometric(sw_channel):
    # the remainder K carries what the closed formula misses
    _, _, ra = sw_channel
    assert isometry_defect(ra, packet_corpus(G)) > 1e-2


def test_packet_corpus_is_reproducible():
    a, b = packet_corpus(G), packet_corpus(G)
    assert np.array_equal(a, b)
    assert np.allclose([G.norm(v) for v in a], 1)
    assert not np.array_equal(a, packet_corpus(G, seed=1))


def test_eigenfunction_route_matches_exact(sw_channel):
    _, ex, _ = sw_channel
    for c in (0.5, 2.0, 8.0):
        v = normalized_packets(G, [c], 0.3)[0]
        assert G.norm(eigenfunction_apply(SW, 0, G, v) - ex.apply(v)) < 1e-3


def test_eigenfunction_route_free_is_identity():
    v = normalized_packets(G, [1.0], 0.3)[0]
    assert np.array_equal(eigenfunction_apply(zero(), 0, G, v), v)


def test_time_dependent_free_is_identity():
    v = normalized_packets(G, [6.0], 0.3)[0]
    r = time_dependent_apply(zero(), 0, G, v)
    assert G.norm(r.values - v) < 1e-9 and r.indicator < 1e-9


def test_remainder_and_w_plus(sw_channel):
    cp, ex, ra = sw_channel
    f0 = normalized_packets(G, [1.0], 0.3)[0]
    rep = extract_remainder(ex, ra, dilated_family(G, f0, 5))
    np.testing.assert_allclose(rep.K, ex.matrix - ra.matrix, atol=0)
    assert rep.decay.shape == (6,) and np.all(rep.decay > 0)
    np.testing.assert_allclose(rep.singular_values, singular_values(rep.K, G))
    wp = assemble_w_plus(ex, cp.s)
    assert isometry_defect(wp, packet_corpus(G)) < 1e-3
    kp = w_plus_remainder(wp, cp.s, cp.theta)
    assert abs(np.linalg.norm(kp, 2) / np.linalg.norm(rep.K, 2) - 1) < 1e-8
    # K' = K S* exactly, so their singular values coincide
    np.testing.assert_allclose(singular_values(kp, G), rep.singular_values, rtol=1e-8, atol=1e-14)


def test_dilated_family_shifts_toward_threshold():
    f0 = normalized_packets(G, [1.0], 0.3)[0]
    fam = dilated_family(G, f0, 3, step=4)
    peaks = [G.nodes[np.argmax(np.abs(f))] for f in fam]
    assert np.all(np.diff(peaks) < 0)
    assert np.allclose([G.norm(f) for f in fam], 1, atol=1e-10)


def test_gaussian_channel_exact_isometry():
    g = make_log_energy_grid(128, 1e-2, 1e2)
    cp = channel_problem(gaussian(3, 1), 1, g)
    ex = assemble_exact(1, cp.M_op, cp.theta, cp.B_op)
    assert isometry_defect(ex, packet_corpus(g, width=0.5)) < 1e-3
