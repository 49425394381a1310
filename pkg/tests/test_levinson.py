import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from waveop_lab.levinson import (
    CLEAN,
    SUSPECTED_RESONANCE,
    _extrapolate_to_zero,
    bound_report,
    k_max_for,
    levinson_channel,
    levinson_k_nodes,
    numerov_table,
    winding_from_lippmann_schwinger,
)
from waveop_lab.potentials import gaussian, square_well, reference_bound_state_count, zero


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_extrapolation_exact_for_quadratics(a, b, c):
    k = np.array([1e-3, 2e-3, 4e-3])
    assert abs(_extrapolate_to_zero(k, a + b * k + c * k * k) - a) < 1e-9 * (1 + abs(a) + abs(b) + abs(c))


def test_k_max_from_born_estimate():
    # int V = -V0 a for the square well
    assert k_max_for(square_well(15, 1)) == pytest.approx(15 / (2 * 0.04), rel=1e-6)
    assert k_max_for(square_well(0.01, 1)) == 5.0
    assert k_max_for(zero()) == 5.0
    k = levinson_k_nodes(square_well(4, 1))
    assert k.size == 600 and k[0] == pytest.approx(1e-3)


@pytest.mark.parametrize("v0,ell", [(1, 0), (4, 0), (15, 0), (15, 1), (15, 2), (40, 1)])
def test_levinson_square_well(v0, ell):
    rep = levinson_channel(square_well(v0, 1), ell)
    assert rep.bound_count == reference_bound_state_count(square_well(v0, 1), ell)
    assert rep.threshold_flag == CLEAN and abs(rep.defect) < 0.05 and rep.ok


def test_levinson_gaussian():
    rep = levinson_channel(gaussian(6, 1), 0)
    assert rep.ok and rep.bound_count >= 1


def test_shallow_level_needs_larger_box():
    # E ~ -4e-3: decays over ~15 length units, more than the default box resolves
    bs = bound_report(square_well(2.6, 1), 0)
    assert bs.count == 1


def test_zero_energy_resonance_is_flagged():
    rep = levinson_channel(square_well((math.pi / 2) ** 2, 1), 0)
    assert rep.threshold_flag == SUSPECTED_RESONANCE and not rep.ok
    assert abs(rep.winding - 0.5) < 0.05  # half-bound state


def test_top_of_range_must_be_small():
    p = square_well(15, 1)
    with pytest.raises(ValueError):
        from waveop_lab.levinson import check_levinson

        k = np.geomspace(1e-3, 5, 200)
        check_levinson(p, 0, numerov_table(p, 0, k), bound_report(p, 0))


def test_lippmann_schwinger_winding_agrees_with_numerov():
    p = square_well(15, 1)
    k = np.geomspace(1e-2, k_max_for(p), 120)
    ls = winding_from_lippmann_schwinger(p, 1, k)
    nu = numerov_table(p, 1, k, nodes_per_period=160).delta
    assert np.max(np.abs(ls - nu)) < 1e-6


def test_free_channel_has_zero_winding():
    rep = levinson_channel(zero(), 3)
    assert (rep.winding, rep.bound_count, rep.defect) == (0.0, 0, 0.0) and rep.ok
