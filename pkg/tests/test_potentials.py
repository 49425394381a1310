import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from waveop_lab.potentials import (
    REGISTRY,
    decay_bound_ratio,
    evaluate,
    exponential,
    gaussian,
    reference_bound_state_count,
    square_well,
    square_well_bound_energies,
    square_well_phase_shift,
    zero,
)


def test_definitions():
    assert evaluate(square_well(4, 1), 0.5) == -4
    assert evaluate(square_well(4, 1), 2.0) == 0
    assert evaluate(gaussian(3, 1), 1.0) == pytest.approx(-3 * math.exp(-1), rel=1e-15)
    assert evaluate(exponential(2, 0.5), 1.0) == pytest.approx(-2 * math.exp(-2), rel=1e-15)
    assert np.all(evaluate(zero(), np.linspace(0, 5, 11)) == 0)


def test_reference_counts():
    assert reference_bound_state_count(square_well(4, 1), 0) == 1
    assert reference_bound_state_count(square_well(1, 1), 0) == 0
    assert reference_bound_state_count(gaussian(3, 1), 0) == "unknown"
    # sqrt(15) = 3.87: one s-level (< 3 pi/2), one p-level (j_0 zero at pi), no d-level
    assert [reference_bound_state_count(square_well(15, 1), ell) for ell in range(3)] == [1, 1, 0]


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registered_decay_bounds(name):
    p = REGISTRY[name]
    assert decay_bound_ratio(p) <= 1.0
    if not p.is_zero:
        assert p.sigma_eff > 7


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_real_valued(name):
    v = evaluate(REGISTRY[name], np.linspace(0, 30, 301))
    assert np.isrealobj(v) and np.all(np.isfinite(v))


def test_closed_form_phase_at_k1():
    k, kappa = 1.0, math.sqrt(5.0)
    ref = math.atan(k / kappa * math.tan(kappa)) - k
    assert square_well_phase_shift(4, 1, k) == pytest.approx(ref, abs=1e-15)


@given(st.floats(0.3, 5.0))
def test_closed_form_l1_matches_l0_structure_at_small_depth(k):
    # tiny well: Born limit delta_l ~ -int V j^2 / k, sign positive for attraction
    d = square_well_phase_shift(1e-6, 1.0, k, 1)
    assert 0 < d < 1e-5


def test_bound_energy_satisfies_matching():
    (e,) = square_well_bound_energies(4, 1)
    kap, q = math.sqrt(4 + e), math.sqrt(-e)
    assert abs(kap / math.tan(kap) + q) < 1e-12
    assert -4 < e < 0
