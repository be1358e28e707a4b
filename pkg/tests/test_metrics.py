"""Distance metrics, fidelity, and the scalar cost."""
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from manqala.dynamics import StateVector
from manqala.fock import LatticeShape, enumerate_basis
from manqala.metrics import (
    CostWeights,
    bosonic_distance,
    manqala_cost,
    occupation_expectations,
    target_probability,
    tunneling_distance,
)


def hop_count_oracle(n_a, n_b):
    """Independent cumulative-flux hop count: |net flow| through each bond."""
    delta = np.asarray(n_a, float) - np.asarray(n_b, float)
    return float(sum(abs(np.sum(delta[: k + 1])) for k in range(len(delta))))


def test_occupation_expectations_fock(basis33):
    psi = StateVector.from_occupation(basis33, (0, 1, 2))
    assert np.allclose(occupation_expectations(psi), (0, 1, 2))


def test_occupation_expectations_superposition():
    basis = enumerate_basis(LatticeShape(2, 1))
    amps = np.array([1.0, 1.0]) / np.sqrt(2.0)
    psi = StateVector(basis, amps)
    assert np.allclose(occupation_expectations(psi), (0.5, 0.5))


def test_occupation_expectations_weighted_two_site():
    # sqrt(2/3)|3,1> - (i/sqrt 3)|1,3> -> (7/3, 5/3)
    basis = enumerate_basis(LatticeShape(2, 4))
    amps = np.zeros(basis.dimension, dtype=complex)
    amps[basis.index((3, 1))] = np.sqrt(2 / 3)
    amps[basis.index((1, 3))] = -1j / np.sqrt(3)
    psi = StateVector(basis, amps)
    assert np.allclose(occupation_expectations(psi), (7 / 3, 5 / 3))


def test_tunneling_distance_examples():
    assert tunneling_distance((0, 1, 2), (0, 1, 2)) == 0.0
    assert tunneling_distance((0, 1, 2), (3, 0, 0)) == 5.0
    assert tunneling_distance((2, 1, 0), (3, 0, 0)) == 1.0


def test_tunneling_distance_matches_hop_oracle_m3():
    # the adjacent-pair form and cumulative flux agree on 3 sites
    shape = LatticeShape(3, 4)
    for n_a in enumerate_basis(shape).states:
        for n_b in enumerate_basis(shape).states:
            assert tunneling_distance(n_a, n_b) == pytest.approx(
                hop_count_oracle(n_a, n_b)
            )


def test_metric_modes_diverge_for_m4():
    # alternating difference vector: adjacent-pair form is blind to it
    n_a, n_b = (1, 0, 1, 0), (0, 1, 0, 1)
    assert tunneling_distance(n_a, n_b, "adjacent") == 0.0
    assert tunneling_distance(n_a, n_b, "cumulative") == 2.0
    assert tunneling_distance(n_a, n_b, "cumulative") == hop_count_oracle(n_a, n_b)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError, match="metric mode"):
        tunneling_distance((1, 0), (0, 1), "manhattan")


@given(
    st.lists(st.integers(min_value=0, max_value=4), min_size=2, max_size=6),
    st.data(),
)
def test_tunneling_symmetry_nonnegative(n_a, data):
    n_b = data.draw(
        st.lists(
            st.integers(min_value=0, max_value=4),
            min_size=len(n_a),
            max_size=len(n_a),
        )
    )
    for mode in ("adjacent", "cumulative"):
        d_ab = tunneling_distance(n_a, n_b, mode)
        assert d_ab >= 0.0
        assert d_ab == tunneling_distance(n_b, n_a, mode)


def test_zero_distance_implies_equal_m3():
    # exhaustive over equal-total pairs, N <= 4
    for total in range(5):
        boards = [
            b
            for b in itertools.product(range(5), repeat=3)
            if sum(b) == total
        ]
        for a, b in itertools.product(boards, repeat=2):
            if tunneling_distance(a, b) == 0.0:
                assert a == b


def test_bosonic_distance_endpoints():
    n0, targ = (0, 1, 2), (3, 0, 0)
    assert bosonic_distance(n0, targ, n0) == 0.0
    assert bosonic_distance(targ, targ, n0) == 1.0
    assert bosonic_distance((2, 1, 0), targ, n0) == pytest.approx(0.8)


def test_bosonic_distance_degenerate_and_negative():
    assert bosonic_distance((1, 1, 1), (2, 1, 0), (2, 1, 0)) == 1.0
    # farther than the start: allowed to go negative
    assert bosonic_distance((0, 0, 3), (3, 0, 0), (1, 1, 1)) < 0.0


def test_target_probability(basis33):
    psi = StateVector.from_occupation(basis33, (3, 0, 0))
    assert target_probability(psi, (3, 0, 0)) == 1.0
    assert target_probability(psi, (0, 3, 0)) == 0.0
    # global phase invariance, state-vector target
    rotated = StateVector(basis33, np.exp(1j * 0.7) * psi.amplitudes)
    assert target_probability(rotated, psi) == pytest.approx(1.0)


def test_target_probability_appendix_d(appendix_d_state):
    assert target_probability(appendix_d_state, (3, 1, 0, 1, 0)) == pytest.approx(2 / 3)
    assert target_probability(appendix_d_state, (1, 3, 0, 1, 0)) == pytest.approx(1 / 3)


def test_manqala_cost():
    assert manqala_cost(CostWeights(1, 0, 0), 1.0, 5, 5) == 0.0
    assert manqala_cost(CostWeights(1, 0, 0), 0.0, 0, 0) == 1.0
    assert manqala_cost(CostWeights(0.5, 0.25, 0.25), 0.8, 2, 0) == pytest.approx(0.6)
    with pytest.raises(ValueError, match="non-negative"):
        CostWeights(-1, 0, 0)
