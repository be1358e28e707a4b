"""Designated times, demarcation, move compilation, and Tchoukaillon plans."""
import itertools
from functools import lru_cache
from math import pi, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from manqala.dynamics import LockSpec, StateVector, build_hamiltonian, locked_propagate
from manqala.fock import LatticeShape, enumerate_basis
from manqala.planner import (
    PlannerError,
    UnwinnableBoardError,
    apply_permutation,
    compile_moves,
    demarcate_sublattices,
    designated_times,
    minimal_permutation_duration,
    sublattice_populations,
    tchoukaillon_plan,
)

# ---------------------------------------------------------------------------
# designated times


def test_target_entry_is_zero(h33):
    table = designated_times(h33, (3, 0, 0), [(3, 0, 0)])
    assert table.entries[(3, 0, 0)] == 0.0
    assert table.probabilities[(3, 0, 0)] == 1.0


def test_two_site_full_transfer_time():
    # 3 bosons on 2 sites: modes swap exactly at Jt = pi/2
    basis = enumerate_basis(LatticeShape(2, 3))
    h = build_hamiltonian(basis)
    table = designated_times(h, (3, 0), [(0, 3)])
    assert table.entries[(0, 3)] == pytest.approx(pi / 2, abs=1e-4)
    assert table.probabilities[(0, 3)] == pytest.approx(1.0, abs=1e-9)


def test_global_max_on_grid_property(h33):
    configs = [(0, 1, 2), (2, 1, 0), (1, 1, 1)]
    table = designated_times(h33, (3, 0, 0), configs)
    sector = h33.sector(None)
    grid = np.arange(0.0, table.horizon, 1e-3)
    dst = h33.basis.index((3, 0, 0))
    for occ in configs:
        src = h33.basis.index(occ)
        curve = sector.transfer_probability(src, dst, grid)
        p_star = sector.transfer_probability(
            src, dst, np.array([table.entries[occ]])
        )[0]
        assert p_star >= curve.max() - 1e-9


def test_smallest_time_on_ties(h33):
    # the flagship transfer curves have exactly degenerate peaks; the
    # returned optimum must be the earliest one
    table = designated_times(h33, (3, 0, 0), [(0, 1, 2)])
    t = table.entries[(0, 1, 2)]
    assert t == pytest.approx(1.6267, abs=2e-3)


def test_locked_times_match_unlocked_two_site():
    # locking site 2 at 0 reduces (2,1,0) -> (3,0,0) to a two-site problem
    basis = enumerate_basis(LatticeShape(3, 3))
    h = build_hamiltonian(basis)
    lock = LockSpec.from_dict({2: 0})
    table = designated_times(h, (3, 0, 0), [(2, 1, 0)], lock=lock)
    two_site = enumerate_basis(LatticeShape(2, 3))
    h2 = build_hamiltonian(two_site)
    ref = designated_times(h2, (3, 0), [(2, 1)])
    assert table.entries[(2, 1, 0)] == pytest.approx(ref.entries[(2, 1)], abs=1e-6)


def test_bad_horizon(h33):
    with pytest.raises(PlannerError, match="horizon"):
        designated_times(h33, (3, 0, 0), [(0, 1, 2)], horizon=0.0)


def test_config_excluded_by_lock(h33):
    with pytest.raises(PlannerError, match="excluded"):
        designated_times(
            h33, (3, 0, 0), [(1, 0, 2)], lock=LockSpec.from_dict({2: 0})
        )


# ---------------------------------------------------------------------------
# Tchoukaillon


@lru_cache(maxsize=None)
def game_tree_winnable(board: tuple) -> bool:
    """Oracle: DFS over every legal sow (pit d legal iff it holds d stones)."""
    if all(n == 0 for n in board[1:]):
        return True
    for d in range(1, len(board)):
        if board[d] == d:
            nxt = list(board)
            nxt[d] = 0
            for k in range(d):
                nxt[k] += 1
            if game_tree_winnable(tuple(nxt)):
                return True
    return False


def test_tchoukaillon_examples():
    assert tchoukaillon_plan((0, 1, 2)) == [1, 2, 1]
    assert tchoukaillon_plan((4, 0, 0)) == []
    assert tchoukaillon_plan((0, 2, 1)) is None


def test_tchoukaillon_vs_game_tree_oracle():
    # exhaustive over N <= 6, M <= 5
    for m in range(2, 6):
        for board in itertools.product(range(7), repeat=m):
            if sum(board) > 6:
                continue
            plan = tchoukaillon_plan(board)
            assert (plan is not None) == game_tree_winnable(board), board
            if plan is not None:
                # <= N sows, and replay empties every pit into the Ruma
                assert len(plan) <= sum(board)
                pits = list(board)
                for d in plan:
                    assert pits[d] == d
                    pits[d] = 0
                    for k in range(d):
                        pits[k] += 1
                assert pits == [sum(board)] + [0] * (m - 1)


# ---------------------------------------------------------------------------
# move compilation


def test_identity_compiles_to_nothing():
    assert compile_moves((0, 1, 2), True, (0, 1, 2)) == []
    assert compile_moves((0, 1, 2), False, (0, 1, 2)) == []


def test_flagship_constrained_compilation():
    moves = compile_moves((2, 1, 0), True, (0, 1, 2))
    assert [m.kind for m in moves] == ["two_site"] * 3
    assert sum(m.duration for m in moves) == pytest.approx(3 * pi / 2)
    board = (0, 1, 2)
    for m in moves:
        board = m.permute(board)
    assert board == (2, 1, 0)


def test_flagship_unconstrained_compilation():
    moves = compile_moves((2, 1, 0), False, (0, 1, 2))
    assert len(moves) == 1
    assert moves[0].kind == "three_site"
    assert moves[0].duration == pytest.approx(sqrt(2) * pi / 2)
    assert moves[0].permute((0, 1, 2)) == (2, 1, 0)


def test_unwinnable_board_error():
    with pytest.raises(UnwinnableBoardError):
        compile_moves((0, 2, 1), True, (0, 2, 1))


def test_moves_lock_spectators():
    moves = compile_moves((1, 0, 2, 4, 3), False, (3, 1, 0, 1, 0))
    board = (3, 1, 0, 1, 0)
    for m in moves:
        pins = m.lock.as_dict
        assert set(pins) == set(range(5)) - set(m.sites)
        for s, n in pins.items():
            assert board[s] == n
        board = m.permute(board)
    assert board == (1, 3, 0, 0, 1)


@settings(max_examples=40, deadline=None)
@given(st.permutations(list(range(4))))
def test_compilation_soundness_numeric(perm):
    """Applying compiled unitaries permutes Fock populations as declared."""
    board = (2, 0, 1, 0)
    basis = enumerate_basis(LatticeShape(4, 3))
    h = build_hamiltonian(basis)
    moves = compile_moves(tuple(perm), False, board)
    psi = StateVector.from_occupation(basis, board)
    for m in moves:
        psi = locked_propagate(h, psi, m.lock, m.duration)
    expected = apply_permutation(board, perm)
    assert np.max(np.abs(psi.occupation_expectations() - np.array(expected))) < 1e-9


def test_minimal_duration_examples():
    assert minimal_permutation_duration((0, 1, 2)) == 0.0
    assert minimal_permutation_duration((1, 0, 2)) == pytest.approx(pi / 2)
    assert minimal_permutation_duration((2, 1, 0)) == pytest.approx(sqrt(2) * pi / 2)
    # disjoint transpositions: two adjacent swaps
    assert minimal_permutation_duration((1, 0, 2, 4, 3)) == pytest.approx(pi)


# ---------------------------------------------------------------------------
# demarcation


def brute_force_demarcation(n0, n_targ):
    """Independent oracle with the same objective, coded over a flat list."""
    m = len(n0)
    candidates = []
    for perm in itertools.permutations(range(m)):
        permuted = apply_permutation(n0, perm)
        for mask in range(1 << (m - 1)):
            groups, start = [], 0
            for cut in range(m - 1):
                if mask >> cut & 1:
                    groups.append(tuple(range(start, cut + 1)))
                    start = cut + 1
            groups.append(tuple(range(start, m)))
            residuals = [
                sum(permuted[s] for s in g) - sum(n_targ[s] for s in g)
                for g in groups
            ]
            if any(residuals):
                continue
            bad = [
                any(permuted[s] != n_targ[s] for s in g) for g in groups
            ]
            if any(a and b for a, b in zip(bad, bad[1:])):
                continue
            candidates.append((groups, perm))
    return min(
        candidates,
        key=lambda c: (
            -len(c[0]),
            minimal_permutation_duration(c[1]),
            c[1],
            tuple(len(g) for g in c[0]),
        ),
    )


def test_flagship_demarcation():
    dem = demarcate_sublattices((0, 1, 2), (3, 0, 0))
    assert dem.partition == ((0, 1), (2,))
    assert dem.permutation == (2, 1, 0)
    assert dem.residuals == (0, 0)


def test_trivial_demarcation_is_finest():
    dem = demarcate_sublattices((1, 2, 0), (1, 2, 0))
    assert dem.partition == ((0,), (1,), (2,))
    assert dem.permutation == (0, 1, 2)


def test_appendix_d_demarcations():
    dem = demarcate_sublattices((3, 1, 0, 1, 0), (1, 1, 1, 1, 1))
    assert dem.partition == ((0,), (1, 2, 3), (4,))
    assert sublattice_populations(
        apply_permutation((3, 1, 0, 1, 0), dem.permutation), dem.partition
    ) == (1, 3, 1)
    dem2 = demarcate_sublattices((2, 0, 0, 2, 1), (1, 1, 1, 1, 1))
    assert dem2.group_sizes == (2, 1, 2)


def test_sublattice_populations():
    assert sublattice_populations((1, 1, 1, 1, 1), ((0,), (1, 2, 3), (4,))) == (1, 3, 1)
    assert sublattice_populations((3, 1, 0, 1, 0), ((0,), (1, 2, 3), (4,))) == (3, 2, 0)
    assert sublattice_populations((2, 1, 0), ((0,), (1,), (2,))) == (2, 1, 0)


def test_demarcation_against_oracle_exhaustive_m_le_4():
    rng = np.random.default_rng(3)
    shapes = [(3, 3), (4, 3), (4, 4), (2, 4)]
    for m, n in shapes:
        boards = [
            b for b in itertools.product(range(n + 1), repeat=m) if sum(b) == n
        ]
        picks = rng.choice(len(boards), size=min(8, len(boards)), replace=False)
        for i in picks:
            for j in picks:
                n0, n_targ = boards[int(i)], boards[int(j)]
                dem = demarcate_sublattices(n0, n_targ)
                groups, perm = brute_force_demarcation(n0, n_targ)
                assert dem.partition == tuple(groups)
                assert dem.permutation == perm
                assert all(r == 0 for r in dem.residuals)


def test_demarcation_input_errors():
    with pytest.raises(PlannerError, match="length"):
        demarcate_sublattices((1, 0), (1, 0, 0))
    with pytest.raises(PlannerError, match="particle totals"):
        demarcate_sublattices((2, 0), (1, 0))
