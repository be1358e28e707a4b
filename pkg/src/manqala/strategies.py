"""The four measurement-feedback controllers: FUMES, Z-FUMES, ManQala and
mod-ManQala.

Controllers are deterministic classical policies. They see only measurement
outcomes (never amplitudes) and emit Actions; the ensemble engine owns the
quantum state and the random stream. Each controller is a small coroutine:
``next_action(counts)`` feeds the latest measured counts (or None after an
Evolve) and receives the next Action.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Generator, Mapping

from .dynamics import LockSpec
from .fock import Occupation
from .planner import (
    Move,
    ScenarioPlanner,
    UnwinnableBoardError,
    apply_permutation,
    compile_moves,
    demarcate_sublattices,
    _moves_from_steps,
    _selection_sort_steps,
)

STRATEGIES = ("fumes", "zfumes", "manqala", "mod-manqala")


class StrategyError(ValueError):
    """Raised for unknown strategies or malformed controller input."""


@dataclass(frozen=True)
class Evolve:
    duration: float
    lock: LockSpec | None = None


@dataclass(frozen=True)
class Measure:
    sites: tuple[int, ...]
    preparatory: bool = False


@dataclass(frozen=True)
class Done:
    success: bool


Action = Evolve | Measure | Done


def zeno_lock(board: Occupation, target: Occupation) -> LockSpec | None:
    """Edge-inward maximal locking of sites already at their target counts.

    Only contiguous runs touching a lattice edge are locked, so the unlocked
    remainder is a single segment and no interior site can obstruct
    tunneling between two unlocked regions.
    """
    m = len(board)
    left = 0
    while left < m and board[left] == target[left]:
        left += 1
    right = m
    while right > left and board[right - 1] == target[right - 1]:
        right -= 1
    pins = {s: target[s] for s in itertools.chain(range(left), range(right, m))}
    return LockSpec.from_dict(pins) if pins else None


class Controller:
    """Coroutine shell around a strategy program."""

    def __init__(
        self,
        planner: ScenarioPlanner,
        initial_observation: Occupation | None,
    ) -> None:
        self.planner = planner
        self.target = planner.target
        self.sites = len(planner.target)
        self.initial_observation = initial_observation
        self.mancala_violations = 0
        self._gen: Generator = self._program()
        self._started = False

    def next_action(self, counts: Mapping[int, int] | None = None) -> Action:
        if not self._started:
            self._started = True
            return next(self._gen)
        return self._gen.send(dict(counts) if counts is not None else None)

    # -- helpers shared by the concrete programs --------------------------

    def _all_sites(self) -> tuple[int, ...]:
        return tuple(range(self.sites))

    def _observe_initial(self):
        """Yields the preparatory measurement when the start is superposed."""
        if self.initial_observation is not None:
            return tuple(self.initial_observation), None
        counts = yield Measure(self._all_sites(), preparatory=True)
        return tuple(counts[s] for s in range(self.sites)), None

    @staticmethod
    def _update(board: Occupation, counts: Mapping[int, int]) -> Occupation:
        out = list(board)
        for s, n in counts.items():
            out[s] = n
        return tuple(out)

    def _program(self) -> Generator:
        raise NotImplementedError


class FumesController(Controller):
    """Evolve for the designated time, measure everything, repeat."""

    def _program(self) -> Generator:
        board, _ = yield from self._observe_initial()
        while board != self.target:
            yield Evolve(self.planner.time_for(board))
            counts = yield Measure(self._all_sites())
            board = self._update(board, counts)
        yield Done(success=True)


class ZFumesController(Controller):
    """FUMES restricted to the subspace left unlocked by edge-inward pins."""

    def _program(self) -> Generator:
        board, _ = yield from self._observe_initial()
        while board != self.target:
            lock = zeno_lock(board, self.target)
            yield Evolve(self.planner.time_for(board, lock=lock), lock=lock)
            counts = yield Measure(self._all_sites())
            board = self._update(board, counts)
        yield Done(success=True)


class ManqalaController(Controller):
    """Deterministic permutation moves, then locked search on each group.

    Phase 1 compiles the demarcation permutation into timed moves (mancala
    sow order when constrained). Phase 2 services the unsatisfied groups
    round-robin: Zeno-locked evolve at the designated time, then measure.
    In constrained mode a failed outcome that is a site-permutation of the
    group's phase-1 board is first restored by deterministic swaps.
    """

    mancala_constrained = True
    restores = True

    def _plan_branch(self, board: Occupation) -> tuple[list[Move], tuple]:
        demarcation = demarcate_sublattices(board, self.target)
        try:
            moves = compile_moves(demarcation.permutation, self.mancala_constrained, board)
        except UnwinnableBoardError:
            # No legal sow sequence exists from this branch; fall back to the
            # bare adjacent-swap decomposition and count the rule violation
            # (the lambda3 term of the cost functional).
            self.mancala_violations += 1
            steps = _selection_sort_steps(demarcation.permutation)
            moves = _moves_from_steps(steps, board, self.sites)
        return moves, demarcation.partition

    def _restoration_moves(
        self, board: Occupation, group: tuple[int, ...], goal_slice: tuple[int, ...]
    ) -> list[Move]:
        """Adjacent swaps inside the group mapping its slice onto goal_slice."""
        current = tuple(board[s] for s in group)
        local = next(
            p
            for p in itertools.permutations(range(len(group)))
            if apply_permutation(current, p) == goal_slice
        )
        offset = group[0]
        full_perm = list(range(self.sites))
        for i, p in enumerate(local):
            full_perm[offset + i] = offset + p
        steps = _selection_sort_steps(tuple(full_perm))
        return _moves_from_steps(steps, board, self.sites)

    def _program(self) -> Generator:
        board, _ = yield from self._observe_initial()
        if board == self.target:
            yield Done(success=True)
            return
        moves, partition = self._plan_branch(board)
        for move in moves:
            yield Evolve(move.duration, lock=move.lock)
            board = move.permute(board)
        phase1_end = board
        active = [
            g for g in partition
            if any(board[s] != self.target[s] for s in g)
        ]
        idx = 0
        while active:
            group = active[idx % len(active)]
            local_target = tuple(
                self.target[s] if s in group else board[s] for s in range(self.sites)
            )
            lock = zeno_lock(board, local_target)
            duration = self.planner.time_for(board, lock=lock, target=local_target)
            yield Evolve(duration, lock=lock)
            others = {s for g in active for s in g if g != group}
            counts = yield Measure(tuple(s for s in range(self.sites) if s not in others))
            board = self._update(board, counts)
            if all(board[s] == self.target[s] for s in group):
                active.remove(group)
                continue
            if self.restores:
                got = tuple(board[s] for s in group)
                want = tuple(phase1_end[s] for s in group)
                if got != want and sorted(got) == sorted(want):
                    for move in self._restoration_moves(board, group, want):
                        yield Evolve(move.duration, lock=move.lock)
                        board = move.permute(board)
            idx += 1
        yield Done(success=True)


class ModManqalaController(ManqalaController):
    """ManQala without the mancala sow constraint or the restoration step:
    minimal-duration moves, then pure Z-FUMES inside each locked group."""

    mancala_constrained = False
    restores = False


_CONTROLLERS = {
    "fumes": FumesController,
    "zfumes": ZFumesController,
    "manqala": ManqalaController,
    "mod-manqala": ModManqalaController,
}


def prepare_controller(
    strategy: str,
    planner: ScenarioPlanner,
    initial_observation: Occupation | None,
) -> Controller:
    """Build a fresh controller; superposed starts trigger an initial Measure."""
    try:
        cls = _CONTROLLERS[strategy]
    except KeyError:
        raise StrategyError(
            f"unknown strategy {strategy!r}; expected one of {STRATEGIES}"
        ) from None
    return cls(planner, initial_observation)
