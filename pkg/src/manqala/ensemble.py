"""Monte Carlo trajectory engine: seeded trajectories of controller x
simulator, d_B statistics on a shared time grid, success histograms, and
convergence times. Parallel execution is bit-identical to serial because
every trajectory derives its own generator from (master_seed, index) and
aggregation merges by index.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import HermitianOperator, StateVector
from .measurement import outcome_distribution, sample_measurement
from .metrics import bosonic_distance
from .planner import ScenarioPlanner
from .strategies import Done, Evolve, Measure, prepare_controller

_MASK64 = (1 << 64) - 1
DEFAULT_GRID_STEP = 0.01
DEFAULT_MAX_REPETITIONS = 10_000
_SUPPORT_TOL = 1e-12


def derive_seed(master_seed: int, index: int) -> int:
    """splitmix64-style mix of (master_seed, trajectory index)."""
    x = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class TrajectoryEvent:
    time: float
    kind: str  # evolve-start | measure | done
    expectations: tuple[float, ...]
    d_b: float
    target_prob: float
    outcome: tuple[int, ...] | None = None


@dataclass
class TrajectoryRecord:
    trajectory_id: int
    events: list[TrajectoryEvent] = field(default_factory=list)
    grid_db: np.ndarray | None = None  # d_B at k*grid_step, k = 0..len-1
    # populated only when events are recorded: k -> (expectations, target_prob)
    grid_detail: dict[int, tuple[tuple[float, ...], float]] = field(default_factory=dict)
    converged: bool = False
    final_board: tuple[int, ...] | None = None
    repetitions_used: int = 0
    final_time: float = 0.0


@dataclass
class EnsembleStats:
    strategy: str
    grid_step: float
    times: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_traj: int


@dataclass
class HistogramResult:
    strategy: str
    repetitions: int
    shots: int
    probabilities: dict[tuple[int, ...], float]
    target_label: float
    initial_label: float
    rest_label: float


@dataclass
class TrajectoryEngine:
    """Everything one trajectory needs, shared read-only across workers."""

    h: HermitianOperator
    initial: StateVector
    target: tuple[int, ...]
    planner: ScenarioPlanner
    strategy: str
    metric_mode: str = "adjacent"
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self) -> None:
        self.target = tuple(int(x) for x in self.target)
        self._n0 = tuple(self.initial.occupation_expectations())
        self._target_idx = self.h.basis.index(self.target)
        support = np.flatnonzero(np.abs(self.initial.amplitudes) ** 2 > _SUPPORT_TOL)
        self._initial_support = tuple(self.h.basis.states[int(k)] for k in support)
        self._initial_board = (
            self._initial_support[0] if len(self._initial_support) == 1 else None
        )

    def _d_b(self, expectations: np.ndarray) -> float:
        return bosonic_distance(expectations, self.target, self._n0, self.metric_mode)

    def run(
        self,
        trajectory_id: int,
        master_seed: int,
        max_repetitions: int = DEFAULT_MAX_REPETITIONS,
        record_grid: bool = True,
        record_events: bool = True,
    ) -> TrajectoryRecord:
        rng = np.random.default_rng(derive_seed(master_seed, trajectory_id))
        basis = self.h.basis
        occ_matrix = basis.occupation_matrix()
        psi = StateVector(basis, self.initial.amplitudes.copy())
        controller = prepare_controller(self.strategy, self.planner, self._initial_board)
        record = TrajectoryRecord(trajectory_id=trajectory_id)
        t_now = 0.0
        reps = 0
        grid: dict[int, float] = {}

        def expectations() -> np.ndarray:
            return (np.abs(psi.amplitudes) ** 2) @ occ_matrix

        def target_prob() -> float:
            return float(np.abs(psi.amplitudes[self._target_idx]) ** 2)

        def log(kind: str, outcome=None) -> None:
            if not record_events:
                return
            exp = expectations()
            record.events.append(
                TrajectoryEvent(
                    time=t_now,
                    kind=kind,
                    expectations=tuple(float(x) for x in exp),
                    d_b=self._d_b(exp),
                    target_prob=target_prob(),
                    outcome=outcome,
                )
            )

        if record_grid:
            exp0 = expectations()
            grid[0] = self._d_b(exp0)
            if record_events:
                record.grid_detail[0] = (
                    tuple(float(x) for x in exp0), target_prob(),
                )

        action = controller.next_action()
        success = False
        while True:
            if isinstance(action, Done):
                success = action.success
                log("done")
                break
            if isinstance(action, Evolve):
                log("evolve-start")
                sector = self.h.sector(action.lock)
                sub = psi.amplitudes[sector.kept]
                if record_grid:
                    k_lo = int(np.floor(t_now / self.grid_step + 1e-9)) + 1
                    k_hi = int(np.floor((t_now + action.duration) / self.grid_step + 1e-9))
                    if k_hi >= k_lo:
                        ks = np.arange(k_lo, k_hi + 1)
                        offsets = ks * self.grid_step - t_now
                        evolved = sector.evolve_many(sub, offsets)
                        pops = np.abs(evolved) ** 2
                        exps = pops.T @ occ_matrix[sector.kept]
                        tpos = np.flatnonzero(sector.kept == self._target_idx)
                        tprobs = pops[int(tpos[0])] if tpos.size else np.zeros(ks.size)
                        for k, exp, tp in zip(ks, exps, tprobs):
                            grid[int(k)] = self._d_b(exp)
                            if record_events:
                                record.grid_detail[int(k)] = (
                                    tuple(float(x) for x in exp), float(tp),
                                )
                out = np.zeros_like(psi.amplitudes)
                out[sector.kept] = sector.evolve(sub, action.duration)
                psi = StateVector(basis, out)
                t_now += action.duration
                action = controller.next_action(None)
                continue
            assert isinstance(action, Measure)
            dist = outcome_distribution(psi, action.sites)
            outcome = sample_measurement(psi, action.sites, rng, dist)
            psi = outcome.post_state
            counts = dict(zip(outcome.measured_sites, outcome.counts))
            log("measure", outcome=outcome.counts)
            if not action.preparatory:
                reps += 1
            action = controller.next_action(counts)
            if (
                not isinstance(action, Done)
                and reps >= max_repetitions
            ):
                break

        record.converged = success
        record.repetitions_used = reps
        record.final_time = t_now
        if record_grid:
            # post-measurement value holds from here on; write it at the
            # first grid point after the final event so padding carries it
            k_end = int(np.floor(t_now / self.grid_step + 1e-9)) + 1
            exp_end = expectations()
            grid[k_end] = self._d_b(exp_end)
            if record_events:
                record.grid_detail[k_end] = (
                    tuple(float(x) for x in exp_end), target_prob(),
                )
        exp = expectations()
        board = tuple(int(round(x)) for x in exp)
        if np.max(np.abs(exp - np.asarray(board))) < 1e-9:
            record.final_board = board
        if record_grid:
            n = max(grid) + 1
            values = np.empty(n)
            last = grid[0]
            for k in range(n):
                last = grid.get(k, last)
                values[k] = last
            record.grid_db = values
        return record


def _run_range(
    engine: TrajectoryEngine,
    ids: Sequence[int],
    master_seed: int,
    max_repetitions: int,
    record_grid: bool,
    record_events: bool,
) -> list[TrajectoryRecord]:
    return [
        engine.run(
            i,
            master_seed,
            max_repetitions=max_repetitions,
            record_grid=record_grid,
            record_events=record_events,
        )
        for i in ids
    ]


def _scatter(
    engine: TrajectoryEngine,
    n_traj: int,
    master_seed: int,
    max_repetitions: int,
    record_grid: bool,
    record_events: bool,
    workers: int,
) -> list[TrajectoryRecord]:
    ids = list(range(n_traj))
    if workers <= 1 or n_traj < 2 * workers:
        return _run_range(
            engine, ids, master_seed, max_repetitions, record_grid, record_events
        )
    chunks = [ids[k::workers] for k in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(
                _run_range, engine, chunk, master_seed,
                max_repetitions, record_grid, record_events,
            )
            for chunk in chunks
        ]
        records = [r for f in futures for r in f.result()]
    records.sort(key=lambda r: r.trajectory_id)
    return records


def run_ensemble(
    engine: TrajectoryEngine,
    n_traj: int,
    master_seed: int,
    max_repetitions: int = DEFAULT_MAX_REPETITIONS,
    workers: int = 1,
    record_events: int = 0,
) -> tuple[EnsembleStats, list[TrajectoryRecord]]:
    """Run n_traj seeded trajectories and aggregate d_B on the shared grid.

    ``record_events`` keeps full event logs for that many leading
    trajectories (grid samples are kept for all, they feed the statistics).
    """
    records = _scatter(
        engine, n_traj, master_seed, max_repetitions,
        record_grid=True, record_events=False, workers=workers,
    )
    if record_events:
        # re-run the leading trajectories with event logging; identical
        # seeds make this a pure re-materialization
        for i in range(min(record_events, n_traj)):
            records[i] = engine.run(
                i, master_seed, max_repetitions=max_repetitions,
                record_grid=True, record_events=True,
            )
    length = max(r.grid_db.size for r in records)
    table = np.empty((len(records), length))
    for row, rec in enumerate(records):
        v = rec.grid_db
        table[row, : v.size] = v
        table[row, v.size:] = v[-1]
    times = engine.grid_step * np.arange(length)
    stats = EnsembleStats(
        strategy=engine.strategy,
        grid_step=engine.grid_step,
        times=times,
        mean=table.mean(axis=0),
        std=table.std(axis=0),
        n_traj=n_traj,
    )
    return stats, records


def convergence_time(
    stats: EnsembleStats, threshold: float
) -> tuple[float, float] | None:
    """First grid time with mean d_B >= threshold, plus the time-averaged
    std of d_B over [0, that time]; None when never reached."""
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    hits = np.flatnonzero(stats.mean >= threshold)
    if hits.size == 0:
        return None
    k = int(hits[0])
    return float(stats.times[k]), float(np.mean(stats.std[: k + 1]))


def success_histogram(
    engine: TrajectoryEngine,
    repetitions: int,
    shots: int,
    master_seed: int,
    workers: int = 1,
) -> HistogramResult:
    """Distribution of final measured boards after a fixed repetition budget."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    records = _scatter(
        engine, shots, master_seed, repetitions,
        record_grid=False, record_events=False, workers=workers,
    )
    counts: dict[tuple[int, ...], int] = {}
    for rec in records:
        if rec.final_board is None:
            raise RuntimeError("trajectory ended in a non-Fock state")
        counts[rec.final_board] = counts.get(rec.final_board, 0) + 1
    probabilities = {occ: c / shots for occ, c in sorted(counts.items(), reverse=True)}
    target_label = probabilities.get(engine.target, 0.0)
    initial_label = sum(
        p for occ, p in probabilities.items()
        if occ in engine._initial_support and occ != engine.target
    )
    rest_label = 1.0 - target_label - initial_label
    return HistogramResult(
        strategy=engine.strategy,
        repetitions=repetitions,
        shots=shots,
        probabilities=probabilities,
        target_label=target_label,
        initial_label=initial_label,
        rest_label=rest_label,
    )
