"""Command-line entry point: scenario files, plan/run/histogram/report
subcommands, and the persistent CSV/JSON artifact formats.

Exit codes: 0 success, 1 config error, 2 runtime error, 3 at least one
trajectory unconverged within its repetition budget (artifacts still written).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dynamics import LockSpec, ModelParams, StateVector, build_hamiltonian
from .fock import LatticeShape, enumerate_basis
from .metrics import METRIC_MODES
from .planner import DEFAULT_GRID, DEFAULT_HORIZON, ScenarioPlanner, compile_moves, demarcate_sublattices
from .strategies import STRATEGIES, zeno_lock
from .ensemble import (
    TrajectoryEngine,
    convergence_time,
    run_ensemble,
    success_histogram,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_UNCONVERGED = 3

_METRIC_ALIASES = {"eq2": "adjacent", "adjacent": "adjacent", "cumulative": "cumulative"}


class ScenarioError(ValueError):
    """Configuration/schema problem; maps to exit code 1."""


@dataclass
class Scenario:
    sites: int
    particles: int
    model: ModelParams
    initial_spec: Any
    target: tuple[int, ...]
    strategy: str = "all"
    trajectories: int = 1000
    shots: int = 10000
    max_repetitions: int | None = None
    seed: int = 20200513
    grid_step: float = 0.01
    horizon: float = DEFAULT_HORIZON
    metric_mode: str = "adjacent"
    time_overrides: list[dict] = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    @property
    def hash(self) -> str:
        payload = {k: v for k, v in self.raw.items() if k != "seed"}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def parse_scenario(path: str | Path) -> Scenario:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from None
    _require(isinstance(raw, dict), "scenario must be a JSON object")
    for key in ("sites", "particles", "initial", "target"):
        _require(key in raw, f"scenario is missing required field '{key}'")
    sites = int(raw["sites"])
    particles = int(raw["particles"])
    _require(sites >= 1, "field 'sites' must be >= 1")
    _require(particles >= 0, "field 'particles' must be >= 0")
    target = tuple(int(x) for x in raw["target"])
    _require(len(target) == sites, "field 'target' length must equal 'sites'")
    _require(
        sum(target) == particles,
        f"target holds {sum(target)} particles, expected {particles}",
    )
    model_raw = raw.get("model", {})
    model = ModelParams(
        hopping=float(model_raw.get("hopping", 1.0)),
        interaction=float(model_raw.get("interaction", 0.0)),
        chemical_potential=float(model_raw.get("chemical_potential", 0.0)),
    )
    strategy = raw.get("strategy", "all")
    _require(
        strategy in STRATEGIES + ("all",),
        f"unknown strategy '{strategy}'; expected one of {STRATEGIES + ('all',)}",
    )
    mode_raw = raw.get("metric_mode", "eq2")
    _require(
        mode_raw in _METRIC_ALIASES,
        f"unknown metric_mode '{mode_raw}'; expected one of {sorted(_METRIC_ALIASES)}",
    )
    overrides = raw.get("time_overrides", [])
    _require(isinstance(overrides, list), "'time_overrides' must be a list")
    for entry in overrides:
        _require(
            isinstance(entry, dict) and "occupation" in entry and "time" in entry,
            "each time_overrides entry needs 'occupation' and 'time'",
        )
    scenario = Scenario(
        sites=sites,
        particles=particles,
        model=model,
        initial_spec=raw["initial"],
        target=target,
        strategy=strategy,
        trajectories=int(raw.get("trajectories", 1000)),
        shots=int(raw.get("shots", 10000)),
        max_repetitions=(
            int(raw["max_repetitions"]) if raw.get("max_repetitions") else None
        ),
        seed=int(raw.get("seed", 20200513)),
        grid_step=float(raw.get("grid_step", 0.01)),
        horizon=float(raw.get("horizon", DEFAULT_HORIZON)),
        metric_mode=_METRIC_ALIASES[mode_raw],
        time_overrides=overrides,
        raw=raw,
    )
    build_initial_state(scenario)  # validate eagerly for field-level errors
    return scenario


def build_initial_state(scenario: Scenario) -> StateVector:
    basis = enumerate_basis(LatticeShape(scenario.sites, scenario.particles))
    spec = scenario.initial_spec
    if spec == "superfluid" or (isinstance(spec, dict) and spec.get("superfluid")):
        amps = np.zeros(basis.dimension, dtype=complex)
        n_fact = math.factorial(scenario.particles)
        for k, occ in enumerate(basis.states):
            denom = 1.0
            for n in occ:
                denom *= math.factorial(n)
            amps[k] = math.sqrt(n_fact / denom) / scenario.sites ** (scenario.particles / 2)
        return StateVector(basis, amps)
    if isinstance(spec, dict) and "fock" in spec:
        occ = tuple(int(x) for x in spec["fock"])
        _require(
            sum(occ) == scenario.particles,
            f"initial fock state holds {sum(occ)} particles, expected {scenario.particles}",
        )
        return StateVector.from_occupation(basis, occ)
    if isinstance(spec, dict) and "superposition" in spec:
        amps = np.zeros(basis.dimension, dtype=complex)
        for term in spec["superposition"]:
            _require(
                isinstance(term, dict) and "amplitude" in term and "occupation" in term,
                "each superposition term needs 'amplitude' and 'occupation'",
            )
            occ = tuple(int(x) for x in term["occupation"])
            _require(
                sum(occ) == scenario.particles,
                f"superposition term {occ} holds {sum(occ)} particles, "
                f"expected {scenario.particles}",
            )
            re, im = term["amplitude"]
            amps[basis.index(occ)] += complex(float(re), float(im))
        norm = float(np.linalg.norm(amps))
        _require(norm > 0, "superposition amplitudes are all zero")
        if abs(norm - 1.0) > 1e-9:
            print(
                f"warning: superposition norm {norm:.6f} != 1; renormalizing",
                file=sys.stderr,
            )
        return StateVector(basis, amps / norm)
    raise ScenarioError(
        "field 'initial' must be {'fock': [...]}, {'superposition': [...]}, "
        "or 'superfluid'"
    )


def _parse_override_lock(entry: dict) -> LockSpec | None:
    lock_raw = entry.get("lock")
    if not lock_raw:
        return None
    return LockSpec.from_dict({int(s): int(n) for s, n in lock_raw.items()})


def build_engines(scenario: Scenario) -> dict[str, TrajectoryEngine]:
    """One engine per requested strategy, sharing H and the planner caches."""
    initial = build_initial_state(scenario)
    h = build_hamiltonian(initial.basis, scenario.model)
    overrides = {
        (_parse_override_lock(e), tuple(int(x) for x in e["occupation"])): float(e["time"])
        for e in scenario.time_overrides
    }
    planner = ScenarioPlanner(
        h, scenario.target, horizon=scenario.horizon, grid=DEFAULT_GRID,
        overrides=overrides,
    )
    names = STRATEGIES if scenario.strategy == "all" else (scenario.strategy,)
    return {
        name: TrajectoryEngine(
            h=h,
            initial=initial,
            target=scenario.target,
            planner=planner,
            strategy=name,
            metric_mode=scenario.metric_mode,
            grid_step=scenario.grid_step,
        )
        for name in names
    }


# ---------------------------------------------------------------------------
# artifact writers


def _occ_str(values: Sequence[float], decimals: int | None = None) -> str:
    if decimals is None:
        return ";".join(str(int(v)) for v in values)
    return ";".join(f"{v:.{decimals}f}" for v in values)


def write_plan(scenario: Scenario, out_dir: Path) -> None:
    engines = build_engines(scenario)
    planner = next(iter(engines.values())).planner
    basis = planner.h.basis
    target = scenario.target
    unlocked = planner.table(list(basis.states))
    plan: dict[str, Any] = {
        "scenario_hash": scenario.hash,
        "seed": scenario.seed,
        "horizon": scenario.horizon,
        "target": list(target),
        "unlocked_times": [
            {
                "occupation": list(occ),
                "time": round(t, 6),
                "probability": round(unlocked.probabilities[occ], 9),
                "source": "override"
                if (None, occ) in planner.overrides
                else "computed",
            }
            for occ, t in unlocked.entries.items()
        ],
        "zeno_times": [],
        "branches": [],
    }
    for occ in basis.states:
        lock = zeno_lock(occ, target)
        if lock is None:
            continue
        t = planner.time_for(occ, lock=lock)
        plan["zeno_times"].append(
            {
                "occupation": list(occ),
                "lock": {str(s): n for s, n in lock.pins},
                "time": round(t, 6),
                "source": "override"
                if (lock, occ) in planner.overrides
                else "computed",
            }
        )
    if scenario.strategy in ("all", "manqala", "mod-manqala"):
        initial = build_initial_state(scenario)
        support = [
            basis.states[int(k)]
            for k in np.flatnonzero(np.abs(initial.amplitudes) ** 2 > 1e-12)
        ]
        for branch in support:
            if branch == target:
                continue
            dem = demarcate_sublattices(branch, target)
            entry = {
                "branch": list(branch),
                "partition": [list(g) for g in dem.partition],
                "permutation": list(dem.permutation),
                "moves": {},
            }
            for constrained, label in ((True, "manqala"), (False, "mod-manqala")):
                if label != scenario.strategy and scenario.strategy != "all":
                    continue
                try:
                    moves = compile_moves(dem.permutation, constrained, branch)
                    entry["moves"][label] = [
                        {
                            "kind": mv.kind,
                            "leftmost_site": mv.leftmost_site,
                            "duration": round(mv.duration, 6),
                        }
                        for mv in moves
                    ]
                except Exception as exc:
                    entry["moves"][label] = str(exc)
            plan["branches"].append(entry)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "plan.json").write_text(json.dumps(plan, indent=2) + "\n")


def write_stats_csv(path: Path, stats) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "Jt", "mean_dB", "std_dB", "n_traj"])
        for t, m, s in zip(stats.times, stats.mean, stats.std):
            writer.writerow(
                [stats.strategy, f"{t:.4f}", f"{m:.9f}", f"{s:.9f}", stats.n_traj]
            )


def write_trajectories_csv(path: Path, records, grid_step: float) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trajectory_id", "Jt", "event", "occupations", "d_B", "target_prob", "outcome"]
        )
        for rec in records:
            rows = []
            for k in sorted(rec.grid_detail):
                exp, tp = rec.grid_detail[k]
                rows.append(
                    (k * grid_step, 0, "grid", exp, rec.grid_db[k], tp, None)
                )
            for order, ev in enumerate(rec.events, start=1):
                rows.append(
                    (ev.time, order, ev.kind, ev.expectations, ev.d_b, ev.target_prob, ev.outcome)
                )
            rows.sort(key=lambda r: (r[0], r[1]))
            for t, _, kind, exp, db, tp, outcome in rows:
                writer.writerow(
                    [
                        rec.trajectory_id,
                        f"{t:.6f}",
                        kind,
                        _occ_str(exp, 6),
                        f"{db:.9f}",
                        f"{tp:.9f}",
                        _occ_str(outcome) if outcome is not None else "",
                    ]
                )


def write_histogram_csv(path: Path, results) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["strategy", "repetitions", "outcome_label", "probability"])
        for res in results:
            rows = [
                ("target", res.target_label),
                ("initial", res.initial_label),
                ("rest", res.rest_label),
            ] + [(_occ_str(occ), p) for occ, p in res.probabilities.items()]
            for label, p in rows:
                writer.writerow([res.strategy, res.repetitions, label, f"{p:.6f}"])


# ---------------------------------------------------------------------------
# subcommands


def _load_plan_gate(scenario: Scenario, out_dir: Path) -> None:
    plan_path = out_dir / "plan.json"
    if not plan_path.exists():
        raise ScenarioError(
            f"no plan artifact at {plan_path}; run the 'plan' subcommand first"
        )
    plan = json.loads(plan_path.read_text())
    if plan.get("scenario_hash") != scenario.hash:
        raise ScenarioError(
            "plan artifact was built from a different scenario "
            f"(hash {plan.get('scenario_hash')} != {scenario.hash})"
        )


def cmd_plan(scenario: Scenario, args) -> int:
    write_plan(scenario, Path(args.out_dir))
    _echo_config(scenario, Path(args.out_dir))
    print(f"plan written to {Path(args.out_dir) / 'plan.json'}")
    return EXIT_OK


def cmd_run(scenario: Scenario, args) -> int:
    out_dir = Path(args.out_dir)
    _load_plan_gate(scenario, out_dir)
    engines = build_engines(scenario)
    budget = scenario.max_repetitions or 10_000
    exit_code = EXIT_OK
    for name, engine in engines.items():
        stats, records = run_ensemble(
            engine,
            scenario.trajectories,
            scenario.seed,
            max_repetitions=budget,
            workers=args.workers,
            record_events=args.record_trajectories,
        )
        write_stats_csv(out_dir / f"stats_{name}.csv", stats)
        if args.record_trajectories:
            write_trajectories_csv(
                out_dir / f"trajectories_{name}.csv",
                records[: args.record_trajectories],
                scenario.grid_step,
            )
        unconverged = sum(1 for r in records if not r.converged)
        print(
            f"{name}: {scenario.trajectories} trajectories, "
            f"{unconverged} unconverged, final mean d_B {stats.mean[-1]:.4f}"
        )
        if unconverged:
            exit_code = EXIT_UNCONVERGED
    _echo_config(scenario, out_dir)
    return exit_code


def cmd_histogram(scenario: Scenario, args) -> int:
    out_dir = Path(args.out_dir)
    _load_plan_gate(scenario, out_dir)
    engines = build_engines(scenario)
    reps_list = [int(r) for r in str(args.repetitions).split(",")]
    results = []
    for name, engine in engines.items():
        for reps in reps_list:
            res = success_histogram(
                engine, reps, scenario.shots, scenario.seed, workers=args.workers
            )
            results.append(res)
            print(
                f"{name} @ {reps} repetitions: target {res.target_label:.4f}, "
                f"initial {res.initial_label:.4f}, rest {res.rest_label:.4f}"
            )
    write_histogram_csv(out_dir / "histogram.csv", results)
    _echo_config(scenario, out_dir)
    return EXIT_OK


def cmd_report(scenario: Scenario, args) -> int:
    out_dir = Path(args.out_dir)
    summary: dict[str, Any] = {
        "scenario_hash": scenario.hash,
        "seed": scenario.seed,
        "threshold": args.threshold,
        "strategies": {},
    }
    names = STRATEGIES if scenario.strategy == "all" else (scenario.strategy,)
    for name in names:
        entry: dict[str, Any] = {
            "convergence_Jt": None,
            "avg_std_to_threshold": None,
            "histogram": {},
        }
        stats_path = out_dir / f"stats_{name}.csv"
        if stats_path.exists():
            times, means, stds = [], [], []
            with stats_path.open() as fh:
                for row in csv.DictReader(fh):
                    times.append(float(row["Jt"]))
                    means.append(float(row["mean_dB"]))
                    stds.append(float(row["std_dB"]))
            means_arr = np.asarray(means)
            hits = np.flatnonzero(means_arr >= args.threshold)
            if hits.size:
                k = int(hits[0])
                entry["convergence_Jt"] = round(times[k], 4)
                entry["avg_std_to_threshold"] = round(float(np.mean(stds[: k + 1])), 6)
        hist_path = out_dir / "histogram.csv"
        if hist_path.exists():
            with hist_path.open() as fh:
                for row in csv.DictReader(fh):
                    if row["strategy"] == name and row["outcome_label"] == "target":
                        entry["histogram"][row["repetitions"]] = float(row["probability"])
        summary["strategies"][name] = entry
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _echo_config(scenario: Scenario, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = dict(scenario.raw)
    echo["resolved_seed"] = scenario.seed
    echo["scenario_hash"] = scenario.hash
    (out_dir / "config_echo.json").write_text(json.dumps(echo, indent=2) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manqala",
        description="Simulator and strategy workbench for measurement-assisted "
        "quantum state engineering on a 1-D bosonic lattice.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("plan", "run", "histogram", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out-dir", required=True, help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument(
            "--metric-mode", choices=sorted(_METRIC_ALIASES), default=None,
            help="tunneling-distance convention override",
        )
        p.add_argument(
            "--strategy", choices=STRATEGIES + ("all",), default=None,
            help="strategy override",
        )
        if name == "run":
            p.add_argument("--trajectories", type=int, default=None)
            p.add_argument("--workers", type=int, default=1)
            p.add_argument(
                "--record-trajectories", type=int, default=5,
                help="number of leading trajectories to log in full",
            )
        if name == "histogram":
            p.add_argument("--shots", type=int, default=None)
            p.add_argument(
                "--repetitions", default="1,2,3",
                help="comma-separated repetition budgets",
            )
            p.add_argument("--workers", type=int, default=1)
        if name == "report":
            p.add_argument("--threshold", type=float, default=0.99)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = parse_scenario(args.config)
        if args.seed is not None:
            scenario.seed = args.seed
        if args.strategy is not None:
            scenario.strategy = args.strategy
        if args.metric_mode is not None:
            scenario.metric_mode = _METRIC_ALIASES[args.metric_mode]
        if getattr(args, "trajectories", None) is not None:
            scenario.trajectories = args.trajectories
        if getattr(args, "shots", None) is not None:
            scenario.shots = args.shots
        handler = {
            "plan": cmd_plan,
            "run": cmd_run,
            "histogram": cmd_histogram,
            "report": cmd_report,
        }[args.command]
        return handler(scenario, args)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
