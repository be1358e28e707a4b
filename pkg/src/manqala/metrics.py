"""Distance and progress metrics between occupation configurations.

Two tunneling-distance conventions are provided:

* ``adjacent`` -- sum over nearest-neighbour pairs of |delta_k + delta_{k+1}|
  with delta = nA - nB (the published form); it vanishes on some unequal
  configurations whose differences alternate in sign.
* ``cumulative`` -- sum over sites of |sum_{j<=k} delta_j|, which counts the
  net particle flux through each bond and is zero only for equal
  configurations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import StateVector

METRIC_MODES = ("adjacent", "cumulative")


def _delta(n_a: Sequence[int], n_b: Sequence[int]) -> np.ndarray:
    a = np.asarray(n_a, dtype=float)
    b = np.asarray(n_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"configuration shapes differ: {a.shape} vs {b.shape}")
    return a - b


def tunneling_distance(n_a: Sequence[int], n_b: Sequence[int], mode: str = "adjacent") -> float:
    if mode not in METRIC_MODES:
        raise ValueError(f"unknown metric mode {mode!r}; expected one of {METRIC_MODES}")
    d = _delta(n_a, n_b)
    if mode == "adjacent":
        if d.size == 1:
            return 0.0
        return float(np.sum(np.abs(d[:-1] + d[1:])))
    return float(np.sum(np.abs(np.cumsum(d))))


def bosonic_distance(
    n_a: Sequence[int],
    n_target: Sequence[int],
    n_initial: Sequence[int],
    mode: str = "adjacent",
) -> float:
    """Progress measure d_B = 1 - d_T(nA, targ) / d_T(n0, targ).

    Equals 1 when nA matches the target, 0 at the initial configuration, and
    may be negative for configurations farther from the target than the start.
    When the initial configuration already coincides with the target the
    normalization vanishes and d_B is defined to be 1.
    """
    denom = tunneling_distance(n_initial, n_target, mode)
    # distinct configurations are at least one tunneling event apart; anything
    # smaller is floating-point residue from non-integer expectation values
    if denom < 1e-9:
        return 1.0
    return 1.0 - tunneling_distance(n_a, n_target, mode) / denom


def occupation_expectations(state: StateVector) -> np.ndarray:
    """Per-site expected particle numbers <n_i> for a normalized state."""
    return state.occupation_expectations()


def target_probability(state: StateVector, target: "StateVector | Sequence[int]") -> float:
    """|<target|psi>|^2; the target may be a state or a bare occupation vector."""
    if isinstance(target, StateVector):
        if target.basis is not state.basis and target.basis != state.basis:
            raise ValueError("target and state live in different bases")
        return float(np.abs(np.vdot(target.amplitudes, state.amplitudes)) ** 2)
    idx = state.basis.index(target)
    return float(np.abs(state.amplitudes[idx]) ** 2)


@dataclass(frozen=True)
class CostWeights:
    """Weights (lambda1, lambda2, lambda3) for the scalar strategy cost."""

    lambda1: float = 1.0
    lambda2: float = 0.0
    lambda3: float = 0.0

    def __post_init__(self) -> None:
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ValueError("cost weights must be non-negative")


def manqala_cost(
    weights: CostWeights,
    bosonic_dist: float,
    num_projections: int,
    mancala_violations: int,
) -> float:
    """Weighted cost: residual distance plus measurement and rule penalties."""
    return (
        weights.lambda1 * (1.0 - bosonic_dist)
        + weights.lambda2 * num_projections
        + weights.lambda3 * mancala_violations
    )
