"""Projective site-occupation measurement: exact outcome distributions and
seeded inverse-CDF sampling with state collapse.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import StateVector

PROB_FLOOR = 1e-14


class MeasurementError(ValueError):
    """Raised for empty site sets or unnormalized inputs."""


@dataclass(frozen=True)
class MeasurementOutcome:
    """One projective outcome: joint counts on the measured sites."""

    measured_sites: tuple[int, ...]
    counts: tuple[int, ...]
    probability: float
    post_state: StateVector


def _site_tuple(state: StateVector, sites: Iterable[int]) -> tuple[int, ...]:
    out = tuple(sorted({int(s) for s in sites}))
    if not out:
        raise MeasurementError("measurement requires a non-empty site set")
    m = state.basis.shape.sites
    for s in out:
        if not 0 <= s < m:
            raise MeasurementError(f"site {s} outside lattice of {m} sites")
    return out


def outcome_distribution(state: StateVector, sites: Iterable[int]) -> list[MeasurementOutcome]:
    """All nonzero-probability joint outcomes, in canonical basis order.

    Outcomes are ordered by the first basis index at which their occupation
    pattern appears, which matches lexicographically decreasing count order.
    """
    site_t = _site_tuple(state, sites)
    pops = np.abs(state.amplitudes) ** 2
    groups: dict[tuple[int, ...], list[int]] = {}
    for k, occ in enumerate(state.basis.states):
        key = tuple(occ[s] for s in site_t)
        groups.setdefault(key, []).append(k)
    outcomes = []
    for key, idxs in groups.items():  # dict preserves first-seen (canonical) order
        prob = float(pops[idxs].sum())
        if prob <= PROB_FLOOR:
            continue
        post = np.zeros_like(state.amplitudes)
        post[idxs] = state.amplitudes[idxs] / np.sqrt(prob)
        outcomes.append(
            MeasurementOutcome(
                measured_sites=site_t,
                counts=key,
                probability=prob,
                post_state=StateVector(state.basis, post),
            )
        )
    total = sum(o.probability for o in outcomes)
    if abs(total - 1.0) > 1e-9:
        raise MeasurementError(f"outcome probabilities sum to {total}, state not normalized")
    return outcomes


def sample_measurement(
    state: StateVector,
    sites: Iterable[int],
    rng: np.random.Generator,
    distribution: Sequence[MeasurementOutcome] | None = None,
) -> MeasurementOutcome:
    """Draw one outcome by inverse-CDF over the canonically ordered list."""
    if distribution is None:
        distribution = outcome_distribution(state, sites)
    u = rng.random()
    acc = 0.0
    for outcome in distribution:
        acc += outcome.probability
        if u < acc:
            return outcome
    return distribution[-1]
