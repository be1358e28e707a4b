"""Bosonic Fock space for N particles on an M-site chain.

Basis states are occupation vectors (n_0, ..., n_{M-1}) with sum(n) = N,
enumerated in lexicographically decreasing order so that (N, 0, ..., 0)
is always index 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterator, Sequence

import numpy as np
from scipy import sparse

MAX_DIMENSION = 1_000_000

Occupation = tuple[int, ...]


class FockSpaceError(ValueError):
    """Raised for invalid lattice shapes or basis lookups."""


@dataclass(frozen=True)
class LatticeShape:
    """Number of sites and conserved particle total for one sector."""

    sites: int
    particles: int

    def __post_init__(self) -> None:
        if self.sites < 1:
            raise FockSpaceError(f"need at least one site, got {self.sites}")
        if self.particles < 0:
            raise FockSpaceError(f"negative particle count {self.particles}")

    @property
    def dimension(self) -> int:
        return comb(self.particles + self.sites - 1, self.particles)


def _occupations(sites: int, particles: int) -> Iterator[Occupation]:
    if sites == 1:
        yield (particles,)
        return
    for n in range(particles, -1, -1):
        for rest in _occupations(sites - 1, particles - n):
            yield (n,) + rest


@dataclass(frozen=True)
class FockBasis:
    """Immutable enumeration of a fixed-N occupation basis."""

    shape: LatticeShape
    states: tuple[Occupation, ...]
    _index: dict[Occupation, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        self._index.update({occ: k for k, occ in enumerate(self.states)})

    @property
    def dimension(self) -> int:
        return len(self.states)

    def index(self, occupation: Sequence[int]) -> int:
        key = tuple(int(n) for n in occupation)
        try:
            return self._index[key]
        except KeyError:
            raise FockSpaceError(
                f"{key} is not a member of the (N={self.shape.particles}, "
                f"M={self.shape.sites}) basis"
            ) from None

    def occupation_matrix(self) -> np.ndarray:
        """(dimension, sites) array of occupation numbers, row k = state k."""
        return np.asarray(self.states, dtype=float)


def enumerate_basis(shape: LatticeShape, max_dimension: int = MAX_DIMENSION) -> FockBasis:
    """Build the canonical basis, refusing spaces larger than ``max_dimension``."""
    dim = shape.dimension
    if dim > max_dimension:
        raise FockSpaceError(
            f"basis dimension {dim} exceeds limit {max_dimension} "
            f"for N={shape.particles}, M={shape.sites}"
        )
    states = tuple(_occupations(shape.sites, shape.particles))
    assert len(states) == dim
    return FockBasis(shape=shape, states=states)


def hop_matrix(basis: FockBasis, i: int, j: int) -> sparse.csr_matrix:
    """Matrix of a_i^dagger a_j in the canonical basis (stored sparse)."""
    m = basis.shape.sites
    for s in (i, j):
        if not 0 <= s < m:
            raise FockSpaceError(f"site {s} outside lattice of {m} sites")
    rows, cols, vals = [], [], []
    for col, occ in enumerate(basis.states):
        if i == j:
            if occ[i]:
                rows.append(col)
                cols.append(col)
                vals.append(float(occ[i]))
            continue
        if occ[j] == 0:
            continue
        dst = list(occ)
        dst[j] -= 1
        dst[i] += 1
        rows.append(basis.index(dst))
        cols.append(col)
        vals.append(np.sqrt((occ[i] + 1) * occ[j]))
    dim = basis.dimension
    return sparse.csr_matrix(
        (np.asarray(vals), (rows, cols)), shape=(dim, dim), dtype=complex
    )


def number_operator(basis: FockBasis, site: int) -> sparse.csr_matrix:
    """Diagonal occupation-number operator for one site."""
    return hop_matrix(basis, site, site)
