"""Bose-Hubbard dynamics: Hamiltonian assembly, spectral propagation,
and Zeno-locked (projected) propagation on pinned-site sectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .fock import FockBasis, FockSpaceError, hop_matrix

HERMITICITY_TOL = 1e-12
LEAKAGE_TOL = 1e-9


class DynamicsError(ValueError):
    """Raised for non-Hermitian operators or empty locked sectors."""


@dataclass(frozen=True)
class ModelParams:
    """Bose-Hubbard couplings; times are measured in units of 1/J."""

    hopping: float = 1.0
    interaction: float = 0.0
    chemical_potential: float = 0.0


@dataclass(frozen=True)
class LockSpec:
    """Projective pinning of a set of sites at fixed occupation numbers."""

    pins: tuple[tuple[int, int], ...]

    @classmethod
    def from_dict(cls, pins: Mapping[int, int]) -> "LockSpec":
        return cls(tuple(sorted((int(s), int(n)) for s, n in pins.items())))

    @property
    def as_dict(self) -> dict[int, int]:
        return dict(self.pins)

    @property
    def sites(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.pins)

    def admits(self, occupation: Sequence[int]) -> bool:
        return all(occupation[s] == n for s, n in self.pins)


@dataclass
class StateVector:
    """Normalized state in the canonical Fock basis."""

    basis: FockBasis
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.basis.dimension,):
            raise DynamicsError(
                f"amplitude vector of length {self.amplitudes.shape} does not "
                f"match basis dimension {self.basis.dimension}"
            )

    @classmethod
    def from_occupation(cls, basis: FockBasis, occupation: Sequence[int]) -> "StateVector":
        amp = np.zeros(basis.dimension, dtype=complex)
        amp[basis.index(occupation)] = 1.0
        return cls(basis, amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise DynamicsError("cannot normalize the zero vector")
        return StateVector(self.basis, self.amplitudes / n)

    def occupation_expectations(self) -> np.ndarray:
        pops = np.abs(self.amplitudes) ** 2
        return pops @ self.basis.occupation_matrix()


@dataclass
class Sector:
    """Eigendecomposition of H restricted to the basis states kept by a lock.

    ``kept`` indexes into the full basis; evolution, probability curves and
    measurement distributions all reduce to dense algebra in this sub-block.
    """

    kept: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return self.kept.size

    def evolve(self, sub: np.ndarray, t: float) -> np.ndarray:
        phases = np.exp(-1j * self.eigenvalues * t)
        return self.eigenvectors @ (phases * (self.eigenvectors.conj().T @ sub))

    def evolve_many(self, sub: np.ndarray, times: np.ndarray) -> np.ndarray:
        """Columns are the evolved sub-vectors, one per requested time."""
        coeff = self.eigenvectors.conj().T @ sub
        phases = np.exp(-1j * np.outer(self.eigenvalues, times))
        return self.eigenvectors @ (phases * coeff[:, None])

    def transfer_probability(self, src: int, dst: int, times: np.ndarray) -> np.ndarray:
        """|<dst| U(t) |src>|^2 for full-basis indices src, dst over a time grid."""
        pos = {int(k): p for p, k in enumerate(self.kept)}
        a = self.eigenvectors[pos[src], :]
        b = self.eigenvectors[pos[dst], :]
        amp = (b.conj() * a) @ np.exp(-1j * np.outer(self.eigenvalues, times))
        return np.abs(amp) ** 2


@dataclass
class HermitianOperator:
    """Dense Hermitian matrix with a cache of locked-sector decompositions."""

    matrix: np.ndarray
    basis: FockBasis
    _sectors: dict[LockSpec | None, Sector] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if dev > HERMITICITY_TOL:
            raise DynamicsError(f"operator is not Hermitian (deviation {dev:.2e})")

    def sector(self, lock: LockSpec | None = None) -> Sector:
        if lock not in self._sectors:
            kept = kept_indices(self.basis, lock)
            block = self.matrix[np.ix_(kept, kept)]
            evals, evecs = np.linalg.eigh(block)
            self._sectors[lock] = Sector(kept=kept, eigenvalues=evals, eigenvectors=evecs)
        return self._sectors[lock]


def build_hamiltonian(basis: FockBasis, params: ModelParams = ModelParams()) -> HermitianOperator:
    """Open-boundary Bose-Hubbard Hamiltonian in the canonical basis."""
    m = basis.shape.sites
    h = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    for i in range(m - 1):
        hop = hop_matrix(basis, i, i + 1).toarray()
        h -= params.hopping * (hop + hop.conj().T)
    if params.interaction or params.chemical_potential:
        occ = basis.occupation_matrix()
        onsite = 0.5 * params.interaction * np.sum(occ * (occ - 1.0), axis=1)
        onsite -= params.chemical_potential * np.sum(occ, axis=1)
        h += np.diag(onsite)
    return HermitianOperator(matrix=h, basis=basis)


def kept_indices(basis: FockBasis, lock: LockSpec | None) -> np.ndarray:
    """Full-basis indices of the states compatible with a lock."""
    if lock is None or not lock.pins:
        return np.arange(basis.dimension)
    for s, n in lock.pins:
        if not 0 <= s < basis.shape.sites:
            raise FockSpaceError(f"locked site {s} outside lattice")
        if n < 0 or n > basis.shape.particles:
            raise DynamicsError(f"pinned occupation {n} on site {s} is unphysical")
    kept = np.array(
        [k for k, occ in enumerate(basis.states) if lock.admits(occ)], dtype=int
    )
    if kept.size == 0:
        raise DynamicsError(f"lock {lock.as_dict} keeps no basis states")
    return kept


def zeno_projector(basis: FockBasis, lock: LockSpec | None) -> np.ndarray:
    """Diagonal projector onto the locked sector."""
    p = np.zeros((basis.dimension, basis.dimension))
    kept = kept_indices(basis, lock)
    p[kept, kept] = 1.0
    return p


def propagate(h: HermitianOperator, state: StateVector, t: float) -> StateVector:
    """exp(-iHt)|psi> via the cached spectral decomposition."""
    sec = h.sector(None)
    return StateVector(state.basis, sec.evolve(state.amplitudes, t))


def locked_propagate(
    h: HermitianOperator, state: StateVector, lock: LockSpec, t: float
) -> StateVector:
    """Zeno-limit evolution P exp(-i PHP t) P |psi>.

    The input state must already live in the locked sector up to numerical
    leakage of LEAKAGE_TOL in norm.
    """
    sec = h.sector(lock)
    sub = state.amplitudes[sec.kept]
    leakage = abs(state.norm**2 - float(np.vdot(sub, sub).real))
    if leakage > LEAKAGE_TOL:
        raise DynamicsError(
            f"state leaks weight {leakage:.2e} outside lock {lock.as_dict}"
        )
    out = np.zeros_like(state.amplitudes)
    out[sec.kept] = sec.evolve(sub, t)
    return StateVector(state.basis, out)
