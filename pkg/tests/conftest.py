import numpy as np
import pytest

from manqala.dynamics import StateVector, build_hamiltonian
from manqala.fock import LatticeShape, enumerate_basis
from manqala.planner import ScenarioPlanner


@pytest.fixture(scope="session")
def basis33():
    return enumerate_basis(LatticeShape(3, 3))


@pytest.fixture(scope="session")
def h33(basis33):
    return build_hamiltonian(basis33)


@pytest.fixture(scope="session")
def planner33(h33):
    return ScenarioPlanner(h33, (3, 0, 0))


@pytest.fixture(scope="session")
def basis55():
    return enumerate_basis(LatticeShape(5, 5))


@pytest.fixture(scope="session")
def h55(basis55):
    return build_hamiltonian(basis55)


@pytest.fixture(scope="session")
def appendix_d_state(basis55):
    amps = np.zeros(basis55.dimension, dtype=complex)
    amps[basis55.index((3, 1, 0, 1, 0))] = np.sqrt(2.0 / 3.0)
    amps[basis55.index((1, 3, 0, 1, 0))] = -1j / np.sqrt(3.0)
    return StateVector(basis55, amps)
