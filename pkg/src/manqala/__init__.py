"""manqala: strategy workbench for measurement-assisted quantum state
engineering of bosons on a 1-D lattice."""

from .fock import FockBasis, LatticeShape, enumerate_basis, hop_matrix
from .dynamics import (
    HermitianOperator,
    LockSpec,
    ModelParams,
    StateVector,
    build_hamiltonian,
    locked_propagate,
    propagate,
    zeno_projector,
)
from .metrics import bosonic_distance, manqala_cost, target_probability, tunneling_distance
from .measurement import outcome_distribution, sample_measurement
from .planner import (
    Demarcation,
    DesignatedTimes,
    Move,
    ScenarioPlanner,
    compile_moves,
    demarcate_sublattices,
    designated_times,
    tchoukaillon_plan,
)
from .strategies import Done, Evolve, Measure, prepare_controller, zeno_lock
from .ensemble import (
    EnsembleStats,
    TrajectoryEngine,
    convergence_time,
    derive_seed,
    run_ensemble,
    success_histogram,
)

__version__ = "0.1.0"
