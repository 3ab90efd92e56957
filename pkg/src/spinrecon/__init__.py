"""Pure spin-state reconstruction from simulated Stern-Gerlach measurements.

The package has four layers:

* ``core`` — exact spin/coherent-state machinery and the state <-> zeros maps,
* ``measurement`` — the probability oracle (exact or finite-shot sampled),
* ``reconstruct`` — node sets, the linear inversion step, candidate
  enumeration, both disambiguation procedures, and the direct zero search,
* ``cli`` — a command-line front end with deterministic JSON/CSV output.
"""

from .core import (
    INFINITY,
    DegenerateStateError,
    Direction,
    PhasePoint,
    PureState,
    Spin,
    SpinMatrices,
    ZeroSet,
    chordal_distance,
    coherent_state,
    coherent_state_by_rotation,
    direction_to_point,
    fidelity,
    husimi,
    overlap,
    point_to_direction,
    random_state,
    spin_matrices,
    state_from_zeros,
    time_reverse,
    zeros_of,
)
from .measurement import MeasurementOracle, probability_s
from .reconstruct import (
    CandidateSet,
    CircleGeometry,
    CoefficientVector,
    DuplicateNodeError,
    EquatorGeometry,
    IllConditionedWarning,
    InconclusiveProbeError,
    InversionPair,
    LineGeometry,
    NodeSet,
    ReconstructConfig,
    ReconstructionReport,
    RetriesExhaustedError,
    RootPairingError,
    ZeroPair,
    ZeroSearchError,
    ambiguity_experiment,
    coefficient_roots,
    default_line_nodes,
    design_matrix,
    disambiguate_single_probe,
    disambiguate_zero_probe,
    enumerate_candidates,
    equator_pairs,
    make_nodes,
    reconstruct,
    solve_coefficients,
    vandermonde_det,
    zero_search,
)

__version__ = "0.1.0"
