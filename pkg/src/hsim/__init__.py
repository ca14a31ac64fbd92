"""Randomized classical Hamiltonian simulation with an exact reference oracle.

``exp(i H t) psi`` is approximated by Nyström-type sketches for PSD and general
Hermitian ``H`` (:mod:`hsim.nystrom`), by a dense emulation of the quantum-walk
LCU algorithm (:mod:`hsim.lcu`), and checked against :mod:`hsim.oracle`.
"""

from .errors import (
    AllZeroWeights,
    DimensionMismatch,
    DimensionTooLarge,
    EmptyTree,
    HsimError,
    InconsistentOracle,
    InvalidDistribution,
    InvalidParams,
    NonConvergence,
    NotHermitian,
    NotPsd,
    ValidationError,
    ZeroFrobenius,
    ZeroMatrix,
    ZeroProduct,
    ZeroTrace,
)
from .lcu import build_walk, lcu_evolve, walk_eigen_check
from .matrix import HermitianMatrix, NormBundle, StateVector, hermitian_eigendecompose, matvec, norms
from .nystrom import (
    SimulationPlan,
    evolve_with_shift,
    general_evolve,
    general_plan,
    nystrom_psd_evolve,
    psd_plan,
    trace_shift,
)
from .oracle import exact_evolve, operator_error, state_error
from .randmm import optimal_probabilities, sketch_multiply
from .sampling import RowSearchOracle, SampleQueryTree, SeededRng, row_search_sample, select_stream

__version__ = "0.1.0"
