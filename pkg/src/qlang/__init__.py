"""Swap-test verification protocols for quantum state languages.

A density-matrix simulation library plus CLI for five state properties
(prefix purity, product bipartitions, entanglement witnesses, reflection
operators, checkable states), each verified both by exact linear-algebra
oracles and by seeded finite-shot sampling of the same circuits.
"""

from .states import (
    Bipartition,
    DensityOperator,
    PureState,
    SchmidtSpectrum,
    bell_state,
    decompose_hermitian,
    ghz_state,
    is_separable_oracle,
    overlap,
    partial_trace,
    purity,
    random_pure_state,
    schmidt_spectrum,
    tensor,
)
from .circuits import (
    Circuit,
    Gate,
    ShotResult,
    build_estimation_network,
    build_purity_circuit,
    controlled_reflection,
    evolve_exact,
    probability_of_outcome,
    sample_shots,
    subset_extract,
)
from .languages import LanguageId, RegionVerdict, classify, member_L1, member_L2, member_L3
from .protocols import (
    Certificate,
    MerlinStrategy,
    Verdict,
    build_checker_from_reflection,
    merlin_L2_honest,
    merlin_L3_honest,
    merlin_L4_cheat_library,
    required_repetitions,
    verify_L1,
    verify_L2,
    verify_L3,
    verify_L4,
    verify_L5,
)
from .experiments import ExperimentConfig, ExperimentRecord, detection_rate, run_experiment, sweep

__version__ = "0.1.0"
