"""Level-set iteration machinery: energy estimates, the convergence lemma, patch partitions and bound certificates."""

from .certificate import (
    BoundCertificate,
    CertificateError,
    ExponentAlgebra,
    compute_bound_certificate,
    constant_chain,
    exponent_algebra,
    supersolution_certificate,
)
from .energy import (
    ChainCheck,
    EnergyCheck,
    EnergyConstants,
    IterationVariables,
    LevelSet,
    PreconditionError,
    TruncationEnergy,
    chain_checks,
    check_energy_estimate,
    energy_constants,
    iteration_variables,
    kappa_floor,
    level_sets,
    truncation_energy,
)
from .lemma import IterationParams, LemmaResult, decay_bound, iterate_lemma, threshold_sweep, thresholds
from .partition import PartitionData, PartitionError, ball_centres, build_partition

__all__ = [
    "BoundCertificate",
    "CertificateError",
    "ExponentAlgebra",
    "compute_bound_certificate",
    "constant_chain",
    "exponent_algebra",
    "supersolution_certificate",
    "ChainCheck",
    "EnergyCheck",
    "EnergyConstants",
    "IterationVariables",
    "LevelSet",
    "PreconditionError",
    "TruncationEnergy",
    "chain_checks",
    "check_energy_estimate",
    "energy_constants",
    "iteration_variables",
    "kappa_floor",
    "level_sets",
    "truncation_energy",
    "IterationParams",
    "LemmaResult",
    "decay_bound",
    "iterate_lemma",
    "threshold_sweep",
    "thresholds",
    "PartitionData",
    "PartitionError",
    "ball_centres",
    "build_partition",
]
