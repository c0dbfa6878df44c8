"""Simulation and analysis toolkit for RIS links that superimpose
information-bearing phase offsets on a beamforming configuration."""

from .analysis import (
    BoundEstimate,
    PairwiseContext,
    QBoundSpec,
    aber_union_bound,
    apep,
    build_pairwise_table,
    cpep,
    dcmc_capacity,
    delta_covariance,
    diversity_slope,
    mgf_lambda,
    pairwise_energy,
    q_exp_bound,
    q_function,
    q_two_term,
)
from .channels import (
    ChannelSampler,
    ChannelSet,
    CorrelationSpec,
    LosSpec,
    StaticChannel,
    build_los_channel,
    exponential_correlation,
    load_complex_matrix,
    sample_channel_set,
    sample_kronecker_rayleigh,
    save_complex_matrix,
    steering_vector,
)
from .config import SCHEMES, SystemConfig
from .detection import (
    DetectionResult,
    SdParams,
    linear_detect,
    ml_detect,
    qr_reduce,
    sd_layered_detect,
)
from .errors import (
    ComplexityError,
    ConfigError,
    CorrelationError,
    DegenerateInputError,
    DimensionError,
    DomainError,
    FramingError,
    RadiusExhaustedError,
    SingularChannelError,
    SrpmError,
)
from .harness import (
    CSV_COLUMNS,
    SCHEMA_VERSION,
    TRIAL_BLOCK,
    ExperimentPlan,
    analyze_aber,
    analyze_capacity,
    bench_detectors,
    build_static_setup,
    parse_config,
    rng_stream,
    run_aber_sweep,
    run_capacity_sweep,
    write_sweep,
)
from .modulation import (
    Constellation,
    EquivalentChannel,
    RisCodebook,
    SymbolPair,
    TransmitAlphabet,
    assemble_equivalent_channel,
    bits_per_use,
    build_constellation,
    build_ris_codebook,
    map_bits_to_symbols,
    pair_to_bits,
    synthesize_received,
    transmit_alphabet,
)
from .precoding import (
    PairwiseMatrixSet,
    SdrSolution,
    SolverParams,
    build_pairwise_matrices,
    keyhole_closed_form,
    precoding_objective,
    solve_sdr,
)

__version__ = "0.1.0"

__all__ = [
    "BoundEstimate",
    "ChannelSampler",
    "ChannelSet",
    "ComplexityError",
    "ConfigError",
    "Constellation",
    "CorrelationError",
    "CorrelationSpec",
    "CSV_COLUMNS",
    "DegenerateInputError",
    "DetectionResult",
    "DimensionError",
    "DomainError",
    "EquivalentChannel",
    "ExperimentPlan",
    "FramingError",
    "LosSpec",
    "PairwiseContext",
    "PairwiseMatrixSet",
    "QBoundSpec",
    "RadiusExhaustedError",
    "RisCodebook",
    "SCHEMA_VERSION",
    "SCHEMES",
    "SdParams",
    "SdrSolution",
    "SingularChannelError",
    "SolverParams",
    "SrpmError",
    "StaticChannel",
    "SymbolPair",
    "SystemConfig",
    "TRIAL_BLOCK",
    "TransmitAlphabet",
    "aber_union_bound",
    "analyze_aber",
    "analyze_capacity",
    "apep",
    "assemble_equivalent_channel",
    "bench_detectors",
    "bits_per_use",
    "build_constellation",
    "build_los_channel",
    "build_pairwise_matrices",
    "build_pairwise_table",
    "build_ris_codebook",
    "build_static_setup",
    "cpep",
    "dcmc_capacity",
    "delta_covariance",
    "diversity_slope",
    "exponential_correlation",
    "keyhole_closed_form",
    "linear_detect",
    "load_complex_matrix",
    "map_bits_to_symbols",
    "mgf_lambda",
    "ml_detect",
    "pair_to_bits",
    "pairwise_energy",
    "parse_config",
    "precoding_objective",
    "q_exp_bound",
    "q_function",
    "q_two_term",
    "qr_reduce",
    "rng_stream",
    "run_aber_sweep",
    "run_capacity_sweep",
    "sample_channel_set",
    "sample_kronecker_rayleigh",
    "save_complex_matrix",
    "sd_layered_detect",
    "solve_sdr",
    "steering_vector",
    "synthesize_received",
    "transmit_alphabet",
    "write_sweep",
    "__version__",
]
