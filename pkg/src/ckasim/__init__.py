"""Conference key agreement on GHZ mixtures.

Builds the biseparable GHZ-mixture family, evaluates its asymptotic
conference key rate by closed form, by entropies of explicit (purified)
states, and by Monte Carlo protocol simulation, and constructs per-partition
entanglement witnesses from the protocol's own measurement statistics.
"""

from .errors import (
    CapacityError,
    CkasimError,
    ConvergenceError,
    EstimationError,
    LpError,
    ValidationError,
)
from .keyrate import (
    ProtocolParams,
    RateReport,
    SeparableKeyReport,
    binary_entropy,
    closed_form_params,
    noise_threshold,
    noiseless_rate_log_form,
    rate_bipartite_concat,
    rate_entropy_numeric,
    rate_nbb84,
    verify_no_key_separable,
)
from .protocol import EstimateReport, ProtocolConfig, RoundRecord, run_protocol, sweep
from .qstate import (
    DensityMatrix,
    PureState,
    QubitRegisterMap,
    Spectrum,
    conditional_entropy,
    default_labels,
    dense_qubit_cap,
    eigensystem,
    measure_computational,
    partial_trace,
    partial_trace_pure,
    permute_subsystems,
    purify,
    tensor,
    von_neumann_entropy,
)
from .states import (
    GhzMixtureSpec,
    OverlapStats,
    Partition,
    SeparableSpec,
    all_partitions,
    apply_local_depolarizing,
    build_ghz_mixture,
    build_purification,
    build_separable_test_state,
    eve_overlap_matrix,
    ghz_product_vector,
    overlap_stats,
    random_separable_spec,
    sample_round,
    sample_rounds,
    subsets_with_alice,
)
from .witness import (
    FindWitnessOptions,
    MeasurementSet,
    ProbabilityTable,
    SeparationCertificate,
    WitnessCoefficients,
    evaluate_witness,
    find_witness,
    grid_product_minimum,
    nbb84_measurements,
    product_statistics,
    statistics_of,
    witness_operator,
)

__version__ = "0.1.0"
