"""Compressed sensing over routing paths in multi-hop sensor networks."""

__version__ = "0.1.0"

from .basis import (
    BASIS_KINDS,
    Embedding,
    HierarchicalPartition,
    LiftedWavelets,
    RepresentationBasis,
    assemble_basis,
    baseline_basis,
    dyadic_partition,
    gle_embed,
    haar_forward,
    haar_inverse,
    k_term_approx,
    learn_basis,
    lift_forward,
    lift_inverse,
    similarity,
    train_lifting,
)
from .config import ExperimentConfig, config_from_dict, parse_config
from .evaluation import (
    RecoveryReport,
    approximation_error,
    prepare,
    run_cdg_baseline,
    run_csr_experiment,
    sparsification_study,
    sweep_M,
)
from .graph_core import (
    GraphMatrices,
    SensorField,
    UGraph,
    WsnGraph,
    complement_graph,
    graph_matrices,
    random_geometric_topology,
    synth_field_series,
    union_graph,
)
from .routing_sim import (
    CollectionCycle,
    RoutingState,
    Scheme,
    TransmissionReport,
    build_cycle_routing,
    collect_cycle,
    transmission_stats,
)
from .solvers import Sl0Params, SparseSolution, l1_solve, recover_field, sl0_solve
from .tomography import (
    MeasurementMatrix,
    PathRecoveryModel,
    build_measurement_matrix,
    recover_paths,
    urtg,
)
