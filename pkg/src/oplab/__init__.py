"""oplab: a desk-scale numerical laboratory for similarity-to-contraction
phenomena of finite-dimensional operators."""

from .diskfn import (
    BlaschkeProduct,
    RationalFunction,
    blaschke_eval,
    blaschke_log_modulus,
    pseudohyperbolic,
    divided_difference,
    h2_inner,
    h2_norm,
)
from .interpolation import (
    CarlesonReport,
    PickData,
    carleson_delta,
    generalized_carleson_ratio,
    default_disk_grid,
    pick_feasible,
    np_interpolate,
)
from .operators import (
    BlockOperator,
    BoundReport,
    as_operator,
    assemble_blocks,
    blaschke_of_operator,
    bound_report,
    load_matrix,
    load_matrix_json,
    permute_R0,
    poly_bound_lower,
    poly_of_operator,
    power_bound,
    r0_blocks,
    rational_of_operator,
    save_matrix,
    save_matrix_json,
    schaffer_dilation_trunc,
    spectral_norm,
    spectral_radius,
    tadmor_ritt,
)
from .similarity import (
    C0Split,
    DirectSumCertificate,
    SimilarityWitness,
    c0_split,
    direct_sum_similarity,
    eigenbasis_similarity,
    lyapunov_similarity,
    stein_via_diagonalization,
    sylvester_intertwiner,
)
from .modelspace import (
    EigenvectorReport,
    IntertwinerReport,
    ModelBasis,
    ModelPairInstance,
    ShiftWitnessReport,
    build_intertwiner,
    build_model_basis,
    coupling_block,
    coupling_block_oracle,
    eigenvector_residuals,
    geometric_zeros,
    make_pair_instance,
    random_coupling,
    shift_witness_report,
)
from .counterexample import (
    CoeffSequence,
    CounterexampleInstance,
    ScanReport,
    ScanRow,
    build_instance,
    counterexample_scan,
    hankel_toeplitz_norms,
    lambda_family,
    make_sequence,
    projection_norms,
    unconditional_constant,
)
from . import errors

__version__ = "0.1.0"
