"""Certified pointed unit-sphere metric spaces, their Gaussian field, and
the induced random linear orders.

The package keeps two strictly separated layers: an exact rational layer
(squared distances, Gram matrices, positive-definiteness certificates,
amalgamation) where no rounding ever occurs, and a floating-point layer
(embeddings, sphere geometry, Monte Carlo) whose outputs are snapped back
onto the rational grid and re-certified before they are trusted.
"""

from .builder import (
    AmalgamProblem,
    GenericChain,
    NoAlgebraicityWitnesses,
    amalgamate,
    check_transitivity_witness,
    grow_chain,
    load_chain,
    no_algebraicity_witnesses,
    one_point_extension_witness,
    random_extension,
    save_chain,
)
from .errors import (
    MalformedSpaceError,
    NotMemberError,
    PrecisionError,
    SearchError,
    SnapError,
    SphereFieldError,
    UnrealizableTypeError,
)
from .gaussian import (
    CylinderApproximation,
    CylinderEvent,
    Estimate,
    GaussianModel,
    InvarianceReport,
    MixingReport,
    NonproductWitness,
    build_model,
    cylinder_approximation_demo,
    invariance_check,
    kl_zero_mean,
    mixing_experiment,
    near_orthogonal_copy,
    nonproduct_witness,
    sample,
)
from .metric import (
    EmbeddedSpace,
    GramMatrix,
    PartialIsometry,
    Rejection,
    SpaceDistances,
    certify_membership,
    embed,
    empty_space,
    gram_from_distances,
    is_member,
    load_space,
    save_space,
    space_from_json,
    space_from_sq,
    space_hash,
    space_to_json,
    verify_isometry,
)
from .orders import (
    OrderDistribution,
    SupportReport,
    full_support_check,
    order_distribution,
    ordering_prob_exact,
    uniformity_test,
)
from .typegeom import (
    ConnectWitness,
    SphereChain,
    TypeSphere,
    connect_by_chain,
    connectedness_witness,
    epsilon_threshold,
    realize_type,
    realized_pair_space,
    rotate_about_axis,
    rotation_triple,
    solve_theta_for_distance,
    sphere_angle,
    type_sphere,
)

__version__ = "0.1.0"
