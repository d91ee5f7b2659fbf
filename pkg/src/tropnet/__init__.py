"""tropnet: stochastic max-plus ReLU networks, tail bounds, depth selection.

The package simulates stochastic feedforward ReLU networks through their
tropical (max-plus) pair representation, verifies the associated
concentration inequalities by Monte Carlo, classifies with the expected
decision rule and its error bounds, and selects the network depth by
backward-induction optimal stopping.
"""

from .tropical import (
    BOTTOM,
    ZERO,
    BottomValueError,
    MonomialCapError,
    RegionCount,
    RegionCountError,
    TropicalError,
    TropicalMonomial,
    TropicalPolynomial,
    TropicalRational,
    TropicalValue,
    UndefinedPowerError,
    constant_polynomial,
    count_linear_regions,
    eval_polynomial,
    poly_add,
    poly_mul,
    poly_weighted_combine,
    polynomial_from_dict,
    polynomial_from_json,
    polynomial_to_dict,
    polynomial_to_json,
    prune_redundant_monomials,
    trop_add,
    trop_div,
    trop_mul,
    trop_pow,
)
from .networks import (
    DistributionSpec,
    LayerSample,
    NetworkRun,
    NetworkSample,
    NetworkSpec,
    SpecError,
    SymbolicRun,
    degenerate,
    forward_fg,
    forward_relu_direct,
    identity_init,
    network_spec_from_dict,
    network_spec_to_dict,
    propagate_intervals,
    reference_classifier_spec,
    reference_spec,
    run_network,
    run_symbolic,
    sample_init,
    sample_layer,
    sample_network,
    simulate_layer_outputs,
    uniform_int,
    uniform_real,
)
from .bounds import (
    BoundReport,
    ConvexOrderReport,
    MartingaleGradeReport,
    MartingaleSpec,
    XiCertificate,
    convex_order_check,
    estimate_tail,
    hoeffding_bound,
    martingale_grade_check,
    mgale_bound,
    nsg_bound,
    region_count_bound,
    region_count_concentration,
    reports_to_csv,
    reports_to_json,
    simulate_random_walk,
    verify_layer_concentration,
    walk_tail_reports,
    xi_certificate,
)
from .classifier import (
    AuditRow,
    DecisionBoundaryError,
    ExpectedDecision,
    ScoreSpec,
    disagreement_audit,
    expected_classify,
    expected_score,
    score,
)
from .stopping import (
    FiniteSupportProcess,
    GammaSpec,
    GammaTrajectory,
    OracleSolution,
    PerfectFitError,
    ShapeReport,
    StateExplosionError,
    StoppingSolution,
    backward_induction_exact,
    backward_induction_lsmc,
    check_local_monotonicity,
    exhaustive_stopping_oracle,
    gamma_value,
    loss_mse,
    random_finite_support_process,
    select_layers,
    simulate_gamma_trajectories,
    stopped_envelope_means,
    stopping_time,
    stopping_time_batched,
)
from .seeding import stream

__version__ = "0.1.0"
