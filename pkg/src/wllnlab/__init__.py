"""Numerical laboratory for weak laws of large numbers under dependence.

Pipeline: model -> tail functionals -> correctors -> near-orthogonal
subsequence extraction -> Monte Carlo convergence verification.
"""

from .correctors import (
    CorrectorSeries,
    corrector_cesaro_estimate,
    corrector_iid,
    corrector_independent,
    corrector_weak_l2,
    zero_corrector,
)
from .distributions import (
    Distribution,
    FiniteDiscrete,
    HeavyLogLaw,
    Pareto1,
    UnsupportedOracleError,
    convolve,
    example41_constant_c,
    heavy_series_partial,
)
from .extract import (
    ExtractionFailure,
    ExtractionPlan,
    TruncationLevel,
    centered_inner_product,
    check_plan_subsequence,
    cross_product_budget,
    exact_centered_inner_product,
    greedy_extract,
    sum_of_squares_check,
    truncate,
    truncate_array,
    verify_plan,
)
from .models import (
    CapacityError,
    Example41Model,
    IIDModel,
    IndependentArrayModel,
    LatentShiftModel,
    SamplePath,
    SequenceModel,
    TailVanishingModel,
    conditional_truncated_mean,
    dist_from_spec,
    dist_to_spec,
    marginal_tail_prob,
    model_from_spec,
    sample_path,
    truncated_moment,
)
from .streams import path_rng
from .tails import (
    TailProfile,
    Verdict,
    build_tail_profile,
    check_energy_vanishing,
    check_feller_necessary,
    check_liminf_condition,
    check_limsup_condition,
    check_weak_l1,
    feller_identity_residual,
    sigma_n,
    tau_n,
    tau_sup_integral,
)
from .verify import (
    ConvergenceReport,
    GapReport,
    HereditaryReport,
    hereditary_suite,
    l2_probe,
    thin_indices,
    truncation_gap_probe,
    wilson_interval,
    wlln_probe,
)

__version__ = "0.1.0"
