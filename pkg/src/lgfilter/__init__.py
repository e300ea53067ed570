"""Laplace-Gaussian filtering for nonlinear/non-Gaussian state-space models.

Deterministic recursive state estimation: each step maximizes the per-step
log posterior, approximates the posterior mean and variance by first- or
second-order Laplace expansion, and carries the result forward as a Gaussian.
Includes a fixed-interval smoother, a bootstrap particle filter baseline, a
log-linear Poisson neural-decoding model family, and a benchmark harness.
"""

__version__ = "0.1.0"

from .errors import ConvergenceError, NotPositiveDefiniteError, WeightCollapseError
from .model import (
    FlatObservation,
    GaussianBelief,
    GaussianObservation,
    LinearGaussianTransition,
    LogPosterior,
    ObservationModel,
    StateSpaceModel,
    Trajectory,
    log_posterior_l,
    predict,
    simulate,
)
from .laplace import (
    LaplaceOrder,
    NewtonConfig,
    RichardsonConfig,
    bell_coefficients,
    choose_offset_c,
    compute_gamma,
    laplace_first,
    laplace_second_mean,
    newton_maximize,
    numeric_hessian,
    richardson_d2,
)
from .lgf import FilterOutput, LgfConfig, SmoothOutput, lgf_filter, lgf_smooth, lgf_step
from .pf import ParticleEnsemble, gold_standard, pf_filter, systematic_resample
from .neural import (
    PoissonObservation,
    PoissonPopulation,
    PvaParams,
    build_pv_transition,
    fit_poisson_glm,
    fit_sigma2,
    poisson_log_density,
    pva_decode,
    pva_params_from_population,
    sample_population,
)
from .harness import (
    ExperimentConfig,
    MiseReport,
    PfScalingResult,
    StabilityResult,
    TimingReport,
    mise,
    run_pf_scaling,
    run_stability,
    run_table1,
    run_table2,
)
