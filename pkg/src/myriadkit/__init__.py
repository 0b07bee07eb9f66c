"""myriadkit: robust multivariate location/scatter estimation and
nonlocal patch-based denoising for heavy-tailed noise."""

from . import errors
from .numkernel import SpdMatrix, CholeskyFactor, cholesky, mahalanobis, logdet, solve_spd
from .distributions import (
    StudentTParams,
    WrappedCauchyParams,
    wrap_angle,
    student_t_logpdf,
    projected_normal_logpdf,
    wrapped_cauchy_pdf,
    sample_student_t,
    sample_wrapped_cauchy,
    pn_to_wc,
    wc_to_pn,
)
from .estimators import (
    SampleSet,
    WeightVector,
    EstimatorOptions,
    EstimateResult,
    FeasibilityReport,
    neg_loglik,
    neg_loglik_pn,
    check_assumptions,
    gmmf_step,
    gmmf_estimate,
    em_estimate,
    tyler_estimate,
    wrapped_cauchy_estimate,
    blue_restore,
)

__version__ = "0.1.0"
