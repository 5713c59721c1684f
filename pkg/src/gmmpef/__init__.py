"""
gmmpef: Gaussian mixtures approximated by polynomial exponential densities.

A univariate Gaussian mixture is converted into a polynomial exponential
density ``exp(sum_i theta_i x^i - F(theta))`` either by matching moments or
by integral score matching. Pairs of such conversions give a fast
deterministic approximation of the Jeffreys divergence between mixtures,
and the order-2 Hyvarinen divergence, available in closed form, selects the
polynomial order.
"""

from .divergences import (
    DivergenceEstimate,
    Method,
    hyvarinen2_gaussians,
    hyvarinen2_gmm_ped,
    hyvarinen_alpha_numeric,
    jeffreys_ef_closed,
    jeffreys_heuristic,
    jeffreys_mc,
    jeffreys_mle_variant,
    jeffreys_sme_variant,
    kl_mc,
    mle_natural,
    select_order,
)
from .errors import (
    ConvergenceError,
    DivergentPartitionError,
    EnvelopeError,
    GmmPefError,
    NonIntegrableFitError,
    NotPositiveDefiniteError,
    NumericalError,
    OrderCapError,
    QuadratureError,
    ValidationError,
)
from .estimators import convert_pair, mle_convert, sme_convert_direct, sme_convert_hankel
from .gmm import GaussianComponent, Gmm, kde_from_data, pdf, random_gmm, raw_moment, raw_moments, sample
from .maxent import IlsmConfig, eta_to_theta, theta_to_eta_quadrature
from .ped import Interval, MomentParam, PedNatural, PedPair, RealLine, log_partition, moments_numeric
from .sampling import rejection_sample, sample_ped, theta_to_eta_mc

__version__ = "0.1.0"
