"""Real-time magnetic-field tracking by coherent population trapping.

Simulates photon emission from a Lambda-type emitter whose Raman detuning
is driven by an Ornstein-Uhlenbeck bath, estimates the bath from detected
counts, and compares the estimators with Cramer-Rao lower bounds.
"""
__version__ = "0.1.0"

from .bath import BathParams, BathPath, autocorrelation_estimate, ou_path, ou_step, ou_transition_pdf
from .cpt import (MHZ, CptParams, detection_rate, liouvillian_steady_state, rho_ee_analytic,
                  rho_ee_derivative)
from .crlb import (CrlbReport, FisherMatrices, crlb_causal, crlb_discrete, crlb_full,
                   crlb_report, fisher_matrices, g_of_sigma)
from .estimators import (AverageCountEstimator, EstimateSeries, EstimatorConfig,
                         OUBayesEstimator, PosteriorGrid, SimpleBayesEstimator, bayes_update,
                         estimation_variance, init_prior, ou_propagate, posterior_mean,
                         run_average_count, run_ou_bayes, run_simple_bayes)
from .photons import (CountSeries, EmissionEvent, bin_events, sse_trajectory,
                      steady_emission_counts, thin_detect)

__all__ = [
    "MHZ", "AverageCountEstimator", "BathParams", "BathPath", "CountSeries", "CptParams",
    "CrlbReport", "EmissionEvent", "EstimateSeries", "EstimatorConfig", "FisherMatrices",
    "OUBayesEstimator", "PosteriorGrid", "SimpleBayesEstimator", "autocorrelation_estimate",
    "bayes_update", "bin_events", "crlb_causal", "crlb_discrete", "crlb_full", "crlb_report",
    "detection_rate", "estimation_variance", "fisher_matrices", "g_of_sigma", "init_prior",
    "liouvillian_steady_state", "ou_path", "ou_propagate", "ou_step", "ou_transition_pdf",
    "posterior_mean", "rho_ee_analytic", "rho_ee_derivative", "run_average_count",
    "run_ou_bayes", "run_simple_bayes", "sse_trajectory", "steady_emission_counts",
    "thin_detect",
]
