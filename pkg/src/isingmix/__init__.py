"""Bayesian Ising and Ising-mixture models for sparse binary contingency tables."""

from .datasets import builtin_dataset, design_truth, simulate_design
from .gof import count_parameters, gof_test, lrt_test
from .identifiability import (
    ActivationGraph,
    ParameterMask,
    activation_sets,
    check_assumptions,
    family_example2,
    family_example4,
    fisher_information,
    local_identifiability_test,
    verify_equal_distribution,
)
from .model import (
    BinaryTable,
    DimensionError,
    DomainError,
    IsingParams,
    MixtureParams,
    build_design_matrix,
    cell_probabilities,
    log_likelihood_ising,
    log_likelihood_mixture,
    mixture_cell_probabilities,
    regularized_log_likelihood_ising,
    regularized_log_likelihood_mixture,
)
from .optimize import LocalOptimum, fit_local_mixture, fit_map_ising, fit_mle, multi_start_mixture
from .prior import SETTING_1, SETTING_2, PriorConfig, log_h1, log_h3, log_h4, r_score
from .report import AnalysisReport, export_graph, significant_edges
from .sampler import (
    PosteriorSummary,
    posterior_gamma_ising,
    posterior_mixture,
    quadrature_oracle,
    replicate_se,
)
from .tableio import parse_table, serialize_table

__version__ = "0.1.0"
