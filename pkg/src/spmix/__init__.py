"""Spatially dependent Gaussian mixtures with a logisticMCAR prior on the weights."""

from .errors import (
    BoundaryError,
    DataError,
    DimensionError,
    DomainError,
    NumericalError,
    ParameterError,
    SamplerError,
    SpmixError,
)
from .gibbs import ChainConfig, run_chain
from .graph import ProximityGraph, connected_components, marginal_scale_matrix, precision_matrix
from .logistic_mcar import CkSsmParams, LogisticMcarParams, sample_ck_ssm_prior, sample_prior
from .model import Chain, Dataset, MixtureState, PriorConfig, mixture_density, posterior_mean_density
from .simplex import aitchison_inner, alr, alr_inv, closure, perturb, power

__version__ = "0.1.0"
