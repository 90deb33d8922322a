"""Bayesian group nonnegative matrix factorization for multi-subject EEG features.

Each subject's nonnegative feature matrix is explained by class-specific
common bases shared across subjects plus subject-specific individual bases,
with Gamma priors and a mean-field variational posterior whose factors are
generalized inverse Gaussian.
"""

__version__ = "0.1.0"

from .classify import EvalReport, Prediction, evaluate, learning_curve, predict
from .data import FeatureLayout, IngestSchema, export_bases, load_group, load_subject
from .errors import (ConfigError, DataError, DomainError, EmptyClassWarning, GroupFactError,
                     MomentUndefinedError, NumericalError)
from .inference import (AuxState, FitOptions, GigBlock, Posterior, TracePoint, elbo, fit, init_posterior,
                        read_posterior, refresh_aux, sweep, update_aux, update_q_AC, update_q_AI, update_q_SI,
                        update_w, write_posterior)
from .model import (GroupedDataset, Hyperparams, LatentState, reconstruct, sample_dataset, sample_separated)
from .special import GigMoments, GigParams, gig_entropy, gig_log_normalizer, gig_moments, log_bessel_k

__all__ = [
    "AuxState", "ConfigError", "DataError", "DomainError", "EmptyClassWarning", "EvalReport", "FeatureLayout",
    "FitOptions", "GigBlock", "GigMoments", "GigParams", "GroupFactError", "GroupedDataset", "Hyperparams",
    "IngestSchema", "LatentState", "MomentUndefinedError", "NumericalError", "Posterior", "Prediction",
    "TracePoint", "elbo", "evaluate", "export_bases", "fit", "gig_entropy", "gig_log_normalizer", "gig_moments",
    "init_posterior", "learning_curve", "load_group", "load_subject", "log_bessel_k", "predict",
    "read_posterior", "reconstruct", "refresh_aux", "sample_dataset", "sample_separated", "sweep",
    "update_aux", "update_q_AC", "update_q_AI", "update_q_SI", "update_w", "write_posterior",
]
