"""Pairwise-supervised hashing: learn binary codes from similar/dissimilar pairs."""
from .core import (
    CodeMatrix,
    Dataset,
    ModelParameters,
    PairwiseLabelSet,
    RelaxedCodes,
    pairs_from_labels,
    validate_dataset,
)
from .encoder import encode
from .extractor import ExtractorParams, ExtractorSpec, extractor_backward, extractor_forward
from .gradients import grad_phi, grad_u, grad_v, grad_W
from .objective import LossBreakdown, nll_loss, pair_likelihood, regularized_loss, sigmoid, theta_ij
from .retrieval import EvalReport, RankedResult, average_precision, evaluate, hamming_distance, rank
from .trainer import TrainConfig, TrainState, binarize, compute_u, init_params, train, train_step

__version__ = "0.1.0"
