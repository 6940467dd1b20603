"""Privatizers against linear and small convolutional-network adversaries."""

__version__ = "0.1.0"

from .datasets import (
    ImageDataset,
    LabeledDataset,
    MinMaxNormalizer,
    NormalizationSpec,
    gen_images,
    gen_toy,
    load_csv,
    normalize,
    split,
)
from .evaluation import LossReport, RatioCurve, loss_report, ratio_experiment
from .linalg import NumericError, frob_sq, pinv, residual
from .linear import (
    Budget,
    ExhaustiveFeatureRemover,
    GreedyFeatureRemover,
    GreedyTrace,
    RemovalSet,
    adversary_loss,
    apply_removal,
    brute_force,
    compression_objective,
    greedy_approx,
    reduced_target,
    removal_budget,
    removal_cost,
)
from .maximin import (
    AlternationConfig,
    MaximinPrivatizer,
    NoiseBudget,
    PrivatizerModel,
    TrainHistory,
    evaluate_privatization,
    privatize,
    solve_maximin,
)
from .nn import ConvClassifier
