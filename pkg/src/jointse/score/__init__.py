from .analytic import AnalyticGaussianScore, analytic_score, log_density, marginal_moments
from .checkpoint import Checkpoint, from_network, load_checkpoint, passthrough_checkpoint, save_checkpoint
from .dsm import DsmDraws, draw_dsm, dsm_loss
from .network import AffineScoreNet, NetworkScore, ToyScoreNet, build_network, n_parameters
from .training import (
    GaussianToyData,
    SpectrogramPairs,
    TrainConfig,
    TrainResult,
    average_parameters,
    loss_and_grad,
    smoothed,
    train,
)

__all__ = [
    "AffineScoreNet",
    "AnalyticGaussianScore",
    "Checkpoint",
    "DsmDraws",
    "GaussianToyData",
    "NetworkScore",
    "SpectrogramPairs",
    "ToyScoreNet",
    "TrainConfig",
    "TrainResult",
    "analytic_score",
    "average_parameters",
    "build_network",
    "draw_dsm",
    "dsm_loss",
    "from_network",
    "load_checkpoint",
    "log_density",
    "loss_and_grad",
    "marginal_moments",
    "n_parameters",
    "passthrough_checkpoint",
    "save_checkpoint",
    "smoothed",
    "train",
]
