"""Trainer for the multi-task beam-parameter classifier."""

from .export import export_weights
from .losses import cross_entropy, dwa_weights, total_loss
from .model import AmpbtNet, SpbtNet, patterns_to_input
from .records import load_dataset, split_indices
from .train import TrainConfig, train_ampbt, train_spbt

__version__ = "0.1.0"

__all__ = ["AmpbtNet", "SpbtNet", "TrainConfig", "cross_entropy", "dwa_weights",
           "export_weights", "load_dataset", "patterns_to_input", "split_indices",
           "total_loss", "train_ampbt", "train_spbt", "__version__"]
