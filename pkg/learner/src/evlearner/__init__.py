"""evlearner: learned contour-event classifier for the evscan pipeline."""

from .volumes import build_event_volume, event_bin_indices
from .model import ContourNet
from .train import TrainConfig, train, load_weights, save_weights
from .infer import infer, infer_events

__version__ = "0.1.0"
