"""From-scratch CNN stack: layers, losses, Adam, training, weight files."""
from .layers import Conv2D, ConvTranspose2D, Dense, Flatten, Layer, ReLU, Reshape, Softmax
from .losses import kl_loss, mae_loss
from .nets import (Network, backward, build_coeff_net, build_map_net, load_weights,
                   loss_and_grads, save_weights)
from .optim import Adam
from .train import TrainConfig, TrainingError, TrainResult, train, write_history_csv

__all__ = [
    "Adam", "Conv2D", "ConvTranspose2D", "Dense", "Flatten", "Layer", "Network", "ReLU",
    "Reshape", "Softmax", "TrainConfig", "TrainResult", "TrainingError", "backward",
    "build_coeff_net", "build_map_net", "kl_loss", "load_weights", "loss_and_grads",
    "mae_loss", "save_weights", "train", "write_history_csv",
]
