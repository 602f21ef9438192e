from .checkpoint import load_checkpoint, save_checkpoint
from .layers import BatchNorm, Linear, Model, ReLU, Softmax, Tanh, mlp_spec, parse_layers
from .losses import PROB_FLOOR, cross_entropy, kl_divergence, kl_loss, kl_rows, kl_rows_tensor
from .optim import SGD, Adam, LrSchedule, cosine_lr
from .tensor import Tensor, backward, grad, no_grad

__all__ = [
    "Adam",
    "BatchNorm",
    "Linear",
    "LrSchedule",
    "Model",
    "PROB_FLOOR",
    "ReLU",
    "SGD",
    "Softmax",
    "Tanh",
    "Tensor",
    "backward",
    "cosine_lr",
    "cross_entropy",
    "grad",
    "kl_divergence",
    "kl_loss",
    "kl_rows",
    "kl_rows_tensor",
    "load_checkpoint",
    "mlp_spec",
    "no_grad",
    "parse_layers",
    "save_checkpoint",
]
