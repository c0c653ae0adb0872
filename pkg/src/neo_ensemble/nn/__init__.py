from .ffnn import FfnnModel, ffnn_forward, init_ffnn
from .functional import bce_loss, classify, relu, sigmoid
from .lstm import LstmLayer, LstmState, RnnModel, init_rnn, lstm_step, rnn_forward
from .optim import AdamState, TrainConfig, optimizer_step
from .training import History, predict_logits, predict_proba, train


def init_model(arch, seed=0, kind="ffnn"):
    """Initialise a dense (``kind="ffnn"``) or recurrent (``kind="rnn"``) branch."""
    if kind == "ffnn":
        return init_ffnn(arch, seed)
    if kind == "rnn":
        return init_rnn(arch, seed)
    raise ValueError(f"unknown model kind {kind!r}")


def backward(model, data, y):
    """Gradients of the mean BCE of ``model`` on one batch."""
    return model.loss_and_grads(data, y)[1]


__all__ = [
    "AdamState",
    "FfnnModel",
    "History",
    "LstmLayer",
    "LstmState",
    "RnnModel",
    "TrainConfig",
    "backward",
    "bce_loss",
    "classify",
    "ffnn_forward",
    "init_ffnn",
    "init_model",
    "init_rnn",
    "lstm_step",
    "optimizer_step",
    "predict_logits",
    "predict_proba",
    "relu",
    "rnn_forward",
    "sigmoid",
    "train",
]
