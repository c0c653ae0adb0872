import numpy as np

PROB_CLIP = 1e-12


def sigmoid(x):
    """Logistic function, written via tanh so large ``|x|`` cannot overflow."""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def relu(x):
    return np.maximum(x, 0.0)


def bce_loss(p, y):
    """Mean binary cross-entropy with probabilities clipped to ``[1e-12, 1 - 1e-12]``."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLIP, 1.0 - PROB_CLIP)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def classify(p, threshold=0.5):
    """1 where ``p >= threshold``; the threshold itself counts as positive."""
    out = np.asarray(p) >= threshold
    return int(out) if out.ndim == 0 else out.astype(np.int64)
