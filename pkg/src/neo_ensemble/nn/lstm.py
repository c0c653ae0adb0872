"""Stacked-LSTM recurrent branch with masked variable-length sequences.

Gate blocks are stacked row-wise in the order forget, input, output,
candidate: ``W`` is ``(4H, I)``, ``U`` is ``(4H, H)`` and ``b`` is ``(4H,)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .ffnn import check_arch, glorot_uniform
from .functional import bce_loss, sigmoid

GATES = ("f", "i", "o", "c")


@dataclass
class LstmState:
    h: np.ndarray
    c: np.ndarray


class LstmLayer:
    def __init__(self, W, U, b):
        self.W = np.asarray(W, dtype=np.float64)
        self.U = np.asarray(U, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        H = self.U.shape[1]
        if self.W.shape[0] != 4 * H or self.U.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ConfigError("LSTM gate blocks disagree on hidden size")

    @property
    def hidden(self):
        return self.U.shape[1]

    @property
    def n_inputs(self):
        return self.W.shape[1]

    def gate(self, name):
        """``(W_g, U_g, b_g)`` views for gate ``name`` in ``f, i, o, c``."""
        k = GATES.index(name)
        H = self.hidden
        sl = slice(k * H, (k + 1) * H)
        return self.W[sl], self.U[sl], self.b[sl]

    def copy(self):
        return LstmLayer(self.W.copy(), self.U.copy(), self.b.copy())


def _gates(a, H):
    f = sigmoid(a[:, :H])
    i = sigmoid(a[:, H : 2 * H])
    o = sigmoid(a[:, 2 * H : 3 * H])
    g = np.tanh(a[:, 3 * H :])
    return f, i, o, g


def lstm_step(layer: LstmLayer, x_t, s: LstmState) -> LstmState:
    """One LSTM update for a single input vector (or a batch of row vectors)."""
    x_t = np.asarray(x_t, dtype=np.float64)
    single = x_t.ndim == 1
    X = np.atleast_2d(x_t)
    h = np.atleast_2d(s.h)
    c = np.atleast_2d(s.c)
    if X.shape[1] != layer.n_inputs or h.shape[1] != layer.hidden or c.shape[1] != layer.hidden:
        raise ValueError("lstm_step dimension mismatch")
    a = X @ layer.W.T + h @ layer.U.T + layer.b
    f, i, o, g = _gates(a, layer.hidden)
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    if single:
        return LstmState(h_new[0], c_new[0])
    return LstmState(h_new, c_new)


class RnnModel:
    """Stacked LSTM layers followed by a dense readout of the last valid hidden state."""

    kind = "rnn"

    def __init__(self, layers, readout_W, readout_b):
        self.layers = list(layers)
        self.readout_W = np.asarray(readout_W, dtype=np.float64)
        self.readout_b = np.asarray(readout_b, dtype=np.float64)
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.n_inputs != lower.hidden:
                raise ConfigError("stacked LSTM layer dimensions disagree")
        if self.readout_W.shape != (1, self.layers[-1].hidden) or self.readout_b.shape != (1,):
            raise ConfigError("readout shape disagrees with the last LSTM layer")

    @property
    def sizes(self):
        return [self.layers[0].n_inputs] + [l.hidden for l in self.layers] + [1]

    @property
    def n_inputs(self):
        return self.layers[0].n_inputs

    @property
    def params(self):
        out = []
        for l in self.layers:
            out += [l.W, l.U, l.b]
        return out + [self.readout_W, self.readout_b]

    @property
    def param_names(self):
        names = [f"{p}{k}" for k in range(len(self.layers)) for p in ("W", "U", "b")]
        return names + ["readout_W", "readout_b"]

    def copy(self):
        return RnnModel([l.copy() for l in self.layers], self.readout_W.copy(), self.readout_b.copy())

    def _check(self, X, lengths):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[2] != self.n_inputs:
            raise ValueError(f"expected (batch, time, {self.n_inputs}) input, got shape {X.shape}")
        if lengths is None:
            lengths = np.full(X.shape[0], X.shape[1], dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if lengths.shape != (X.shape[0],):
            raise ValueError("one length per sequence is required")
        if X.shape[1] == 0 or np.any(lengths < 1):
            raise ValueError("empty sequences are not allowed")
        if np.any(lengths > X.shape[1]):
            raise ValueError("sequence length exceeds the time dimension")
        T = int(lengths.max())
        return X[:, :T], lengths

    def _forward(self, X, lengths):
        # time-major internally so each step touches contiguous memory
        N, T, _ = X.shape
        live = np.arange(T)[:, None] < lengths[None, :]
        full = live.all(axis=1)
        mask = live[:, :, None]
        caches = []
        seq = np.ascontiguousarray(X.transpose(1, 0, 2))
        for layer in self.layers:
            H = layer.hidden
            UT = np.ascontiguousarray(layer.U.T)
            h = np.zeros((N, H))
            c = np.zeros((N, H))
            out = np.empty((T, N, H))
            xW = (seq.reshape(T * N, -1) @ layer.W.T).reshape(T, N, 4 * H)
            xW += layer.b
            steps = []
            for t in range(T):
                a = xW[t]
                a += h @ UT
                s = a[:, : 3 * H]
                np.multiply(s, 0.5, out=s)
                np.tanh(a, out=a)
                s += 1.0
                s *= 0.5
                f, i, o, g = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
                c_new = f * c
                c_new += i * g
                tc = np.tanh(c_new)
                h_new = o * tc
                steps.append((h, c, a, tc))
                if full[t]:
                    c, h = c_new, h_new
                else:
                    c = np.where(mask[t], c_new, c)
                    h = np.where(mask[t], h_new, h)
                out[t] = h
            caches.append((seq, steps))
            seq = out
        # masked steps carry state forward, so the last step holds the last valid state
        h_last = seq[-1]
        z = h_last @ self.readout_W.T + self.readout_b
        return z[:, 0], h_last, (caches, live)

    def _infer(self, X, lengths):
        # rows sorted by length, so step t only updates the live prefix
        order = np.argsort(-lengths, kind="stable")
        L = lengths[order]
        N, T, _ = X.shape
        n_live = (L[None, :] > np.arange(T)[:, None]).sum(axis=1)
        seq = np.ascontiguousarray(X[order].transpose(1, 0, 2))
        for layer in self.layers:
            H = layer.hidden
            UT = np.ascontiguousarray(layer.U.T)
            h = np.zeros((N, H))
            c = np.zeros((N, H))
            out = np.empty((T, N, H))
            xW = (seq.reshape(T * N, -1) @ layer.W.T).reshape(T, N, 4 * H)
            xW += layer.b
            for t in range(T):
                n = n_live[t]
                a = xW[t, :n]
                a += h[:n] @ UT
                s = a[:, : 3 * H]
                np.multiply(s, 0.5, out=s)
                np.tanh(a, out=a)
                s += 1.0
                s *= 0.5
                cn = c[:n]
                cn *= a[:, :H]
                cn += a[:, H : 2 * H] * a[:, 3 * H :]
                np.multiply(a[:, 2 * H : 3 * H], np.tanh(cn), out=h[:n])
                out[t] = h
            seq = out
        z = np.empty(N)
        z[order] = (seq[-1] @ self.readout_W.T + self.readout_b)[:, 0]
        return z

    def logits(self, X, lengths=None):
        X, lengths = self._check(X, lengths)
        return self._infer(X, lengths)

    def forward(self, X, lengths=None):
        return sigmoid(self.logits(X, lengths))

    def loss_and_grads(self, data, y):
        """Mean BCE and gradients via full backpropagation through time.

        ``data`` is ``(X, lengths)`` with ``X`` shaped ``(batch, time, features)``.
        """
        X, lengths = data
        X, lengths = self._check(X, lengths)
        y = np.asarray(y, dtype=np.float64)
        z, h_last, (caches, live) = self._forward(X, lengths)
        p = sigmoid(z)
        loss = bce_loss(p, y)
        N, T, _ = X.shape
        m_all = live[:, :, None].astype(np.float64)
        dz = ((p - y) / N)[:, None]
        g_readout_W = dz.T @ h_last
        g_readout_b = dz.sum(axis=0)

        dseq = np.zeros((T, N, self.layers[-1].hidden))
        dseq[-1] = dz @ self.readout_W
        layer_grads = []
        for layer, (inp, steps) in zip(reversed(self.layers), reversed(caches)):
            H = layer.hidden
            dU = np.zeros_like(layer.U)
            da_all = np.empty((T, N, 4 * H))
            dh_next = np.zeros((N, H))
            dc_next = np.zeros((N, H))
            for t in range(T - 1, -1, -1):
                h_prev, c_prev, a, tc = steps[t]
                f, i, o, g = a[:, :H], a[:, H : 2 * H], a[:, 2 * H : 3 * H], a[:, 3 * H :]
                m = m_all[t]
                dh = dseq[t] + dh_next
                dh_new = m * dh
                dc_new = m * dc_next + dh_new * o * (1.0 - tc**2)
                da = da_all[t]
                da[:, :H] = dc_new * c_prev * f * (1.0 - f)
                da[:, H : 2 * H] = dc_new * g * i * (1.0 - i)
                da[:, 2 * H : 3 * H] = dh_new * tc * o * (1.0 - o)
                da[:, 3 * H :] = dc_new * i * (1.0 - g**2)
                dU += da.T @ h_prev
                dh_next = da @ layer.U + (1.0 - m) * dh
                dc_next = dc_new * f + (1.0 - m) * dc_next
            flat_da = da_all.reshape(T * N, 4 * H)
            dW = flat_da.T @ inp.reshape(T * N, -1)
            db = flat_da.sum(axis=0)
            dseq = (flat_da @ layer.W).reshape(T, N, -1)
            layer_grads.append([dW, dU, db])
        grads = []
        for g3 in reversed(layer_grads):
            grads += g3
        return loss, grads + [g_readout_W, g_readout_b]


def init_rnn(arch, seed=0):
    """Build from ``[inputs, hidden_1, ..., hidden_k, 1]`` with Glorot-uniform gate blocks."""
    arch = check_arch(arch, min_len=3)
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, H in zip(arch[:-2], arch[1:-1]):
        W = np.vstack([glorot_uniform(rng, H, n_in) for _ in GATES])
        U = np.vstack([glorot_uniform(rng, H, H) for _ in GATES])
        layers.append(LstmLayer(W, U, np.zeros(4 * H)))
    readout = glorot_uniform(rng, 1, arch[-2])
    return RnnModel(layers, readout, np.zeros(1))


def rnn_forward(m: RnnModel, seq, valid_len=None):
    """Probability for one ``(time, features)`` sequence, ignoring steps at or past ``valid_len``."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise ValueError("rnn_forward needs a non-empty (time, features) sequence")
    lengths = None if valid_len is None else [valid_len]
    return float(m.forward(seq[None], lengths)[0])
