"""Packing of preprocessed records into the two branch input views.

The dense branch sees the standardized numeric columns. The recurrent
branch sees one 35-wide vector per residue position::

    [mutant token, wild-type token, position / max_len, numerics..., HLA code, 0...]

Tokens are scaled by ``1 / PAD_CODE`` (so padding is exactly 1.0) and the
HLA code by ``1 / (n_categories - 1)``. Before sequences are materialised
every record lives as one flat row
``[numerics..., hla, mut tokens (max_len), wt tokens (max_len)]``, which is
what SMOTE interpolates for the recurrent branch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MAX_LEN, PAD_CODE, Dataset, token_matrix
from .errors import ConfigError

DEFAULT_WIDTH = 35
PAD_VALUE = 1.0


@dataclass(frozen=True)
class PackingDescriptor:
    width: int = DEFAULT_WIDTH
    max_len: int = MAX_LEN
    n_numeric: int = 8
    hla_scale: float = 1.0

    def __post_init__(self):
        if self.used_width > self.width:
            raise ConfigError(f"timestep layout needs {self.used_width} columns but width is {self.width}")

    @property
    def used_width(self):
        return 3 + self.n_numeric + 1

    @property
    def fields(self):
        names = ["mut_token", "wt_token", "position"]
        names += [f"numeric_{i}" for i in range(self.n_numeric)] + ["hla_code"]
        return names + ["zero"] * (self.width - len(names))

    @property
    def flat_width(self):
        return self.n_numeric + 1 + 2 * self.max_len

    def to_dict(self):
        return {
            "fields": self.fields,
            "hla_scale": self.hla_scale,
            "max_len": self.max_len,
            "n_numeric": self.n_numeric,
            "token_scale": 1.0 / PAD_CODE,
            "width": self.width,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(width=int(d["width"]), max_len=int(d["max_len"]), n_numeric=int(d["n_numeric"]), hla_scale=float(d["hla_scale"]))


def packing_for(params, width=DEFAULT_WIDTH, max_len=MAX_LEN):
    n_hla = params.n_categories["hla"]
    return PackingDescriptor(width, max_len, len(params.numeric_columns), 1.0 / max(1, n_hla - 1))


def ffnn_view(Z: np.ndarray, packing: PackingDescriptor) -> np.ndarray:
    """Standardized numeric block of a preprocessed matrix."""
    return np.ascontiguousarray(Z[:, : packing.n_numeric])


def flat_rows(Z: np.ndarray, d: Dataset, packing: PackingDescriptor) -> np.ndarray:
    """Flat per-record rows for the recurrent branch (see module docstring)."""
    mut = token_matrix([r.peptide_mut for r in d.records], packing.max_len) / PAD_CODE
    wt = token_matrix([r.peptide_wt for r in d.records], packing.max_len) / PAD_CODE
    numeric = Z[:, : packing.n_numeric]
    hla = Z[:, packing.n_numeric : packing.n_numeric + 1] * packing.hla_scale
    return np.hstack([numeric, hla, mut, wt])


def sequences(flat: np.ndarray, packing: PackingDescriptor):
    """Materialise ``(X, lengths)`` with ``X`` shaped ``(n, max_len, width)``.

    A timestep is padding when both its tokens equal the pad value; the
    valid length runs to the last non-padding step.
    """
    flat = np.atleast_2d(flat)
    n, L = flat.shape[0], packing.max_len
    k = packing.n_numeric
    mut = flat[:, k + 1 : k + 1 + L]
    wt = flat[:, k + 1 + L : k + 1 + 2 * L]
    X = np.zeros((n, L, packing.width))
    X[:, :, 0] = mut
    X[:, :, 1] = wt
    X[:, :, 2] = np.arange(L) / L
    X[:, :, 3 : 3 + k + 1] = flat[:, None, : k + 1]
    live = ~((mut == PAD_VALUE) & (wt == PAD_VALUE))
    lengths = np.where(live.any(axis=1), L - np.argmax(live[:, ::-1], axis=1), 0)
    return X, lengths.astype(np.int64)


class PackedSequences:
    """Lazy recurrent-branch dataset: rows are flat, sequences built per batch."""

    def __init__(self, flat, packing: PackingDescriptor):
        self.flat = np.asarray(flat, dtype=np.float64)
        self.packing = packing

    def __len__(self):
        return self.flat.shape[0]

    def __getitem__(self, idx):
        return sequences(self.flat[idx], self.packing)

