"""Fit-on-train transforms: mean imputation, z-scoring and label encoding."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError


@dataclass(frozen=True)
class TransformParams:
    """Statistics learned from the training split only.

    ``means``/``stds`` are keyed by numeric column, ``categories`` maps each
    categorical column to a sorted ``value -> code`` table.
    """

    numeric_columns: tuple
    means: tuple
    stds: tuple
    categories: dict
    dropped: tuple = ()

    @property
    def n_categories(self):
        return {col: len(table) for col, table in self.categories.items()}

    def to_dict(self):
        return {
            "categories": {k: dict(sorted(v.items())) for k, v in sorted(self.categories.items())},
            "dropped": list(self.dropped),
            "means": list(self.means),
            "numeric_columns": list(self.numeric_columns),
            "stds": list(self.stds),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            numeric_columns=tuple(d["numeric_columns"]),
            means=tuple(float(x) for x in d["means"]),
            stds=tuple(float(x) for x in d["stds"]),
            categories={k: {c: int(i) for c, i in v.items()} for k, v in d["categories"].items()},
            dropped=tuple(d.get("dropped", ())),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _numeric_block(d: Dataset, columns):
    idx = [d.schema.numeric_columns.index(c) for c in columns]
    return np.array(
        [[np.nan if r.numeric[i] is None else r.numeric[i] for i in idx] for r in d.records],
        dtype=np.float64,
    ).reshape(len(d), len(idx))


def fit(train: Dataset) -> TransformParams:
    """Learn imputation means, population standard deviations and category codes."""
    columns = train.schema.kept_numeric
    X = _numeric_block(train, columns)
    means, stds = [], []
    for j, name in enumerate(columns):
        present = X[~np.isnan(X[:, j]), j]
        if present.size == 0:
            raise DataError(f"numeric column {name!r} has no present values in the training split")
        mu = float(np.mean(present))
        means.append(mu)
        sd = float(np.sqrt(np.mean((present - mu) ** 2)))
        # rounding residue of a constant column
        if sd <= 1e-12 * max(1.0, abs(mu)):
            sd = 0.0
        stds.append(sd)
    hla = sorted({r.hla for r in train.records})
    return TransformParams(
        numeric_columns=columns,
        means=tuple(means),
        stds=tuple(stds),
        categories={"hla": {v: i for i, v in enumerate(hla)}},
        dropped=train.schema.dropped,
    )


def apply(params: TransformParams, d: Dataset) -> np.ndarray:
    """Transform ``d`` into a float matrix: standardized numerics, then the HLA code.

    Missing cells take the fitted mean (and so standardize to 0); constant
    columns map to 0. Unseen categories raise instead of receiving new codes.
    """
    missing_cols = [c for c in params.numeric_columns if c not in d.schema.numeric_columns]
    if missing_cols:
        raise DataError(f"dataset lacks fitted columns {missing_cols}")
    X = _numeric_block(d, params.numeric_columns)
    mu = np.asarray(params.means)
    sd = np.asarray(params.stds)
    X = np.where(np.isnan(X), mu, X)
    safe = np.where(sd > 0, sd, 1.0)
    Z = np.where(sd > 0, (X - mu) / safe, 0.0)

    table = params.categories["hla"]
    codes = np.empty((len(d), 1), dtype=np.float64)
    for i, r in enumerate(d.records):
        try:
            codes[i, 0] = table[r.hla]
        except KeyError:
            raise DataError(f"unseen category {r.hla!r} in column 'hla'") from None
    return np.hstack([Z, codes])
