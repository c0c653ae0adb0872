"""Records, CSV ingestion, peptide tokenization, splitting and synthetic data.

The on-disk format is a UTF-8 CSV with the header::

    id,peptide_mut,peptide_wt,hla,f1,f2,f3,f4,f5,f6,f7,f8,label

Empty numeric cells are missing values, labels are written as ``0.0``/``1.0``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError, ParseError

ALPHABET = "ACDEFGHIKLMNPQRSTVWY"
PAD_CODE = len(ALPHABET)
MAX_LEN = 25
MIN_PEPTIDE_LEN = 8

_CODE = {aa: i for i, aa in enumerate(ALPHABET)}

NUMERIC_COLUMNS = tuple(f"f{i}" for i in range(1, 9))

DEFAULT_ALLELES = (
    "A*01:01",
    "A*02:01",
    "A*03:01",
    "A*11:01",
    "A*24:02",
    "B*07:02",
    "B*08:01",
    "C*07:01",
)


@dataclass(frozen=True)
class Schema:
    """Column layout of an input CSV.

    ``numeric_columns`` lists the opaque external-score columns in file
    order; ``dropped`` names numeric columns that are parsed but excluded
    from model inputs.
    """

    numeric_columns: tuple = NUMERIC_COLUMNS
    dropped: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "numeric_columns", tuple(self.numeric_columns))
        object.__setattr__(self, "dropped", tuple(self.dropped))
        unknown = [c for c in self.dropped if c not in self.numeric_columns]
        if unknown:
            raise ConfigError(f"dropped columns not in schema: {unknown}")

    @property
    def columns(self):
        return ("id", "peptide_mut", "peptide_wt", "hla", *self.numeric_columns, "label")

    @property
    def kept_numeric(self):
        return tuple(c for c in self.numeric_columns if c not in self.dropped)

    def roles(self):
        roles = {"id": "id", "peptide_mut": "sequence", "peptide_wt": "sequence", "hla": "categorical"}
        for c in self.numeric_columns:
            roles[c] = "dropped" if c in self.dropped else "numeric"
        roles["label"] = "label"
        return roles

    def to_dict(self):
        return {"dropped": list(self.dropped), "numeric_columns": list(self.numeric_columns)}

    @classmethod
    def from_dict(cls, d):
        return cls(
            numeric_columns=tuple(d.get("numeric_columns", NUMERIC_COLUMNS)),
            dropped=tuple(d.get("dropped", ())),
        )


@dataclass(frozen=True)
class FeatureRecord:
    id: str
    peptide_mut: str
    peptide_wt: str
    hla: str
    numeric: tuple  # floats, None where missing
    label: int


@dataclass(frozen=True)
class Dataset:
    records: tuple
    schema: Schema = field(default_factory=Schema)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise DataError("dataset must contain at least one record")
        width = len(self.schema.numeric_columns)
        for r in self.records:
            if len(r.numeric) != width:
                raise DataError(f"record {r.id!r} has {len(r.numeric)} numeric slots, expected {width}")

    def __len__(self):
        return len(self.records)

    @property
    def labels(self):
        return np.array([r.label for r in self.records], dtype=np.int64)

    @property
    def ids(self):
        return [r.id for r in self.records]

    def subset(self, indices):
        return Dataset(tuple(self.records[i] for i in indices), self.schema, dict(self.metadata))


# ---------------------------------------------------------------------------
# peptides


def validate_peptide(seq, min_len=MIN_PEPTIDE_LEN, max_len=MAX_LEN):
    """Raise ``DataError`` unless ``seq`` is a canonical peptide of allowed length."""
    for ch in seq:
        if ch not in _CODE:
            raise DataError(f"invalid residue character {ch!r} in peptide {seq!r}")
    if not min_len <= len(seq) <= max_len:
        raise DataError(f"peptide {seq!r} has length {len(seq)}, expected {min_len}-{max_len}")
    return seq


@dataclass(frozen=True)
class TokenizedPeptide:
    tokens: np.ndarray
    valid_len: int

    def __eq__(self, other):
        return (
            isinstance(other, TokenizedPeptide)
            and self.valid_len == other.valid_len
            and np.array_equal(self.tokens, other.tokens)
        )


def tokenize(seq: str, max_len: int = MAX_LEN) -> TokenizedPeptide:
    """Map residues to alphabet indices and right-pad with ``PAD_CODE``."""
    if len(seq) > max_len:
        raise DataError(f"sequence of length {len(seq)} exceeds max_len {max_len}")
    tokens = np.full(max_len, PAD_CODE, dtype=np.int64)
    for i, ch in enumerate(seq):
        try:
            tokens[i] = _CODE[ch]
        except KeyError:
            raise DataError(f"invalid residue character {ch!r}") from None
    return TokenizedPeptide(tokens, len(seq))


def detokenize(tp: TokenizedPeptide) -> str:
    return "".join(ALPHABET[int(t)] for t in tp.tokens[: tp.valid_len])


def token_matrix(peptides: Sequence[str], max_len: int = MAX_LEN) -> np.ndarray:
    """Tokenize many peptides into an ``(n, max_len)`` integer matrix."""
    out = np.full((len(peptides), max_len), PAD_CODE, dtype=np.int64)
    for row, seq in enumerate(peptides):
        out[row] = tokenize(seq, max_len).tokens
    return out


# ---------------------------------------------------------------------------
# CSV


def _format_float(x):
    return "" if x is None else repr(float(x))


def parse_dataset(path, schema: Optional[Schema] = None) -> Dataset:
    """Read a CSV file into a :class:`Dataset`, preserving row order.

    Raises
    ------
    ParseError
        With the offending line number for wrong column counts, bad residues,
        unparseable numbers or labels outside ``{0.0, 1.0}``.
    """
    schema = schema or Schema()
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    expected = list(schema.columns)
    n_num = len(schema.numeric_columns)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected header", line=1) from None
        if header != expected:
            raise ParseError(f"header {header} does not match schema {expected}", line=1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} columns, got {len(row)}", line=line)
            rid, mut, wt, hla = row[:4]
            try:
                validate_peptide(mut)
                validate_peptide(wt)
            except DataError as exc:
                raise ParseError(str(exc), line=line) from None
            numeric = []
            for name, cell in zip(schema.numeric_columns, row[4 : 4 + n_num]):
                cell = cell.strip()
                if cell == "":
                    numeric.append(None)
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(f"column {name}: not a number: {cell!r}", line=line) from None
                if not math.isfinite(value):
                    raise ParseError(f"column {name}: non-finite value {cell!r}", line=line)
                numeric.append(value)
            try:
                label_value = float(row[-1])
            except ValueError:
                label_value = None
            if label_value not in (0.0, 1.0):
                raise ParseError(f"label must be 0.0 or 1.0, got {row[-1]!r}", line=line)
            records.append(FeatureRecord(rid, mut, wt, hla, tuple(numeric), int(label_value)))
    if not records:
        raise DataError(f"{path}: no data rows")
    return Dataset(tuple(records), schema, _read_sidecar(path))


def write_dataset(d: Dataset, path) -> Path:
    """Serialize ``d`` so that ``parse_dataset`` reproduces it exactly."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(d.schema.columns)
        for r in d.records:
            writer.writerow(
                [r.id, r.peptide_mut, r.peptide_wt, r.hla, *(_format_float(x) for x in r.numeric), f"{float(r.label):.1f}"]
            )
    if d.metadata:
        sidecar = path.with_name(path.name + ".meta.json")
        sidecar.write_text(json.dumps(d.metadata, sort_keys=True, indent=2) + "\n")
    return path


def _read_sidecar(path):
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        return json.loads(sidecar.read_text())
    return {}


# ---------------------------------------------------------------------------
# splitting


def _allocate(n, fractions):
    """Largest-remainder rounding of ``n`` items into ``len(fractions)`` bins."""
    raw = [n * f for f in fractions]
    counts = [math.floor(x) for x in raw]
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def split(d: Dataset, fractions=(0.8, 0.1, 0.1), seed: int = 0, stratify: bool = True):
    """Partition ``d`` into train/validation/test datasets.

    Split sizes use largest-remainder rounding (ties go to the earlier split).
    With ``stratify`` the positives and negatives are allocated separately, and
    when there are at least three positives every split receives one. Records
    keep their original relative order inside each split.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise ConfigError(f"split fractions must be three positive numbers summing to 1, got {fractions}")
    if len(d) == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    labels = d.labels
    if stratify:
        pos = np.flatnonzero(labels == 1)
        if len(pos) == 0:
            raise DataError("stratified split requested but the dataset has no positives")
        groups = [pos, np.flatnonzero(labels == 0)]
    else:
        groups = [np.arange(len(d))]

    parts = [[], [], []]
    for gi, idx in enumerate(groups):
        counts = _allocate(len(idx), fractions)
        if stratify and gi == 0 and len(idx) >= 3:
            while min(counts) == 0:
                counts[counts.index(max(counts))] -= 1
                counts[counts.index(0)] += 1
        perm = rng.permutation(idx)
        start = 0
        for k, c in enumerate(counts):
            parts[k].extend(perm[start : start + c].tolist())
            start += c
    out = []
    for p in parts:
        if not p:
            raise DataError(f"split fractions {fractions} leave an empty partition for {len(d)} records")
        out.append(d.subset(sorted(p)))
    return tuple(out)


# ---------------------------------------------------------------------------
# synthetic planted-signal data


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the planted-signal generator.

    A record is positive iff ``sigmoid(w . z + bias + motif_score) + noise * e > 0.5``
    where ``z`` are the standardized numeric features, ``e ~ N(0, 1)`` and
    ``motif_score`` is ``motif_weight`` when ``motif`` occurs in the mutant peptide.
    """

    n_neg: int = 900
    n_pos: int = 100
    motif: str = "KL"
    noise: float = 0.0
    seed: int = 0
    motif_weight: float = 1.0
    signal_scale: float = 3.0
    bias: float = 0.0
    missing_rate: float = 0.0
    alleles: tuple = DEFAULT_ALLELES

    def validate(self):
        if self.n_neg < 0 or self.n_pos < 0 or self.n_neg + self.n_pos == 0:
            raise ConfigError("n_neg and n_pos must be >= 0 with at least one record")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if not 0 <= self.missing_rate < 1:
            raise ConfigError("missing_rate must be in [0, 1)")
        for ch in self.motif:
            if ch not in _CODE:
                raise ConfigError(f"motif contains invalid residue {ch!r}")
        if not self.alleles:
            raise ConfigError("at least one allele is required")


def motif_score(peptide: str, motif: str, weight: float) -> float:
    return weight if motif and motif in peptide else 0.0


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def synth_generate(cfg: SynthConfig) -> Dataset:
    """Generate a labelled dataset whose labels follow a known linear rule.

    The generator weights, feature offsets/scales and the rule itself are
    stored in ``Dataset.metadata`` so tests can rebuild the planted scorer.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n_feat = len(NUMERIC_COLUMNS)
    w = rng.normal(size=n_feat)
    w *= cfg.signal_scale / np.linalg.norm(w)
    means = np.round(rng.uniform(-5.0, 5.0, size=n_feat), 3)
    scales = np.round(rng.uniform(0.5, 4.0, size=n_feat), 3)

    pos_rows, neg_rows = [], []
    need_pos, need_neg = cfg.n_pos, cfg.n_neg
    for _ in range(10_000):
        if need_pos <= 0 and need_neg <= 0:
            break
        batch = max(1024, 2 * (need_pos + need_neg))
        z = rng.normal(size=(batch, n_feat))
        lengths = rng.integers(MIN_PEPTIDE_LEN, MAX_LEN + 1, size=batch)
        residues = rng.integers(0, len(ALPHABET), size=(batch, MAX_LEN))
        mut_pos = rng.integers(0, lengths)
        shift = rng.integers(1, len(ALPHABET), size=batch)
        allele_idx = rng.integers(0, len(cfg.alleles), size=batch)
        noise = rng.normal(size=batch) * cfg.noise
        for b in range(batch):
            L = int(lengths[b])
            wt_codes = residues[b, :L]
            mut_codes = wt_codes.copy()
            mut_codes[mut_pos[b]] = (wt_codes[mut_pos[b]] + shift[b]) % len(ALPHABET)
            wt = "".join(ALPHABET[c] for c in wt_codes)
            mut = "".join(ALPHABET[c] for c in mut_codes)
            score = float(w @ z[b]) + cfg.bias + motif_score(mut, cfg.motif, cfg.motif_weight)
            label = int(_sigmoid(score) + noise[b] > 0.5)
            row = (mut, wt, cfg.alleles[allele_idx[b]], z[b])
            if label == 1 and need_pos > 0:
                pos_rows.append(row)
                need_pos -= 1
            elif label == 0 and need_neg > 0:
                neg_rows.append(row)
                need_neg -= 1
    else:
        raise ConfigError("synthetic generator could not reach the requested class counts")

    rows = [(r, 1) for r in pos_rows] + [(r, 0) for r in neg_rows]
    order = rng.permutation(len(rows))
    missing = rng.random(size=(len(rows), n_feat)) < cfg.missing_rate
    records = []
    for out_i, src in enumerate(order):
        (mut, wt, hla, z), label = rows[src]
        raw = means + scales * z
        numeric = tuple(None if missing[out_i, j] else float(raw[j]) for j in range(n_feat))
        records.append(FeatureRecord(f"syn{out_i:06d}", mut, wt, hla, numeric, label))

    metadata = {
        "generator": "planted_linear_v1",
        "weights": [float(x) for x in w],
        "feature_means": [float(x) for x in means],
        "feature_scales": [float(x) for x in scales],
        "bias": cfg.bias,
        "motif": cfg.motif,
        "motif_weight": cfg.motif_weight,
        "noise": cfg.noise,
        "seed": cfg.seed,
    }
    return Dataset(tuple(records), Schema(), metadata)


def planted_scores(d: Dataset) -> np.ndarray:
    """Noise-free planted score ``w . z + bias + motif_score`` for every record.

    Requires generator metadata and no missing values.
    """
    meta = d.metadata
    try:
        w = np.asarray(meta["weights"])
        mu = np.asarray(meta["feature_means"])
        s = np.asarray(meta["feature_scales"])
    except KeyError:
        raise DataError("dataset carries no generator metadata") from None
    X = np.array([[np.nan if v is None else v for v in r.numeric] for r in d.records], dtype=float)
    if np.isnan(X).any():
        raise DataError("planted scores need complete numeric features")
    z = (X - mu) / s
    motif = np.array([motif_score(r.peptide_mut, meta["motif"], meta["motif_weight"]) for r in d.records])
    return z @ w + meta["bias"] + motif
