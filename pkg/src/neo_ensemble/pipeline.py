"""End-to-end orchestration: split, preprocess, SMOTE, train, aggregate, evaluate, write.

Stage order is fixed. Transform statistics and SMOTE only ever see the
training split; evaluation runs on the untouched test split.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as dm
from . import explain, metrics
from . import preprocess as pp
from . import smote
from .bundle import ModelBundle, config_digest, save_bundle
from .ensemble import EnsembleConfig, predict_batch
from .errors import ConfigError, NeoError
from .features import DEFAULT_WIDTH, PackedSequences, ffnn_view, flat_rows, packing_for
from .nn import TrainConfig, init_ffnn, init_rnn, predict_logits, predict_proba
from .nn import training

log = logging.getLogger(__name__)

DEFAULT_FFNN_ARCH = (8, 16, 32, 1)
DEFAULT_RNN_ARCH = (35, 32, 32, 1)
GRID_HEADER = ["FFNN Arch.", "RNN Arch.", "Acc.", "AUC Score", "Recall"]


class PipelineError(NeoError):
    """A stage failed; carries the stage name and keeps the cause's exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)


def parse_arch(text, row=None):
    """``"8:16:32:1"`` -> ``[8, 16, 32, 1]``."""
    where = f" (grid row {row})" if row is not None else ""
    parts = str(text).strip().split(":")
    if len(parts) < 2 or not all(p.isdigit() for p in parts):
        raise ConfigError(f"invalid architecture string {text!r}{where}")
    arch = [int(p) for p in parts]
    if any(a <= 0 for a in arch) or arch[-1] != 1:
        raise ConfigError(f"invalid architecture {text!r}{where}: sizes must be positive and end in 1")
    return arch


def format_arch(arch):
    return ":".join(str(a) for a in arch)


@dataclass(frozen=True)
class PipelineConfig:
    out_dir: str = "out"
    data: Optional[str] = None
    synth: Optional[dm.SynthConfig] = None
    schema: dm.Schema = field(default_factory=dm.Schema)
    fractions: tuple = (0.8, 0.1, 0.1)
    stratify: bool = True
    seed: int = 0
    use_smote: bool = True
    smote: smote.SmoteConfig = field(default_factory=smote.SmoteConfig)
    ffnn_arch: tuple = DEFAULT_FFNN_ARCH
    rnn_arch: tuple = DEFAULT_RNN_ARCH
    ffnn_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100))
    rnn_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=5))
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    max_len: int = dm.MAX_LEN
    width: int = DEFAULT_WIDTH
    grid: tuple = ()
    explain_sample: int = 1000
    figures: bool = True

    def validate(self):
        if self.data is None and self.synth is None:
            raise ConfigError("config needs either 'data' (a CSV path) or a 'synth' block")
        if self.data is not None and not Path(self.data).exists():
            raise ConfigError(f"data file not found: {self.data}")
        if len(self.fractions) != 3 or abs(sum(self.fractions) - 1.0) > 1e-9 or min(self.fractions) <= 0:
            raise ConfigError(f"fractions must be three positive numbers summing to 1, got {self.fractions}")
        n_numeric = len(self.schema.kept_numeric)
        if self.ffnn_arch[0] != n_numeric:
            raise ConfigError(f"FFNN input width {self.ffnn_arch[0]} does not match {n_numeric} numeric features")
        if self.rnn_arch[0] != self.width:
            raise ConfigError(f"RNN input width {self.rnn_arch[0]} does not match timestep width {self.width}")
        if len(self.rnn_arch) < 3:
            raise ConfigError("RNN architecture needs at least one LSTM layer")
        for i, row in enumerate(self.grid):
            parse_arch(row[0], i)
            parse_arch(row[1], i)
        return self

    def seeds(self):
        s = int(self.seed)
        return {"ffnn": s, "rnn": s + 1, "smote": s, "split": s}

    def to_dict(self):
        d = {
            "data": self.data,
            "ensemble": self.ensemble.to_dict(),
            "explain_sample": self.explain_sample,
            "ffnn_arch": format_arch(self.ffnn_arch),
            "ffnn_train": self.ffnn_train.to_dict(),
            "fractions": list(self.fractions),
            "grid": [list(r) for r in self.grid],
            "max_len": self.max_len,
            "rnn_arch": format_arch(self.rnn_arch),
            "rnn_train": self.rnn_train.to_dict(),
            "schema": self.schema.to_dict(),
            "seed": self.seed,
            "smote": {"apply_to": list(self.smote.apply_to), "k": self.smote.k, "target_ratio": self.smote.target_ratio},
            "stratify": self.stratify,
            "synth": None if self.synth is None else {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.synth).items()},
            "use_smote": self.use_smote,
            "width": self.width,
        }
        return d

    @classmethod
    def from_dict(cls, d, **overrides):
        d = dict(d)
        d.update({k: v for k, v in overrides.items() if v is not None})
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        kw = {}
        try:
            for key in ("out_dir", "data", "stratify", "seed", "use_smote", "max_len", "width", "explain_sample", "figures"):
                if key in d:
                    kw[key] = d[key]
            if d.get("synth") is not None:
                s = dict(d["synth"])
                if "alleles" in s:
                    s["alleles"] = tuple(s["alleles"])
                kw["synth"] = dm.SynthConfig(**s)
            if "schema" in d:
                kw["schema"] = dm.Schema.from_dict(d["schema"])
            if "fractions" in d:
                kw["fractions"] = tuple(float(x) for x in d["fractions"])
            if "smote" in d:
                s = dict(d["smote"])
                s.pop("seed", None)
                kw["smote"] = smote.SmoteConfig(**s)
            for key in ("ffnn_arch", "rnn_arch"):
                if key in d:
                    v = d[key]
                    kw[key] = tuple(parse_arch(v) if isinstance(v, str) else [int(x) for x in v])
            for key, default_epochs in (("ffnn_train", 100), ("rnn_train", 5)):
                if key in d:
                    t = {"epochs": default_epochs, **d[key]}
                    kw[key] = TrainConfig(**t)
            if "ensemble" in d:
                kw["ensemble"] = EnsembleConfig.from_dict(d["ensemble"])
            if "grid" in d:
                rows = []
                for i, r in enumerate(d["grid"]):
                    if isinstance(r, dict):
                        r = (r.get("ffnn"), r.get("rnn"))
                    if len(r) != 2:
                        raise ConfigError(f"grid row {i} must name an FFNN and an RNN architecture")
                    rows.append((str(r[0]), str(r[1])))
                kw["grid"] = tuple(rows)
        except TypeError as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        return cls(**kw).validate()

    @classmethod
    def from_file(cls, path, **overrides):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(doc, **overrides)


@dataclass
class PipelineResult:
    report: metrics.EvalReport
    branch_reports: dict
    bundle: ModelBundle
    histories: dict
    counts: dict
    stages: list
    timing: dict
    test_scores: dict
    test_labels: np.ndarray
    relevance: Optional[dict] = None
    correlation: Optional[explain.CorrelationMatrix] = None
    files: list = field(default_factory=list)

    def report_dict(self):
        out = self.report.to_dict()
        out["branches"] = {k: v.to_dict() for k, v in sorted(self.branch_reports.items())}
        out["counts"] = dict(sorted(self.counts.items()))
        out["ensemble_config"] = self.bundle.ensemble.to_dict()
        out["format"] = "neo-report/1"
        out["history"] = {k: v.to_dict() for k, v in sorted(self.histories.items())}
        return out


def load_data(cfg: PipelineConfig) -> dm.Dataset:
    if cfg.data is not None:
        return dm.parse_dataset(cfg.data, cfg.schema)
    return dm.synth_generate(cfg.synth)


def prepare(bundle: ModelBundle, d: dm.Dataset):
    """Branch inputs for ``d`` under a bundle's fitted transforms."""
    Z = pp.apply(bundle.transform, d)
    return ffnn_view(Z, bundle.packing), PackedSequences(flat_rows(Z, d, bundle.packing), bundle.packing)


def bundle_predict(bundle: ModelBundle, d: dm.Dataset):
    """``(p_ffnn, p_rnn, p_ensemble, labels)`` for every record of ``d``."""
    Xf, Xr = prepare(bundle, d)
    pf = predict_proba(bundle.ffnn, Xf)
    pr = predict_proba(bundle.rnn, Xr)
    p, labels = predict_batch(pf, pr, bundle.ensemble)
    return pf, pr, p, labels


def run_pipeline(cfg: PipelineConfig, write: bool = True, dataset: Optional[dm.Dataset] = None) -> PipelineResult:
    """Run every stage and, with ``write``, emit the report files into ``cfg.out_dir``."""
    cfg.validate()
    stages, timing = [], {}

    def stage(name, fn, *args, **kwargs):
        stages.append(name)
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            timing[f"{name}_seconds"] = time.perf_counter() - t0

    seeds = cfg.seeds()
    d = dataset if dataset is not None else stage("load", load_data, cfg)
    train_d, val_d, test_d = stage("split", dm.split, d, cfg.fractions, seeds["split"], cfg.stratify)
    params = stage("fit_transforms", pp.fit, train_d)
    Ztr, Zva, Zte = stage("apply_transforms", lambda: [pp.apply(params, x) for x in (train_d, val_d, test_d)])
    packing = packing_for(params, cfg.width, cfg.max_len)
    ytr, yva, yte = train_d.labels, val_d.labels, test_d.labels

    Xf_tr, Xf_va, Xf_te = (ffnn_view(Z, packing) for Z in (Ztr, Zva, Zte))
    Xr_tr, Xr_va, Xr_te = stage(
        "pack_sequences", lambda: [flat_rows(Z, x, packing) for Z, x in ((Ztr, train_d), (Zva, val_d), (Zte, test_d))]
    )

    yf_tr = yr_tr = ytr
    if cfg.use_smote:
        sm_cfg = replace(cfg.smote, seed=seeds["smote"])

        def _oversample():
            a = smote.oversample(Xf_tr, ytr, sm_cfg)
            b = smote.oversample(Xr_tr, ytr, sm_cfg)
            return a, b

        (Xf_tr, yf_tr), (Xr_tr, yr_tr) = stage("smote", _oversample)

    ffnn_cfg = replace(cfg.ffnn_train, seed=seeds["ffnn"])
    rnn_cfg = replace(cfg.rnn_train, seed=seeds["rnn"])
    ffnn, ffnn_hist = stage(
        "train_ffnn", training.train, init_ffnn(cfg.ffnn_arch, seeds["ffnn"]), Xf_tr, yf_tr, ffnn_cfg, (Xf_va, yva)
    )
    rnn, rnn_hist = stage(
        "train_rnn",
        training.train,
        init_rnn(cfg.rnn_arch, seeds["rnn"]),
        PackedSequences(Xr_tr, packing),
        yr_tr,
        rnn_cfg,
        (PackedSequences(Xr_va, packing), yva),
    )

    provenance = {
        "config_digest": config_digest({k: v for k, v in cfg.to_dict().items() if k != "grid"}),
        "seeds": seeds,
        "train_counts": {"rows": int(len(yf_tr)), "positives": int(np.sum(yf_tr))},
    }
    bundle = ModelBundle(params, ffnn, rnn, cfg.ensemble, packing, cfg.schema, provenance)

    def _score():
        t0 = time.perf_counter()
        pf = predict_proba(bundle.ffnn, Xf_te)
        pr = predict_proba(bundle.rnn, PackedSequences(Xr_te, packing))
        p, _ = predict_batch(pf, pr, bundle.ensemble)
        timing["test_inference_seconds"] = time.perf_counter() - t0
        return pf, pr, p

    pf, pr, p = stage("aggregate", _score)
    thr = cfg.ensemble.threshold
    report, rep_f, rep_r = stage("evaluate", lambda: [metrics.evaluate(s, yte, thr) for s in (p, pf, pr)])
    report.timing = dict(timing)

    relevance = correlation = None
    if cfg.explain_sample > 0:

        def _explain():
            sample = Xf_te[: cfg.explain_sample]
            rel = explain.mean_abs_relevance(bundle.ffnn, sample)
            scores = predict_logits(bundle.ffnn, sample)
            conservation = float(np.max(np.abs(explain.lrp_batch(bundle.ffnn, sample).sum(axis=1) - scores)))
            return (
                {
                    "features": list(params.numeric_columns),
                    "max_conservation_error": conservation,
                    "mean_abs_relevance": [float(v) for v in rel],
                    "n_records": int(len(sample)),
                },
                explain.correlation_matrix(ffnn_view(Ztr, packing)),
            )

        relevance, correlation = stage("explain", _explain)
        relevance["correlated_pairs"] = [
            [params.numeric_columns[i], params.numeric_columns[j]] for i, j in explain.redundancy_report(correlation)
        ]

    counts = {
        "test": len(test_d),
        "test_positives": int(yte.sum()),
        "train": len(train_d),
        "train_after_smote": int(len(yf_tr)),
        "train_positives": int(ytr.sum()),
        "validation": len(val_d),
        "validation_positives": int(yva.sum()),
    }
    result = PipelineResult(
        report=report,
        branch_reports={"ffnn": rep_f, "rnn": rep_r},
        bundle=bundle,
        histories={"ffnn": ffnn_hist, "rnn": rnn_hist},
        counts=counts,
        stages=stages,
        timing=timing,
        test_scores={"ensemble": p, "ffnn": pf, "rnn": pr},
        test_labels=yte,
        relevance=relevance,
        correlation=correlation,
    )
    if write:
        stage("write", write_outputs, result, cfg)
    return result


def _dump_json(obj, path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")
    return path


def write_correlation_csv(names, cm: explain.CorrelationMatrix, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["feature", *names, "degenerate"])
        for name, row, flag in zip(names, cm.values, cm.degenerate):
            w.writerow([name, *(repr(float(v)) for v in row), int(flag)])
    return path


def write_outputs(result: PipelineResult, cfg: PipelineConfig):
    """Write report, ROC, bundle, explanations and figures; on failure remove what was written."""
    from . import plotting

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def track(path):
        written.append(Path(path))
        return path

    try:
        track(_dump_json(result.report_dict(), out / "report.json"))
        track(metrics.write_roc_csv(result.report.roc, out / "roc.csv"))
        track(save_bundle(result.bundle, out / "model.neo.json"))
        track(_dump_json({k: result.timing[k] for k in sorted(result.timing)}, out / "timing.json"))
        if result.relevance is not None:
            track(_dump_json(result.relevance, out / "relevance.json"))
            track(write_correlation_csv(result.relevance["features"], result.correlation, out / "correlation.csv"))
        if cfg.figures:
            curves = {"ensemble": (result.report.roc, result.report.auc)}
            curves.update({k: (v.roc, v.auc) for k, v in sorted(result.branch_reports.items())})
            track(plotting.plot_roc(curves, out / "roc.png"))
            track(plotting.plot_loss({k: v.to_dict() for k, v in result.histories.items()}, out / "loss.png"))
            track(plotting.plot_confusion(result.report.confusion, out / "confusion.png"))
            if result.relevance is not None:
                names = result.relevance["features"]
                track(plotting.plot_relevance(names, result.relevance["mean_abs_relevance"], out / "relevance.png"))
                track(plotting.plot_correlation(names, result.correlation.values, out / "correlation.png"))
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    result.files = [str(p) for p in written]
    return written


def grid_run(cfg: PipelineConfig, write: bool = True, dataset: Optional[dm.Dataset] = None):
    """One pipeline per grid row on identical data, splits and seeds.

    Returns rows shaped like the architecture table: FFNN arch, RNN arch,
    accuracy, AUC and recall of the ensemble on the test split.
    """
    cfg.validate()
    if not cfg.grid:
        raise ConfigError("grid is empty")
    rows_in = [(parse_arch(f, i), parse_arch(r, i)) for i, (f, r) in enumerate(cfg.grid)]
    d = dataset if dataset is not None else load_data(cfg)
    rows = []
    for i, (fa, ra) in enumerate(rows_in):
        try:
            row_cfg = replace(cfg, ffnn_arch=tuple(fa), rnn_arch=tuple(ra), grid=(), explain_sample=0).validate()
        except ConfigError as exc:
            raise ConfigError(f"grid row {i}: {exc}") from None
        res = run_pipeline(row_cfg, write=False, dataset=d)
        r = res.report
        rows.append([format_arch(fa), format_arch(ra), r.rates.accuracy, r.auc, r.rates.recall])
    if write:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "grid.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(GRID_HEADER)
            for row in rows:
                w.writerow([row[0], row[1], *(repr(float(v)) for v in row[2:])])
    return rows


def synthetic_inputs(bundle: ModelBundle, n: int, seed: int = 0):
    """Random already-preprocessed records in both branch views."""
    rng = np.random.default_rng(seed)
    pk = bundle.packing
    numeric = rng.normal(size=(n, pk.n_numeric))
    n_hla = bundle.transform.n_categories["hla"]
    hla = rng.integers(0, n_hla, size=(n, 1)) * pk.hla_scale
    lengths = rng.integers(dm.MIN_PEPTIDE_LEN, pk.max_len + 1, size=n)
    cols = np.arange(pk.max_len)[None, :]
    mut = np.where(cols < lengths[:, None], rng.integers(0, dm.PAD_CODE, size=(n, pk.max_len)), dm.PAD_CODE) / dm.PAD_CODE
    wt = np.where(cols < lengths[:, None], rng.integers(0, dm.PAD_CODE, size=(n, pk.max_len)), dm.PAD_CODE) / dm.PAD_CODE
    return numeric, PackedSequences(np.hstack([numeric, hla, mut, wt]), pk)


def benchmark(bundle: ModelBundle, n: int, seed: int = 0):
    """Wall-clock of batch ensemble inference over ``n`` synthetic records (informational)."""
    if n < 1:
        raise ConfigError("benchmark needs n >= 1")
    Xf, Xr = synthetic_inputs(bundle, n, seed)
    t0 = time.perf_counter()
    pf = predict_proba(bundle.ffnn, Xf)
    pr = predict_proba(bundle.rnn, Xr)
    predict_batch(pf, pr, bundle.ensemble)
    seconds = time.perf_counter() - t0
    return {
        "milliseconds": seconds * 1e3,
        "n_records": n,
        "records_per_second": n / seconds if seconds > 0 else float("inf"),
        "seconds": seconds,
    }
