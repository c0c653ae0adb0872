"""Command line entry point: ``neo <subcommand> [--config PATH] [--seed N] ...``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import data as dm
from . import explain, metrics
from . import preprocess as pp
from .bundle import load_bundle
from .errors import ConfigError, NeoError
from .pipeline import (
    PipelineConfig,
    benchmark,
    bundle_predict,
    grid_run,
    prepare,
    run_pipeline,
    write_correlation_csv,
)

log = logging.getLogger("neo_ensemble")


def _load_config(args, **overrides):
    overrides = {"seed": args.seed, **overrides}
    if args.config:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_dict({}, **overrides) if overrides.get("data") or overrides.get("synth") else None


def _raw_config(args):
    if not args.config:
        return {}
    try:
        return json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from None


def _print_json(obj):
    print(json.dumps(obj, sort_keys=True, indent=2))


def cmd_synth(args):
    block = dict(_raw_config(args).get("synth") or {})
    for key in ("n_neg", "n_pos", "noise", "motif", "missing_rate"):
        value = getattr(args, key)
        if value is not None:
            block[key] = value
    if args.seed is not None:
        block["seed"] = args.seed
    if "alleles" in block:
        block["alleles"] = tuple(block["alleles"])
    try:
        cfg = dm.SynthConfig(**block)
    except TypeError as exc:
        raise ConfigError(f"invalid synth config: {exc}") from None
    d = dm.synth_generate(cfg)
    dm.write_dataset(d, args.out)
    print(f"wrote {len(d)} records ({int(d.labels.sum())} positive) to {args.out}")


def cmd_preprocess(args):
    cfg = _load_config(args, data=args.data)
    if cfg is None:
        raise ConfigError("preprocess needs --data or a config with a data source")
    d = dm.parse_dataset(cfg.data, cfg.schema) if cfg.data else dm.synth_generate(cfg.synth)
    parts = dm.split(d, cfg.fractions, cfg.seeds()["split"], cfg.stratify)
    params = pp.fit(parts[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transform.json").write_text(json.dumps(params.to_dict(), sort_keys=True, indent=2) + "\n")
    header = ["id", *params.numeric_columns, "hla_code", "label"]
    for name, part in zip(("train", "validation", "test"), parts):
        Z = pp.apply(params, part)
        with (out / f"{name}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for rid, row, y in zip(part.ids, Z, part.labels):
                w.writerow([rid, *(repr(float(v)) for v in row[:-1]), int(row[-1]), f"{float(y):.1f}"])
    print(f"fitted transforms on {len(parts[0])} training records; wrote {out}")


def cmd_train(args):
    cfg = _load_config(args, data=args.data, out_dir=args.out)
    if cfg is None:
        raise ConfigError("train needs --config or --data")
    result = run_pipeline(cfg)
    r = result.report
    print(
        f"test AUC {r.auc:.4f}  accuracy {r.rates.accuracy:.4f}  recall {r.rates.recall:.4f}  "
        f"specificity {r.rates.specificity:.4f}  precision {r.rates.precision:.4f}  F1 {r.rates.f1:.4f}"
    )
    for f in result.files:
        print(f"wrote {f}")


def _dataset_for(args, bundle):
    return dm.parse_dataset(args.data, bundle.schema)


def cmd_evaluate(args):
    bundle = load_bundle(args.model)
    d = _dataset_for(args, bundle)
    pf, pr, p, _ = bundle_predict(bundle, d)
    thr = bundle.ensemble.threshold
    y = d.labels
    report = metrics.evaluate(p, y, thr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = report.to_dict()
    doc["branches"] = {"ffnn": metrics.evaluate(pf, y, thr).to_dict(), "rnn": metrics.evaluate(pr, y, thr).to_dict()}
    (out / "report.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    metrics.write_roc_csv(report.roc, out / "roc.csv")
    if not args.no_figures:
        from . import plotting

        plotting.plot_roc({"ensemble": (report.roc, report.auc)}, out / "roc.png")
        plotting.plot_confusion(report.confusion, out / "confusion.png")
    print(f"AUC {report.auc:.4f}  recall {report.rates.recall:.4f}  accuracy {report.rates.accuracy:.4f}")


def cmd_predict(args):
    bundle = load_bundle(args.model)
    d = _dataset_for(args, bundle)
    pf, pr, p, labels = bundle_predict(bundle, d)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "p_ffnn", "p_rnn", "probability", "label"])
        for row in zip(d.ids, pf, pr, p, labels):
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3])), int(row[4])])
    print(f"wrote {len(d)} predictions to {args.out}")


def cmd_explain(args):
    bundle = load_bundle(args.model)
    d = _dataset_for(args, bundle)
    Xf, _ = prepare(bundle, d)
    sample = Xf[: args.sample]
    names = list(bundle.transform.numeric_columns)
    rel = explain.mean_abs_relevance(bundle.ffnn, sample)
    cm = explain.correlation_matrix(Xf)
    pairs = explain.redundancy_report(cm, args.threshold)
    doc = {
        "correlated_pairs": [[names[i], names[j]] for i, j in pairs],
        "features": names,
        "mean_abs_relevance": [float(v) for v in rel],
        "n_records": int(len(sample)),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "relevance.json").write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    write_correlation_csv(names, cm, out / "correlation.csv")
    if not args.no_figures:
        from . import plotting

        plotting.plot_relevance(names, doc["mean_abs_relevance"], out / "relevance.png")
        plotting.plot_correlation(names, cm.values, out / "correlation.png", args.threshold)
    for name, value in zip(names, rel):
        print(f"{name}\t{value:.6f}")
    print(f"pairs with |r| > {args.threshold}: {doc['correlated_pairs'] or 'none'}")


def cmd_grid(args):
    cfg = _load_config(args, out_dir=args.out)
    if cfg is None:
        raise ConfigError("grid needs --config with a 'grid' list")
    rows = grid_run(cfg)
    print("\t".join(["FFNN Arch.", "RNN Arch.", "Acc.", "AUC Score", "Recall"]))
    for row in rows:
        print(f"{row[0]}\t{row[1]}\t{row[2]:.4%}\t{row[3]:.4f}\t{row[4]:.4f}")


def cmd_benchmark(args):
    bundle = load_bundle(args.model)
    seed = args.seed if args.seed is not None else 0
    report = benchmark(bundle, args.n, seed)
    _print_json(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "benchmark.json").write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--seed", type=int, help="override the master seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="neo", description="Two-branch FFNN + LSTM neoepitope binding classifier")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a planted-signal CSV")
    p.add_argument("--n-neg", dest="n_neg", type=int)
    p.add_argument("--n-pos", dest="n_pos", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--motif")
    p.add_argument("--missing-rate", dest="missing_rate", type=float)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", parents=[common], help="fit transforms on the training split")
    p.add_argument("--data")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", parents=[common], help="run the full pipeline")
    p.add_argument("--data")
    p.add_argument("--out", help="output directory (overrides config)")
    p.set_defaults(func=cmd_train)

    for name, func, help_ in (
        ("evaluate", cmd_evaluate, "score a labelled CSV with a saved bundle"),
        ("predict", cmd_predict, "write per-record predictions"),
        ("explain", cmd_explain, "LRP relevance and correlation screening"),
    ):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--model", required=True, help="model.neo.json bundle")
        p.add_argument("--data", required=True, help="input CSV")
        p.add_argument("--out", required=True)
        if name != "predict":
            p.add_argument("--no-figures", action="store_true")
        if name == "explain":
            p.add_argument("--sample", type=int, default=1000)
            p.add_argument("--threshold", type=float, default=0.75)
        p.set_defaults(func=func)

    p = sub.add_parser("grid", parents=[common], help="run an architecture grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("benchmark", parents=[common], help="time batch inference")
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, default=40_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except NeoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001
        log.debug("unhandled error", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
