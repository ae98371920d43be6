"""Command line entry point: ``descdetect <command> [options]``.

Every command prints the seed it runs with (to stderr, so stdout stays
machine readable) and writes its outputs atomically.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, metrics
from .errors import DescDetectError, NoPositives
from .extract import extract
from .pipeline import (DEFAULT_SEED, ModelBundle, ProtocolConfig, atomic_write, budget_sweep,
                       evaluate_bundle, extract_manifest, load_manifest, plot_pr_curves, sweep_table,
                       train, write_evaluation, write_no_positive_summary, write_train_outputs)
from .synthetic import TRAIN_POSITIVE_FRACTION, write_corpus

log = logging.getLogger("descdetect")


def _config(args) -> ProtocolConfig:
    config = ProtocolConfig.load(args.config) if getattr(args, "config", None) else ProtocolConfig()
    overrides = {}
    if getattr(args, "budget", None) is not None:
        overrides["budget"] = args.budget
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    return replace(config, **overrides) if overrides else config


def _labeled(manifest_path):
    manifest = load_manifest(manifest_path)
    if not manifest.entries:
        raise DescDetectError(f"{manifest_path}: empty manifest")
    if not manifest.is_labeled():
        raise DescDetectError(f"{manifest_path}: every entry needs a 0/1 label")
    records, labels, failures = extract_manifest(manifest)
    if not records:
        raise DescDetectError(f"{manifest_path}: no entry could be read")
    return records, labels, failures


def cmd_extract(args) -> int:
    manifest = load_manifest(args.manifest)
    if not manifest.entries:
        print(f"error: empty manifest {args.manifest}", file=sys.stderr)
        return 1
    out = Path(args.out)
    written, used = 0, set()
    for entry in manifest.entries:
        try:
            record = extract(entry.path)
        except (DescDetectError, OSError) as exc:
            log.warning("skipping %s: %s", entry.path, exc)
            continue
        name = Path(entry.path).name
        stem, k = name, 1
        while name in used:
            k += 1
            name = f"{stem}.{k}"
        used.add(name)
        atomic_write(out / f"{name}.json", json.dumps(record.to_report(), indent=1) + "\n")
        written += 1
    print(f"extracted {written} of {len(manifest.entries)} entries into {out}")
    return 0 if written else 1


def cmd_train(args) -> int:
    config = _config(args)
    records, labels, failures = _labeled(args.manifest)
    result = train(records, labels, config, args.seed)
    write_train_outputs(result, args.out)
    protocol = result.bundle.protocol
    print(f"training rows: {protocol['n_train']}  sequestered: {protocol['n_validation']}  "
          f"skipped: {len(failures)}")
    for name, report in result.validation.items():
        print(f"validation {name:8s} F1={report.f1:.4f} AUC={report.pr_auc:.4f} AP={report.ap:.4f}")
    print(f"selected: {result.bundle.selected}")
    print(f"bundle written to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    bundle = ModelBundle.load(args.bundle)
    records, labels, _ = _labeled(args.manifest)
    try:
        result = evaluate_bundle(bundle, records, labels)
    except NoPositives as exc:
        write_no_positive_summary(args.out, bundle, records)
        print(f"error: {exc}; summary written without curves to {args.out}", file=sys.stderr)
        return 1
    write_evaluation(result, args.out, bundle.selected, title=Path(args.manifest).stem)
    for name, report in result.reports.items():
        marker = "*" if name == bundle.selected else " "
        print(f"{marker}{name:8s} F1={report.f1:.4f} AUC={report.pr_auc:.4f} AP={report.ap:.4f}")
    print(f"baseline   {result.baseline:.4f}  ({result.n_pos}/{result.n_total} manipulated)")
    return 0


def cmd_predict(args) -> int:
    bundle = ModelBundle.load(args.bundle)
    status = 0
    for path in args.inputs:
        try:
            record = extract(path)
        except (DescDetectError, OSError) as exc:
            print(f"error: {path}: {exc}", file=sys.stderr)
            status = 1
            continue
        probability = float(bundle.predict_proba([record])[0])
        print(f"{record.source_id}\t{probability:.6f}")
    return status


def cmd_budget_sweep(args) -> int:
    config = _config(args)
    records, labels, _ = _labeled(args.manifest)
    test_records, test_labels, _ = _labeled(args.test_manifest)
    results = budget_sweep(records, labels, test_records, test_labels, config, args.seed)
    out = Path(args.out)
    for budget, trained, evaluated in results:
        sub = out / f"budget_{int(round(budget * 100)):02d}"
        write_train_outputs(trained, sub / "bundle.json")
        n_train = trained.bundle.protocol["n_train"]
        write_evaluation(evaluated, sub, trained.bundle.selected,
                         title=f"budget {budget:.2f} ({n_train} videos)")
        print(f"budget {budget:.2f}: {n_train} training rows, ensemble AP "
              f"{evaluated.reports['ensemble'].ap:.4f}, selected {trained.bundle.selected}")
    atomic_write(out / "sweep.csv", sweep_table(results))
    print(f"sweep table written to {out / 'sweep.csv'}")
    return 0


def cmd_baseline(args) -> int:
    if args.manifest:
        labels = load_manifest(args.manifest).labels
        if any(lab is None for lab in labels):
            raise DescDetectError("baseline needs a fully labeled manifest")
        n_pos, n_total = sum(labels), len(labels)
    else:
        n_pos, n_total = args.n_pos, args.n_total
    report = metrics.baseline_report(n_pos, n_total, seeds=args.repeats, seed=args.seed)
    doc = {"n_pos": n_pos, "n_total": n_total, "prevalence": report.baseline,
           "f1": report.f1, "pr_auc": report.pr_auc, "ap": report.ap, "repeats": args.repeats}
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        atomic_write(args.out, text)
    sys.stdout.write(text)
    return 0


def cmd_synth(args) -> int:
    manifest = write_corpus(args.out, args.n, args.positive_fraction, args.seed, args.prefix)
    print(f"wrote {args.n} probe reports and {manifest}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="descdetect",
                                     description="Video manipulation detection from stream descriptors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="master seed (default: %(default)s)")
        return p

    def protocol(p):
        p.add_argument("--config", help="YAML protocol config")
        p.add_argument("--budget", type=float, help="training budget fraction (0.10, 0.25, 0.50 or 0.75)")
        p.add_argument("--trials", type=int, help="random-search trials per detector")
        p.add_argument("--workers", type=int, help="worker processes for the search")
        return p

    p = seeded(sub.add_parser("extract", help="write a probe report per manifest entry"))
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_extract)

    p = protocol(seeded(sub.add_parser("train", help="search, fit and select a detector")))
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="bundle path (trial logs are written beside it)")
    p.set_defaults(func=cmd_train)

    p = seeded(sub.add_parser("evaluate", help="score a bundle on a labeled manifest"))
    p.add_argument("--bundle", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory for summary, curves and SVG")
    p.set_defaults(func=cmd_evaluate)

    p = seeded(sub.add_parser("predict", help="manipulation probability for videos or probe reports"))
    p.add_argument("--bundle", required=True)
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_predict)

    p = protocol(seeded(sub.add_parser("budget-sweep", help="train at every budget, evaluate on a test set")))
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_budget_sweep)

    p = seeded(sub.add_parser("baseline", help="metrics of the prevalence-rate random predictor"))
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--manifest", help="labeled manifest supplying the class counts")
    group.add_argument("--n-pos", type=int)
    p.add_argument("--n-total", type=int)
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_baseline)

    p = seeded(sub.add_parser("synth", help="generate a synthetic labeled corpus of probe reports"))
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=700)
    p.add_argument("--positive-fraction", type=float, default=TRAIN_POSITIVE_FRACTION)
    p.add_argument("--prefix", default="video")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "baseline" and args.n_pos is not None and args.n_total is None:
        parser.error("--n-pos needs --n-total")
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    print(f"seed: {args.seed}", file=sys.stderr)
    try:
        return args.func(args)
    except DescDetectError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
