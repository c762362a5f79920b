"""Command-line entry point: ``hetinf <subcommand> ...``.

Failures print a JSON object ``{"error": ..., "type": ...}`` to stderr and exit
with status 1.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .harness import ExperimentConfig, HarnessError, RunRecord


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment config; flags below override its fields")
    p.add_argument("--network", help="bundled network name, .bif path, or synth:A|B|C")
    p.add_argument("--seed-data", type=int)
    p.add_argument("--seed-model", type=int)
    p.add_argument("--seed-predict", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--train-size", type=int)
    p.add_argument("--test-size", type=int)
    p.add_argument("--sampler", choices=("ancestral", "gibbs"))
    p.add_argument("--ci", action="store_true", help="require all three seeds on the command line")
    p.add_argument("--record", help="write the run record JSON here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetinf", description="Posterior inference with neural models on BNs.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="sample a training set and exact-labelled test sets")
    _common(p)

    p = sub.add_parser("train", help="train one model kind on a generated bundle")
    _common(p)
    p.add_argument("--kind", required=True)
    p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="model setting override, e.g. --set epochs=50")

    for name, hlp in (("eval", "score a checkpoint on the test split"),
                      ("sweep-threshold", "score a checkpoint over a threshold grid")):
        p = sub.add_parser(name, help=hlp)
        _common(p)
        p.add_argument("--checkpoint", required=True, help="checkpoint path or 'oracle'")
        p.add_argument("--csv", help="append result rows to this CSV")
        p.add_argument("--score-all-variables", action="store_true",
                       help="score observed variables too (literal metric formula)")
        if name == "sweep-threshold":
            p.add_argument("--grid", type=_floats)

    for name in ("markov-border", "compare-nc"):
        p = sub.add_parser(name, help="synthesized Markov-border study")
        p.add_argument("--seeds", type=_ints, default=[0, 1, 2])
        p.add_argument("--replicates", type=int, default=10)
        p.add_argument("--epochs", type=int, default=30)
        p.add_argument("--train-size", type=int, default=10_000)
        p.add_argument("--out-dir", default="runs/markov_border")
        p.add_argument("--record")
        if name == "markov-border":
            p.add_argument("--models", default=",".join(harness.TABLE_MODELS))

    p = sub.add_parser("report", help="consolidate run records")
    p.add_argument("records", nargs="*")
    p.add_argument("--out-dir", default="runs/report")
    return ap


def load_config(args) -> ExperimentConfig:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    flags = {"network": args.network, "seed_data": args.seed_data, "seed_model": args.seed_model,
             "seed_predict": args.seed_predict, "out_dir": args.out_dir, "train_size": args.train_size,
             "test_size": args.test_size, "sampler": args.sampler}
    if args.ci:
        missing = [k for k in ("seed_data", "seed_model", "seed_predict") if flags[k] is None]
        if missing:
            raise HarnessError(f"CI mode requires explicit seeds: missing {missing}")
    d.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig.from_dict(d)


def _parse_sets(items) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep:
            raise HarnessError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def run(args) -> dict:
    cmd = args.command
    if cmd == "report":
        recs = [RunRecord.from_dict(json.loads(Path(r).read_text())) for r in args.records]
        return {k: str(v) for k, v in harness.emit_report(recs, args.out_dir).items()}
    if cmd in ("markov-border", "compare-nc"):
        kw = {"replicates": args.replicates, "epochs": args.epochs, "train_size": args.train_size}
        if cmd == "markov-border":
            rec = harness.cmd_markov_border(args.seeds, args.out_dir, tuple(args.models.split(",")), **kw)
        else:
            rec = harness.cmd_compare_nc(args.seeds, args.out_dir, **kw)
    else:
        cfg = load_config(args)
        if cmd == "gen-data":
            rec = harness.cmd_gen_data(cfg)
        elif cmd == "train":
            sets = _parse_sets(args.set)
            if sets:
                cfg.model_overrides = {**cfg.model_overrides, args.kind: {**cfg.model_overrides.get(args.kind, {}),
                                                                          **sets}}
            _, rec = harness.cmd_train(cfg, args.kind)
        elif cmd == "eval":
            rec = harness.cmd_eval(cfg, args.checkpoint, args.csv, score_all=args.score_all_variables)
        else:
            rec = harness.cmd_sweep_threshold(cfg, args.checkpoint, args.csv, args.grid,
                                              score_all=args.score_all_variables)
    if args.record:
        rec.save(args.record)
    return {"artifacts": rec.artifacts, "rows": [r.to_dict() for r in rec.rows]}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        out = run(args)
    except Exception as exc:  # surfaced to the caller as machine-readable JSON
        sys.stderr.write(json.dumps({"error": str(exc), "type": type(exc).__name__}) + "\n")
        return 1
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
