#!/usr/bin/env python3
"""Markov-border study on the synthesized A/B/C networks, plus the hyperprior variance report."""
import argparse
import json
import logging

from hetinf import harness


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--models", default=",".join(harness.TABLE_MODELS))
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--train-size", type=int, default=10_000)
    ap.add_argument("--out-dir", default="runs/markov_border")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    rec = harness.cmd_markov_border([int(x) for x in args.seeds.split(",")], args.out_dir,
                                    tuple(args.models.split(",")), replicates=args.replicates,
                                    epochs=args.epochs, train_size=args.train_size)
    print(harness.matrix_csv(rec.rows))
    print(json.dumps(rec.extra["variance_report"], indent=2))


if __name__ == "__main__":
    main()
