#!/usr/bin/env python3
"""EAR against the target-only classifier (NC) on the synthesized networks."""
import argparse

from hetinf import harness


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--train-size", type=int, default=10_000)
    ap.add_argument("--out-dir", default="runs/compare_nc")
    args = ap.parse_args(argv)
    rec = harness.cmd_compare_nc([int(x) for x in args.seeds.split(",")], args.out_dir,
                                 replicates=args.replicates, epochs=args.epochs, train_size=args.train_size)
    print(harness.matrix_csv(rec.rows))


if __name__ == "__main__":
    main()
