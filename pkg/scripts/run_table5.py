"""Full-scale four-method bias/MSE comparison (the eta-grid design).

    python scripts/run_table5.py [--reps 250] [--seed 1] [--out table5]

Writes <out>.csv and <out>.json.  At 250 replications this takes a few
minutes on one core; use --threads to parallelize replicates.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from misclassit.cli import main  # noqa: E402

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=250)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default="table5")
    args = parser.parse_args()
    argv = ["simulate", "--design", "table5", "--reps", str(args.reps),
            "--seed", str(args.seed), "--out", args.out]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    raise SystemExit(main(argv))
