"""Full-scale coverage studies (Wald and percentile intervals).

    python scripts/run_coverage.py --design table2 [--models a,b,c]
        [--fractions 0.1,0.2,0.3] [--reps 250] [--B 700] [--seed 1]

designs: table1 (n=300), table2 (n=600), table3 (n=1000), table4 (nine
covariates, n=1000).  The full grid with B=700 takes hours; trim models /
fractions / reps / B for pilot runs.
"""

import argparse
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from misclassit.cli import main  # noqa: E402

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--design", default="table2",
                        choices=["table1", "table2", "table3", "table4"])
    parser.add_argument("--models", default="a,b,c")
    parser.add_argument("--fractions", default="0.1,0.2,0.3")
    parser.add_argument("--reps", type=int, default=250)
    parser.add_argument("--B", type=int, default=700)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()
    argv = ["simulate", "--design", args.design, "--models", args.models,
            "--fractions", args.fractions, "--reps", str(args.reps),
            "--B", str(args.B), "--seed", str(args.seed),
            "--out", args.out or args.design]
    if args.threads:
        argv += ["--threads", str(args.threads)]
    raise SystemExit(main(argv))
