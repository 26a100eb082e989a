"""Run every bundled experiment and print a one-line status per file.

    python3 scripts/run_all_experiments.py [--out results/experiments] [NAME ...]
"""

import argparse
import sys
import time
from pathlib import Path

from ladderperc.cli import run
from ladderperc.experiment import ExperimentSpec

ROOT = Path(__file__).resolve().parents[1]

# the infeasible example is expected to exit with status 3
EXPECTED = {"couple_infeasible": 3}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="experiment stems (default: all)")
    ap.add_argument("--out", type=Path, default=ROOT / "results" / "experiments")
    args = ap.parse_args(argv)
    paths = sorted((ROOT / "experiments").glob("*.yaml"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    bad = 0
    for path in paths:
        t0 = time.perf_counter()
        status, summary = run(ExperimentSpec.load(path), args.out)
        want = EXPECTED.get(path.stem, 0)
        ok = status == want
        bad += not ok
        print(f"{'ok ' if ok else 'BAD'} {path.stem:28s} exit={status} "
              f"({time.perf_counter() - t0:.1f} s)", flush=True)
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
