"""Run every config in scripts/configs and write CSV/SVG to results/.

    python3 scripts/run_experiments.py [--out results] [names ...]
"""

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from discrete_ma.experiments import ExperimentConfig, run

HERE = Path(__file__).resolve().parent


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("names", nargs="*", help="config stems (default: all)")
    ap.add_argument("--out", default=str(HERE.parent / "results"))
    args = ap.parse_args()
    cfgs = sorted((HERE / "configs").glob("*.cfg"))
    if args.names:
        cfgs = [c for c in cfgs if c.stem in args.names]
    status = 0
    for path in cfgs:
        cfg = ExperimentConfig.parse(path.read_text())
        cfg = replace(cfg, output=str(Path(args.out) / path.stem))
        t0 = time.perf_counter()
        res = run(cfg)
        dt = time.perf_counter() - t0
        verdict = "PASS" if res.passed else "FAIL"
        print(f"{verdict} {path.stem} ({dt:.1f} s)")
        for name, ok in res.checks.items():
            if not ok:
                print(f"    failed: {name}")
        status |= not res.passed
    return int(status)


if __name__ == "__main__":
    sys.exit(main())
