"""Run every config in configs/ through the CLI and collect the summaries."""
from __future__ import annotations

import argparse
import pathlib
import sys
import time

from acoustic_lab.cli import main

ROOT = pathlib.Path(__file__).resolve().parent.parent


def cli():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results"))
    ap.add_argument("--threads", type=int, default=4)
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    args = ap.parse_args()
    configs = sorted((ROOT / "configs").glob("*.cfg"))
    if args.names:
        configs = [c for c in configs if c.stem in args.names]
    status = 0
    for cfg in configs:
        t0 = time.perf_counter()
        code = main(["run", str(cfg), "--output-dir", f"{args.out}/{cfg.stem}",
                     "--threads", str(args.threads)])
        print(f"{cfg.stem}: exit {code} in {time.perf_counter() - t0:.0f}s")
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(cli())
