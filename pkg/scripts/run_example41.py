#!/usr/bin/env python3
"""Run the 2-d benchmark preset end to end: exact condition check,
Picard iteration to the bounded fixed point, and the
almost-periodicity-in-distribution scan.  Artifacts land in --out.
"""

import argparse
import sys
from pathlib import Path

try:
    from levyap.cli import main as levyap_main
except ImportError:  # running from a source checkout without installation
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    from levyap.cli import main as levyap_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("out_example41"))
    parser.add_argument("--paths", type=int, help="override the path count")
    parser.add_argument("--seed", type=int, help="override the seed")
    args = parser.parse_args()

    cli_args = ["apscan", "--preset", "example41", "--out", str(args.out)]
    if args.paths is not None:
        cli_args += ["--paths", str(args.paths)]
    if args.seed is not None:
        cli_args += ["--seed", str(args.seed)]
    return levyap_main(cli_args)


if __name__ == "__main__":
    raise SystemExit(main())
