#!/usr/bin/env python3
"""One-shot demo: synthesize a raw corpus, run every pipeline stage, and
print the final comparison table. Everything lands under --workdir."""

import argparse
import sys
from pathlib import Path

from mpoxscreen.cli import main as cli_main, ws_paths
from mpoxscreen.synthetic import make_raw_corpus


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=Path("demo_run"))
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--patients-per-class", type=int, default=5)
    args = parser.parse_args()

    sheet = make_raw_corpus(
        args.workdir / "raw", seed=args.seed, patients_per_class=args.patients_per_class
    )
    workspace = args.workdir / "workspace"
    code = cli_main(
        ["--workspace", str(workspace), "--seed", str(args.seed), "run", "all", "--intake", str(sheet)]
    )
    if code != 0:
        return code
    print()
    print(ws_paths(workspace)["report_txt"].read_text(), end="")
    print(f"\nworkspace: {workspace}")
    print(f"serve the best model with:\n  mpoxscreen serve --registry {workspace / 'train'} --addr 127.0.0.1:8000")
    return 0


if __name__ == "__main__":
    sys.exit(main())
