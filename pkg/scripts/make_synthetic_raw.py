#!/usr/bin/env python3
"""Generate a seeded synthetic raw-photo corpus plus its intake sheet.

Useful for exercising the pipeline end to end without the curated dataset:

    python scripts/make_synthetic_raw.py --out /tmp/raw --seed 7
    mpoxscreen --workspace /tmp/ws --seed 7 run all --intake /tmp/raw/intake.tsv
"""

import argparse
from pathlib import Path

from mpoxscreen.synthetic import make_raw_corpus


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--patients-per-class", type=int, default=5)
    parser.add_argument("--max-images-per-patient", type=int, default=3)
    args = parser.parse_args()
    sheet = make_raw_corpus(
        args.out,
        seed=args.seed,
        patients_per_class=args.patients_per_class,
        max_images_per_patient=args.max_images_per_patient,
    )
    print(f"intake sheet: {sheet}")


if __name__ == "__main__":
    main()
