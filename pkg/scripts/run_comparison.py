"""All eight methods x 5 seeds on synthetic faces; writes results/comparison.{json,md}.

    python scripts/run_comparison.py [--seeds 5] [--jitter 0.4]
"""

import argparse
import json
from pathlib import Path

from facemixup.experiment import run_comparison, summary_table
from facemixup.trainer import METHODS


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--jitter", type=float, default=0.4)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--out", type=Path, default=Path("results"))
    args = ap.parse_args()

    res = run_comparison(METHODS, args.seeds, jitter=args.jitter, epochs=args.epochs)
    table = summary_table(res)
    print(table)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "comparison.json").write_text(json.dumps(res, indent=2) + "\n")
    (args.out / "comparison.md").write_text(table + "\n")


if __name__ == "__main__":
    main()
