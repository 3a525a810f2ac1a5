"""Pick the synthetic-face jitter for the directional experiment.

Runs vanilla, facemixup and facemixup_rs over a jitter grid (5 seeds each,
600 train / 300 test, 3 classes) and writes the results to
``scripts/calibration.json``.  The chosen jitter is the one whose vanilla
mean accuracy lands in [0.75, 0.90].

    python scripts/calibrate_jitter.py --grid 0.2,0.3,0.4,0.5
"""

import argparse
import json
from pathlib import Path

from facemixup.experiment import run_comparison

TARGET = (0.75, 0.90)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", default="0.2,0.3,0.4,0.5")
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--out", type=Path, default=Path(__file__).with_name("calibration.json"))
    args = ap.parse_args()

    rows = []
    for jitter in (float(v) for v in args.grid.split(",")):
        res = run_comparison(("vanilla", "facemixup", "facemixup_rs"), args.seeds, jitter=jitter, epochs=args.epochs)
        means = {m: r["mean"] for m, r in res["methods"].items()}
        rows.append({"jitter": jitter, "means": means, "final": {m: r["final"] for m, r in res["methods"].items()}})
        print(f"jitter={jitter:.2f} " + " ".join(f"{m}={v:.4f}" for m, v in means.items()), flush=True)

    in_range = [r for r in rows if TARGET[0] <= r["means"]["vanilla"] <= TARGET[1]]
    chosen = min(in_range, key=lambda r: abs(r["means"]["vanilla"] - sum(TARGET) / 2))["jitter"] if in_range else None
    args.out.write_text(json.dumps({"target_vanilla": TARGET, "chosen_jitter": chosen, "grid": rows}, indent=2) + "\n")
    print(f"chosen jitter: {chosen}")


if __name__ == "__main__":
    main()
