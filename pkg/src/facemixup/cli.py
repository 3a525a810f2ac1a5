"""Command-line entry point: ``facemixup {synth,generate,count,train,eval,compare}``.

Exit codes: 0 success, 1 runtime error, 2 usage error.  Each command that
writes into an output directory also writes ``run.json`` echoing its fully
resolved arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from facemixup import __version__
from facemixup.baselines import BASELINE_METHODS, generate_baseline_dataset
from facemixup.dataset import Manifest, load_manifest, read_jsonl
from facemixup.errors import FaceMixupError
from facemixup.landmarks import DEFAULT_PAD_FRAC, load_image
from facemixup.mixer import (
    N_SUBSETS,
    PAPER_SUBSET_FACTOR,
    UNIFORM_GAMMA,
    MixedFaceRecord,
    count_possible_mixes,
    generate_dataset,
)
from facemixup.synthfaces import CLASS_PARAMS, DEFAULT_CLASSES, DEFAULT_NOISE, generate_synth_dataset
from facemixup.trainer import (
    METHODS,
    LabeledFaces,
    MixedFaces,
    TrainConfig,
    evaluate,
    load_model,
    save_model,
    train,
    write_curve_csv,
)

log = logging.getLogger("facemixup")


def _resolve_seed(value):
    if value is not None:
        return value
    env = os.environ.get("FACEMIX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise argparse.ArgumentTypeError(f"FACEMIX_SEED must be an integer, got {env!r}") from None
    return 0


def _write_run(out: Path | None, args) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    record = {"version": __version__}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        record[k] = str(v) if isinstance(v, Path) else v
    (out / "run.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


def _classes(value: str) -> list[str]:
    if value.isdigit():
        n = int(value)
        names = list(DEFAULT_CLASSES) + [c for c in CLASS_PARAMS if c not in DEFAULT_CLASSES]
        if not 2 <= n <= len(names):
            raise argparse.ArgumentTypeError(f"--classes must be between 2 and {len(names)}")
        return names[:n]
    names = [c.strip() for c in value.split(",") if c.strip()]
    bad = [c for c in names if c not in CLASS_PARAMS]
    if bad or len(names) < 2:
        raise argparse.ArgumentTypeError(f"classes must be >= 2 of {sorted(CLASS_PARAMS)}")
    return names


def _gamma_dist(value: str) -> tuple[float, ...]:
    try:
        p = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("gamma distribution must be 6 comma-separated numbers") from None
    if len(p) != 6 or min(p) < 0 or sum(p) <= 0:
        raise argparse.ArgumentTypeError("gamma distribution must be 6 non-negative weights")
    s = sum(p)
    return tuple(v / s for v in p)


def _size_pair(value: str) -> tuple[int, int]:
    try:
        w, h = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected WxH, e.g. 32x32") from None
    return w, h


def _nonneg_int(value: str) -> int:
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {n}")
    return n


# ------------------------------------------------------------------ loaders

def labeled_from_manifest(manifest: Manifest, with_landmarks: bool = False) -> LabeledFaces:
    images = [manifest.load_image(i) for i in range(len(manifest))]
    lms = [manifest.load_landmarks(i) for i in range(len(manifest))] if with_landmarks else None
    return LabeledFaces(images, manifest.labels, lms, [e.path for e in manifest])


def mixed_from_metadata(path: Path, train_set: LabeledFaces) -> MixedFaces:
    """Load a generated mixed set; sources must be entries of ``train_set``."""
    index = {p: i for i, p in enumerate(train_set.ids)}
    recs = [MixedFaceRecord.from_dict(d) for d in read_jsonl(path)]
    try:
        sup = [index[r.plan.supplier_id] for r in recs]
        rec = [index[r.plan.receiver_id] for r in recs]
    except KeyError as e:
        raise FaceMixupError(f"mixed record source {e} is not in the training manifest") from None
    imgs = [load_image(path.parent / r.output_path, id=r.mixed_id) for r in recs]
    return MixedFaces(
        imgs,
        np.array(sup, dtype=np.int64),
        np.array(rec, dtype=np.int64),
        np.array([r.plan.gamma for r in recs], dtype=np.int64),
        np.array([r.plan.supplier_label for r in recs], dtype=np.int64),
        np.array([r.plan.receiver_label for r in recs], dtype=np.int64),
    )


# ------------------------------------------------------------------ commands

def cmd_synth(args) -> int:
    out = args.out
    man = generate_synth_dataset(
        args.n_per_class, args.classes, args.jitter, args.seed, out, args.size, args.noise,
        split=0, manifest_name="manifest.jsonl", threads=args.threads,
    )
    print(man)
    if args.test_per_class:
        test = generate_synth_dataset(
            args.test_per_class, args.classes, args.jitter, args.seed, out, args.size, args.noise,
            split=1, manifest_name="test_manifest.jsonl", threads=args.threads,
        )
        print(test)
    _write_run(out, args)
    return 0


def cmd_generate(args) -> int:
    out = args.out
    if args.method == "facemixup":
        recs = generate_dataset(
            args.manifest, args.landmarks_dir, args.count, args.gamma_dist, args.seed, out,
            args.pad_frac, args.threads,
        )
        dups = sum(r.duplicate for r in recs)
        if dups:
            log.warning("unique plan space exhausted: %d of %d records are flagged duplicates", dups, len(recs))
        n = len(recs)
    else:
        n = len(generate_baseline_dataset(args.manifest, args.method, args.count, args.seed, out))
    print(f"{n} records -> {out / 'metadata.jsonl'}")
    _write_run(out, args)
    return 0


def cmd_count(args) -> int:
    print(count_possible_mixes(args.n, N_SUBSETS))
    if args.paper_compat:
        print(count_possible_mixes(args.n, PAPER_SUBSET_FACTOR))
    _write_run(args.out, args)
    return 0


def _config_from_args(args) -> TrainConfig:
    cfg = TrainConfig.from_json(args.config).to_dict() if args.config else {}
    overrides = {
        "method": args.method, "lr": args.lr, "momentum": args.momentum,
        "weight_decay": args.weight_decay, "batch_size": args.batch_size, "epochs": args.epochs,
        "W": args.W, "downsample": args.downsample, "mixed_ratio": args.mixed_ratio,
        "gamma_dist": args.gamma_dist, "pad_frac": args.pad_frac, "mixup_alpha": args.mixup_alpha,
        "erase_prob": args.erase_prob, "cutout_side": args.cutout_side,
        "swap_weights": args.swap_weights, "allow_small_w": args.allow_small_w,
    }
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    cfg["seed"] = args.seed
    return TrainConfig.from_dict(cfg).validate()


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    train_m = load_manifest(args.train_manifest)
    needs_lms = cfg.method in ("vanilla_mixedfaces", "facemixup", "facemixup_rs") and args.mixed is None
    train_set = labeled_from_manifest(train_m, with_landmarks=needs_lms)
    test_set = labeled_from_manifest(load_manifest(args.test_manifest)) if args.test_manifest else None
    mixed = mixed_from_metadata(args.mixed, train_set) if args.mixed else None
    k = max(train_m.num_classes, max(test_set.labels) + 1 if test_set is not None else 0)
    model, report = train(cfg, train_set, test_set, mixed, num_classes=k, threads=args.threads)
    save_model(model, out / "model.bin", {"config": cfg.to_dict()})
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    write_curve_csv(report, out / "curve.csv")
    print(f"accuracy {report.accuracy:.4f} (best {report.best_accuracy:.4f}) -> {out}")
    _write_run(out, args)
    return 0


def cmd_eval(args) -> int:
    model, meta = load_model(args.model)
    downsample = tuple(meta.get("config", {}).get("downsample", (32, 32)))
    data = labeled_from_manifest(load_manifest(args.manifest))
    report = evaluate(model, data, downsample, threads=args.threads)
    text = json.dumps(report.to_dict(), indent=2)
    print(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "eval.json").write_text(text + "\n")
    _write_run(args.out, args)
    return 0


def cmd_compare(args) -> int:
    from facemixup.experiment import run_comparison, summary_table

    results = run_comparison(
        args.methods, args.seeds, args.n_train_per_class, args.n_test_per_class,
        args.classes, args.jitter, args.noise, args.epochs, args.seed, threads=args.threads,
    )
    table = summary_table(results)
    print(table)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "summary.json").write_text(json.dumps(results, indent=2) + "\n")
        (args.out / "summary.md").write_text(table + "\n")
    _write_run(args.out, args)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (falls back to $FACEMIX_SEED, then 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for generation/featurization")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    p = argparse.ArgumentParser(prog="facemixup", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="render a schematic-face dataset")
    s.add_argument("--n-per-class", type=int, default=200)
    s.add_argument("--classes", type=_classes, default=list(DEFAULT_CLASSES),
                   help="class count or comma-separated names")
    s.add_argument("--jitter", type=float, default=0.2)
    s.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    s.add_argument("--size", type=int, default=128)
    s.add_argument("--test-per-class", type=_nonneg_int, default=0,
                   help="also write test_manifest.jsonl with this many faces per class")
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("generate", parents=[common], help="build a mixed-face or baseline-augmented set")
    g.add_argument("--method", choices=("facemixup",) + BASELINE_METHODS, default="facemixup")
    g.add_argument("--manifest", type=Path, required=True)
    g.add_argument("--landmarks-dir", type=Path, default=None)
    g.add_argument("--count", type=_nonneg_int, required=True)
    g.add_argument("--gamma-dist", type=_gamma_dist, default=UNIFORM_GAMMA)
    g.add_argument("--pad-frac", type=float, default=DEFAULT_PAD_FRAC)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("count", parents=[common], help="number of possible mixed faces for N images")
    c.add_argument("--n", type=_nonneg_int, required=True)
    c.add_argument("--paper-compat", action="store_true", help="also print the 62-subset figure")
    c.add_argument("--out", type=Path, default=None)
    c.set_defaults(func=cmd_count)

    t = sub.add_parser("train", parents=[common], help="train the linear classifier with one method")
    t.add_argument("--method", choices=METHODS, default=None)
    t.add_argument("--config", type=Path, default=None, help="TrainConfig JSON; flags override it")
    t.add_argument("--train-manifest", type=Path, required=True)
    t.add_argument("--test-manifest", type=Path, default=None)
    t.add_argument("--mixed", type=Path, default=None, help="metadata.jsonl from `generate`")
    t.add_argument("--lr", type=float)
    t.add_argument("--momentum", type=float)
    t.add_argument("--weight-decay", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--W", type=float)
    t.add_argument("--downsample", type=_size_pair)
    t.add_argument("--mixed-ratio", type=float)
    t.add_argument("--gamma-dist", type=_gamma_dist)
    t.add_argument("--pad-frac", type=float)
    t.add_argument("--mixup-alpha", type=float, help="Beta(alpha, alpha) lambda; default Uniform(0, 1)")
    t.add_argument("--erase-prob", type=float)
    t.add_argument("--cutout-side", type=int, help="apply Cutout of this side after mixing (0 = off)")
    t.add_argument("--swap-weights", action="store_true", default=None, help="put gamma/W on the receiver label")
    t.add_argument("--allow-small-w", action="store_true", default=None, help="accept gamma < W <= 6")
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="evaluate a saved model on a manifest")
    e.add_argument("--model", type=Path, required=True)
    e.add_argument("--manifest", type=Path, required=True)
    e.add_argument("--out", type=Path, default=None)
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("compare", parents=[common], help="all methods x seeds on synthetic faces")
    m.add_argument("--methods", type=lambda v: v.split(","), default=list(METHODS))
    m.add_argument("--seeds", type=int, default=5)
    m.add_argument("--n-train-per-class", type=int, default=200)
    m.add_argument("--n-test-per-class", type=int, default=100)
    m.add_argument("--classes", type=_classes, default=list(DEFAULT_CLASSES))
    m.add_argument("--jitter", type=float, default=0.4)
    m.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    m.add_argument("--epochs", type=int, default=30)
    m.add_argument("--out", type=Path, default=None)
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.seed = _resolve_seed(args.seed)
    except argparse.ArgumentTypeError as e:
        parser.error(str(e))
    if getattr(args, "methods", None):
        bad = [m for m in args.methods if m not in METHODS]
        if bad:
            parser.error(f"unknown methods: {', '.join(bad)}")
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (FaceMixupError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
