"""Command-line driver: ``rsnn <subcommand> ...`` (also ``python -m rsnn``)."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from ..errors import RSNNError
from ..hierarchy import (LEVELS, Taxonomy, build_taxonomy, canonical_level,
                         default_level_config, read_level_config, train_level,
                         write_level_config)
from ..imaging import BANDS
from ..plasticity import FEATURE_KINDS, extract_features
from ..storage import (available_levels, load_module, read_meta, save_module, write_meta,
                       write_trace)
from .corpus import load_images, read_manifest, split, write_manifest
from .evaluate import band_comparison, evaluate, occlusion_sweep
from .synth import write_corpus


def _levels(text: str):
    if text == "all":
        return list(LEVELS)
    return [canonical_level(t) for t in text.split(",") if t]


def cmd_synth(args):
    manifest = write_corpus(args.out, per_class=args.per_class, seed=args.seed,
                            side=args.side, task=args.task)
    out = Path(args.out)
    samples = read_manifest(manifest)
    build_taxonomy([s.labels for s in samples]).write(out / "taxonomy.tsv")
    cfg_dir = out / "configs"
    cfg_dir.mkdir(exist_ok=True)
    for level in LEVELS:
        write_level_config(default_level_config("synthetic", level), cfg_dir / f"{level}.cfg")
    print(f"wrote {len(samples)} images, {manifest}, {out / 'taxonomy.tsv'} and {cfg_dir}/")


def cmd_split(args):
    samples = read_manifest(args.manifest)
    train, test = split(samples, args.seed)
    out = Path(args.out)
    write_manifest(train, out / "train.tsv")
    write_manifest(test, out / "test.tsv")
    print(f"train {len(train)} / test {len(test)} -> {out}")


def cmd_train(args):
    level = canonical_level(args.level)
    cfg = read_level_config(args.config)
    overrides = {k: v for k, v in (("rule", args.rule), ("seed", args.seed),
                                   ("epochs", args.epochs)) if v is not None}
    if overrides:
        cfg = cfg.replace(**overrides)
    taxonomy = Taxonomy.read(args.taxonomy)
    samples = read_manifest(args.train)
    images = load_images(samples, cfg.image_size)
    state = train_level(level, taxonomy, list(zip(images, [s.label(level) for s in samples])), cfg)
    out = Path(args.out)
    save_module(state, out)
    meta = read_meta(out / f"{level}.meta")
    meta["train_manifest"] = Path(args.train).resolve().as_posix()
    write_meta(out / f"{level}.meta", meta)
    taxonomy.write(out / "taxonomy.tsv")
    write_trace(state, out / f"{level}_trace.tsv")
    last = state.trace[-len(samples):]
    acc = sum(r.decided == r.true_class for r in last) / len(last)
    print(f"{level}: {len(state.trace)} trials, final-epoch training accuracy {acc:.4f} -> {out}")


def cmd_eval(args):
    state = load_module(args.model, args.level)
    report = evaluate(state, read_manifest(args.test))
    report.write(args.report)
    sys.stdout.write(report.summary())


def cmd_sweep(args):
    levels = _levels(args.level) if args.level else available_levels(args.model)
    samples = read_manifest(args.test)
    counts = [int(k) for k in args.blobs.split(",")]
    for level in levels:
        state = load_module(args.model, level)
        image_dir = Path(args.report) / "occluded" / level if args.save_images else None
        result = occlusion_sweep(state, samples, counts, args.radius, args.sigma, args.seeds,
                                 image_dir=image_dir)
        result.write(args.report)
        for k, m, s in result.rows():
            print(f"{level} blobs={k} mean={m:.4f} std={s:.4f}")


def cmd_bands(args):
    dataset = Path(args.dataset)
    manifest = dataset / "manifest.tsv" if dataset.is_dir() else dataset
    samples = read_manifest(manifest)
    configs = None
    if args.configs:
        configs = {lvl: read_level_config(Path(args.configs) / f"{lvl}.cfg") for lvl in LEVELS
                   if (Path(args.configs) / f"{lvl}.cfg").exists()}
    bands = [b.strip().lower() for b in args.bands.split(",")]
    table = band_comparison(samples, _levels(args.levels), bands, args.runs, configs)
    table.write(args.report)
    sys.stdout.write((Path(args.report) / "bands.txt").read_text())


def cmd_features(args):
    levels = _levels(args.level) if args.level else available_levels(args.model)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header_done = False
        for level in levels:
            state = load_module(args.model, level)
            source = args.manifest or read_meta(Path(args.model) / f"{level}.meta").get("train_manifest")
            if not source:
                raise RSNNError(f"no manifest given and none recorded for the {level} module")
            samples = read_manifest(source)
            n = state.config.n_lattices
            if not header_done:
                writer.writerow(["level", "path", "label"] + [f"f{i}" for i in range(n)])
                header_done = True
            for sample, img in zip(samples, load_images(samples, state.config.image_size)):
                _, activity = state.run(img, full=True)
                vec = extract_features(activity, args.kind)
                writer.writerow([level, sample.path.as_posix(), sample.label(level)]
                                + [repr(float(v)) for v in vec])
    print(f"wrote {args.kind} features -> {out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rsnn", description="Reward-modulated spiking network "
                                "for hierarchical object categorization.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate the synthetic corpus and its manifest")
    s.add_argument("--out", required=True)
    s.add_argument("--per-class", type=int, default=20, help="images per leaf category")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--side", type=int, default=32)
    s.add_argument("--task", choices=("taxonomy", "bars"), default="taxonomy")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("split", help="per-category 50/50 train/test split")
    s.add_argument("--manifest", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("train", help="train one level module")
    s.add_argument("--level", required=True, choices=LEVELS)
    s.add_argument("--config", required=True)
    s.add_argument("--train", required=True)
    s.add_argument("--taxonomy", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--rule", choices=("rstdp", "stdp"))
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="score a trained module on a test manifest")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--level", required=True, choices=LEVELS)
    s.add_argument("--report", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="accuracy under soft circular occlusion")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--blobs", default="0,2,4,8")
    s.add_argument("--radius", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--report", required=True)
    s.add_argument("--level", help="comma-separated levels (default: all in the bundle)")
    s.add_argument("--save-images", action="store_true")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("bands", help="level x frequency-band accuracy table")
    s.add_argument("--dataset", required=True, help="corpus directory or manifest")
    s.add_argument("--levels", default="all")
    s.add_argument("--bands", default=",".join(BANDS))
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--report", required=True)
    s.add_argument("--configs", help="directory of <level>.cfg files (default: built-in)")
    s.set_defaults(func=cmd_bands)

    s = sub.add_parser("features", help="export S2 feature vectors as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--kind", required=True,
                   choices=sorted(set(FEATURE_KINDS) | {"first-spike", "count", "potential"}))
    s.add_argument("--out", required=True)
    s.add_argument("--manifest", help="images to featurize (default: the training manifest)")
    s.add_argument("--level", help="comma-separated levels (default: all in the bundle)")
    s.set_defaults(func=cmd_features)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except RSNNError as exc:
        print(f"rsnn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
