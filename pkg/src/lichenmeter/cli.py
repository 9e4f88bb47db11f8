"""Command-line entry points: synth, rectify, split, annotate, train,
classify, measure, report, eval."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .features import FeatureConfig
from .imaging import TARGET_HSV_BOUNDS, HsvBounds, load_image, load_mask, save_png
from .learners import load_model
from .modelselect import SweepConfig
from .pipeline import (
    Manifest,
    classify_all,
    eval_dataset,
    import_corpus,
    measure_all,
    rectify_dataset,
    report_dataset,
    split_dataset,
    train_dataset,
)
from .rectify import TargetLayout, rectify_photo
from .regions import filter_small, measure_mask, records_to_csv
from .slic import SlicParams

logger = logging.getLogger("lichenmeter")


def _layout(args) -> TargetLayout:
    return TargetLayout(width_mm=args.width_mm, height_mm=args.height_mm,
                        px_per_mm=args.px_per_mm)


def cmd_synth(args) -> int:
    from .synthcorpus import write_corpus

    overrides = {}
    if args.blobs is not None:
        overrides["blob_count"] = args.blobs
    if args.size is not None:
        w, h = (int(v) for v in args.size.split("x"))
        overrides["width"], overrides["height"] = w, h
    write_corpus(
        args.out,
        count=args.count,
        seed=args.seed,
        difficulty=args.difficulty,
        include_targets=args.targets,
        include_mark=args.mark,
        warp=args.warp,
        **overrides,
    )
    print(f"wrote {args.count} scenes to {args.out}")
    if args.as_dataset:
        ds = Path(args.as_dataset)
        import_corpus(args.out, ds, truth_as_manual=True)
        print(f"dataset initialized at {ds} (truth masks as manual)")
    return 0


def cmd_rectify(args) -> int:
    bounds = HsvBounds.parse(args.hsv) if args.hsv else TARGET_HSV_BOUNDS
    layout = _layout(args)
    if args.data:
        manifest = Manifest.load(args.data)
        failures = rectify_dataset(manifest, layout, bounds)
        for image_id, err in failures:
            logger.error("%s: %s", image_id, err)
        return 1 if failures else 0
    in_dir = Path(args.inp)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for p in sorted(in_dir.iterdir()):
        if p.suffix.lower() not in (".png", ".jpg", ".jpeg"):
            continue
        try:
            rect, quad, _ = rectify_photo(load_image(p), layout, bounds)
            save_png(rect, out_dir / f"{p.stem}.png")
            print(f"{p.name}: ok (targets at {quad.corners.round(1).tolist()})")
        except Exception as e:
            logger.error("%s: %s", p.name, e)
            failures += 1
    return 1 if failures else 0


def cmd_split(args) -> int:
    manifest = Manifest.load(args.data)
    split_dataset(manifest, args.train, args.test, args.seed)
    print(f"split: {args.train} train, {args.test} test, "
          f"{len(manifest.images) - args.train - args.test} unlabeled")
    return 0


def cmd_annotate(args) -> int:
    from .service import serve

    serve(args.data, host=args.host, port=args.port, seed=args.seed,
          ui_dir=args.ui_dir)
    return 0


def cmd_train(args) -> int:
    manifest = Manifest.load(args.data)
    if args.train is not None and args.test is not None:
        split_dataset(manifest, args.train, args.test, args.seed)
    cfg = SweepConfig(
        cv=args.cv,
        seed=args.seed,
        workers=args.workers,
        feature_config=FeatureConfig(bins=args.bins),
    )
    if args.slic:
        n, c, s = args.slic.split(",")
        cfg.slic_grid = [SlicParams(int(n), float(c), float(s))]
    report, best = train_dataset(manifest, cfg)
    ok = [e for e in report.entries if e.status == "ok"]
    print(report.to_csv())
    print(f"{len(ok)}/{len(report.entries)} models trained; "
          f"best: {best.label()} (artifacts under {args.data}/models)")
    return 0


def cmd_classify(args) -> int:
    manifest = Manifest.load(args.data)
    model_path = Path(args.model) if args.model else Path(args.data) / "models/best.json"
    model = load_model(model_path)
    done = classify_all(manifest, model, split=args.split,
                        model_name=model_path.stem)
    if args.dump_superpixels:
        from .imaging import save_labels_png
        from .slic import slic as run_slic

        dump = Path(args.dump_superpixels)
        dump.mkdir(parents=True, exist_ok=True)
        for image_id in done:
            spx = run_slic(manifest.load_rectified(image_id), model.slic_params)
            save_labels_png(spx.labels, dump / f"{image_id}_superpixels.png")
    print(f"classified {len(done)} images")
    return 0


def cmd_measure(args) -> int:
    if args.mask:
        mask = load_mask(args.mask)
        records, stats = measure_mask(mask, args.mm_per_px)
        if args.min_area_mm2 is not None:
            records, stats = filter_small(records, stats,
                                          min_area_mm2=args.min_area_mm2)
        text = records_to_csv(records, stats)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
        return 0
    manifest = Manifest.load(args.data)
    results = measure_all(manifest, source=args.source, mm_per_px=args.mm_per_px,
                          min_area_mm2=args.min_area_mm2)
    print(f"measured {len(results)} masks (reports/thalli/)")
    report_dataset(manifest, results)
    return 0


def cmd_report(args) -> int:
    manifest = Manifest.load(args.data)
    results = measure_all(manifest, source=args.source, mm_per_px=args.mm_per_px)
    summary = report_dataset(manifest, results)
    print(json.dumps(summary["totals"], indent=1, sort_keys=True))
    return 0


def cmd_eval(args) -> int:
    manifest = Manifest.load(args.data)
    scores = eval_dataset(manifest, split=args.split)
    for image_id, s in sorted(scores.items()):
        print(f"{image_id}: mcc={s['mcc']:.4f} precision={s['precision']:.4f}")
    if scores:
        import numpy as np

        print(f"mean mcc={np.mean([s['mcc'] for s in scores.values()]):.4f} "
              f"mean precision="
              f"{np.mean([s['precision'] for s in scores.values()]):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lichenmeter")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--difficulty", choices=("easy", "medium", "hard"),
                   default="medium")
    p.add_argument("--targets", action="store_true")
    p.add_argument("--mark", action="store_true")
    p.add_argument("--warp", action="store_true")
    p.add_argument("--blobs", type=int)
    p.add_argument("--size", help="WxH for plain scenes, e.g. 480x360")
    p.add_argument("--as-dataset", help="also materialize a dataset at this path")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("rectify", help="detect targets and correct perspective")
    p.add_argument("--in", dest="inp")
    p.add_argument("--out")
    p.add_argument("--data", help="operate on a dataset instead of directories")
    p.add_argument("--width-mm", type=float, default=272.0)
    p.add_argument("--height-mm", type=float, default=185.0)
    p.add_argument("--px-per-mm", type=float, default=10.0)
    p.add_argument("--hsv", help="H1,H2,S1,S2,V1,V2 target threshold override")
    p.set_defaults(fn=cmd_rectify)

    p = sub.add_parser("split", help="assign train/test/unlabeled")
    p.add_argument("--data", required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--test", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_split)

    p = sub.add_parser("annotate", help="start the annotation service")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8642)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ui-dir", help="override the UI bundle directory")
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("train", help="run the 24-model sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--train", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--cv", action="store_true",
                   help="5-fold cross-validated hyperparameter search")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--bins", type=int, default=32)
    p.add_argument("--slic", help="single SLIC config n,c,s instead of the grid")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("classify", help="segment images with a trained model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", help="model JSON (default: dataset best)")
    p.add_argument("--split", default="unlabeled",
                   choices=("unlabeled", "train", "test"))
    p.add_argument("--dump-superpixels", help="write 16-bit label PNGs here")
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("measure", help="per-thallus measurements")
    p.add_argument("--mask", help="single mask PNG")
    p.add_argument("--data", help="or a dataset root")
    p.add_argument("--source", default="auto", choices=("auto", "manual"))
    p.add_argument("--mm-per-px", type=float)
    p.add_argument("--min-area-mm2", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("report", help="aggregate lichenometry report")
    p.add_argument("--data", required=True)
    p.add_argument("--source", default="auto", choices=("auto", "manual"))
    p.add_argument("--mm-per-px", type=float)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("eval", help="score auto masks against manual masks")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="test",
                   choices=("test", "train", "unlabeled"))
    p.set_defaults(fn=cmd_eval)

    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.cmd == "measure" and not (args.mask or args.data):
        print("measure: need --mask or --data", file=sys.stderr)
        return 2
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
