"""Dataset orchestration: manifest, train/test split, batch rectification,
training sweep, classification, measurement, reporting, and the annotation
replay harness used by the HTTP service."""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LichenmeterError
from .grabcut import GrabcutParams, Stroke, apply_strokes, init_trimap, segment
from .imaging import (
    TARGET_HSV_BOUNDS,
    HsvBounds,
    Raster,
    load_image,
    load_mask,
    save_mask,
    save_png,
)
from .learners import TrainedModel, save_model
from .modelselect import (
    SweepConfig,
    SweepReport,
    classify_image,
    mask_confusion,
    mcc,
    precision,
    run_sweep,
    select_best,
)
from .rectify import TargetLayout, rectify_photo
from .regions import filter_small, measure_mask, records_to_csv

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
STAGES = ("raw", "rectified", "annotated", "classified", "measured")
RAW_EXTS = (".png", ".jpg", ".jpeg")


@dataclass
class ImageEntry:
    raw: str | None = None
    rectified: str | None = None
    mask_manual: str | None = None
    mask_auto: str | None = None
    status: str = "raw"
    split: str = "unlabeled"
    scale_mm_per_px: float | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "raw", "rectified", "mask_manual", "mask_auto", "status", "split",
            "scale_mm_per_px")}


@dataclass
class Manifest:
    root: Path
    images: dict[str, ImageEntry] = field(default_factory=dict)
    seed: int | None = None

    def path(self) -> Path:
        return self.root / "manifest.json"

    def save(self) -> None:
        doc = {
            "version": MANIFEST_VERSION,
            "seed": self.seed,
            "images": {k: v.to_dict() for k, v in sorted(self.images.items())},
        }
        self.path().write_text(json.dumps(doc, sort_keys=True, indent=1),
                               encoding="utf-8")

    @classmethod
    def load(cls, root: str | Path) -> "Manifest":
        root = Path(root)
        doc = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
        if doc.get("version") != MANIFEST_VERSION:
            raise LichenmeterError(f"unsupported manifest version in {root}")
        m = cls(root=root, seed=doc.get("seed"))
        for k, v in doc["images"].items():
            m.images[k] = ImageEntry(**v)
        return m

    def ids(self, split: str | None = None) -> list[str]:
        return [
            k for k in sorted(self.images)
            if split is None or self.images[k].split == split
        ]

    def load_rectified(self, image_id: str) -> Raster:
        e = self.images[image_id]
        if e.rectified is None:
            raise LichenmeterError(f"{image_id} has no rectified image")
        img = load_image(self.root / e.rectified)
        if e.scale_mm_per_px:
            img = img.with_scale(e.scale_mm_per_px)
        return img

    def load_manual_mask(self, image_id: str) -> np.ndarray:
        e = self.images[image_id]
        if e.mask_manual is None:
            raise LichenmeterError(f"{image_id} has no manual mask")
        return load_mask(self.root / e.mask_manual)


def _ensure_dirs(root: Path) -> None:
    for sub in ("raw", "rectified", "masks/manual", "masks/auto", "features",
                "models", "reports/thalli", "sessions"):
        (root / sub).mkdir(parents=True, exist_ok=True)


def init_dataset(root: str | Path, seed: int | None = None) -> Manifest:
    """Create the dataset layout, indexing any images already under raw/."""
    root = Path(root)
    _ensure_dirs(root)
    m = Manifest(root=root, seed=seed)
    for p in sorted((root / "raw").iterdir()) if (root / "raw").exists() else []:
        if p.suffix.lower() in RAW_EXTS:
            m.images[p.stem] = ImageEntry(raw=f"raw/{p.name}", status="raw")
    m.save()
    return m


def import_corpus(
    corpus_dir: str | Path,
    root: str | Path,
    truth_as_manual: bool = True,
    as_rectified: bool = True,
) -> Manifest:
    """Turn a synthetic corpus into a dataset. Flat scenes need no perspective
    correction, so they land in rectified/; ground truth can stand in for the
    operator's manual masks."""
    corpus_dir = Path(corpus_dir)
    root = Path(root)
    _ensure_dirs(root)
    corpus = json.loads((corpus_dir / "corpus.json").read_text(encoding="utf-8"))
    m = Manifest(root=root, seed=corpus.get("seed"))
    for sc in corpus["scenes"]:
        sid = sc["id"]
        meta = json.loads((corpus_dir / sc["meta"]).read_text(encoding="utf-8"))
        entry = ImageEntry()
        if as_rectified:
            shutil.copyfile(corpus_dir / sc["image"], root / f"rectified/{sid}.png")
            entry.rectified = f"rectified/{sid}.png"
            entry.status = "rectified"
            if meta.get("px_per_mm"):
                entry.scale_mm_per_px = 1.0 / meta["px_per_mm"]
        else:
            shutil.copyfile(corpus_dir / sc["image"], root / f"raw/{sid}.png")
            entry.raw = f"raw/{sid}.png"
        if truth_as_manual:
            shutil.copyfile(corpus_dir / sc["truth"],
                            root / f"masks/manual/{sid}.png")
            entry.mask_manual = f"masks/manual/{sid}.png"
            entry.status = "annotated"
        m.images[sid] = entry
    m.save()
    return m


def split_dataset(
    manifest: Manifest, n_train: int, n_test: int, seed: int
) -> Manifest:
    """Seeded uniform split without replacement; the rest stay unlabeled."""
    ids = manifest.ids()
    if n_train + n_test > len(ids):
        raise ValueError(
            f"requested {n_train}+{n_test} images but dataset has {len(ids)}"
        )
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(ids), size=n_train + n_test, replace=False)
    train = {ids[i] for i in picked[:n_train]}
    test = {ids[i] for i in picked[n_train:]}
    for k, e in manifest.images.items():
        e.split = "train" if k in train else "test" if k in test else "unlabeled"
    manifest.seed = seed
    manifest.save()
    return manifest


def rectify_dataset(
    manifest: Manifest,
    layout: TargetLayout,
    bounds: HsvBounds = TARGET_HSV_BOUNDS,
) -> list[tuple[str, str]]:
    """Rectify every raw image; returns (image_id, error) for failures."""
    failures = []
    for image_id in manifest.ids():
        e = manifest.images[image_id]
        if e.raw is None or e.rectified is not None:
            continue
        try:
            img = load_image(manifest.root / e.raw)
            rect, _, _ = rectify_photo(img, layout, bounds)
            out = f"rectified/{image_id}.png"
            save_png(rect, manifest.root / out)
            e.rectified = out
            e.scale_mm_per_px = rect.scale
            e.status = "rectified"
        except Exception as exc:
            logger.error("rectification failed for %s: %s", image_id, exc)
            failures.append((image_id, str(exc)))
    manifest.save()
    return failures


def _items(manifest: Manifest, split: str):
    out = []
    for image_id in manifest.ids(split):
        img = manifest.load_rectified(image_id)
        mask = manifest.load_manual_mask(image_id)
        out.append((image_id, img, mask))
    return out


def train_dataset(
    manifest: Manifest, cfg: SweepConfig
) -> tuple[SweepReport, TrainedModel]:
    """Run the 24-model sweep on the train/test split and persist artifacts."""
    train_items = _items(manifest, "train")
    test_items = _items(manifest, "test")
    report, models = run_sweep(train_items, test_items, cfg)
    models_dir = manifest.root / "models"
    for label, model in models.items():
        save_model(model, models_dir / f"{label}.json")
    (models_dir / "sweep_report.csv").write_text(report.to_csv(), encoding="utf-8")
    (models_dir / "sweep_times.csv").write_text(report.timing_csv(),
                                                encoding="utf-8")
    best_entry = select_best(report)
    best = models[best_entry.label()]
    save_model(best, models_dir / "best.json")
    (models_dir / "best_entry.json").write_text(
        json.dumps(
            {
                "label": best_entry.label(),
                "family": best_entry.family,
                "mean_mcc": best_entry.mean_mcc,
                "mean_precision": best_entry.mean_precision,
            },
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    return report, best


def classify_all(
    manifest: Manifest,
    model: TrainedModel,
    split: str = "unlabeled",
    model_name: str = "best",
) -> list[str]:
    """Predict masks for every image in the split; failures logged, run
    continues. Provenance records the exact configuration used."""
    done = []
    for image_id in manifest.ids(split):
        e = manifest.images[image_id]
        if e.rectified is None:
            continue
        try:
            img = manifest.load_rectified(image_id)
            mask = classify_image(model, img)
            out = f"masks/auto/{image_id}.png"
            save_mask(mask, manifest.root / out)
            prov = {
                "model": model_name,
                "family": model.family,
                "slic_params": {
                    "n_segments": model.slic_params.n_segments,
                    "compactness": model.slic_params.compactness,
                    "sigma": model.slic_params.sigma,
                },
                "feature_bins": model.feature_config.bins,
                "threshold": model.threshold,
            }
            (manifest.root / f"masks/auto/{image_id}.provenance.json").write_text(
                json.dumps(prov, sort_keys=True), encoding="utf-8"
            )
            e.mask_auto = out
            e.status = "classified"
            done.append(image_id)
        except Exception as exc:
            logger.error("classification failed for %s: %s", image_id, exc)
    manifest.save()
    return done


def measure_all(
    manifest: Manifest,
    source: str = "auto",
    mm_per_px: float | None = None,
    min_area_mm2: float | None = None,
) -> dict[str, dict]:
    """Measure thalli on classified (or manual) masks; one CSV per image."""
    results = {}
    for image_id in manifest.ids():
        e = manifest.images[image_id]
        rel = e.mask_auto if source == "auto" else e.mask_manual
        if rel is None:
            continue
        mask = load_mask(manifest.root / rel)
        scale = mm_per_px if mm_per_px is not None else e.scale_mm_per_px
        records, stats = measure_mask(mask, scale)
        if min_area_mm2 is not None:
            records, stats = filter_small(records, stats,
                                          min_area_mm2=min_area_mm2)
        csv_text = records_to_csv(records, stats)
        (manifest.root / f"reports/thalli/{image_id}.csv").write_text(
            csv_text, encoding="utf-8"
        )
        results[image_id] = {
            "thallus_count": stats.thallus_count,
            "cover_fraction": stats.cover_fraction,
            "total_area_px": stats.total_area_px,
            "total_area_mm2": stats.total_area_mm2,
            "largest_thalli_mm2": sorted(
                (r.area_mm2 for r in records if r.area_mm2 is not None),
                reverse=True,
            )[:5],
            "largest_thalli_px": sorted((r.area_px for r in records),
                                        reverse=True)[:5],
        }
        if e.status in ("classified", "annotated", "rectified"):
            e.status = "measured"
    manifest.save()
    return results


def report_dataset(manifest: Manifest, per_image: dict[str, dict]) -> dict:
    """Aggregate lichenometry report: per-image stats, corpus totals, and a
    thallus-area histogram."""
    areas_px: list[int] = []
    areas_mm2: list[float] = []
    for image_id in sorted(per_image):
        path = manifest.root / f"reports/thalli/{image_id}.csv"
        for line in path.read_text(encoding="utf-8").splitlines()[1:]:
            if line.startswith("#"):
                continue
            cells = line.split(",")
            areas_px.append(int(cells[1]))
            if len(cells) >= 9 and cells[8]:
                areas_mm2.append(float(cells[8]))
    hist_edges = [0, 10, 25, 50, 100, 250, 500, 1000, 2500, 5000, 10000, 10 ** 9]
    hist = np.histogram(areas_px, bins=hist_edges)[0].tolist() if areas_px else []
    summary = {
        "images": per_image,
        "totals": {
            "images": len(per_image),
            "thalli": int(sum(v["thallus_count"] for v in per_image.values())),
            "total_area_px": int(sum(v["total_area_px"] for v in per_image.values())),
            "total_area_mm2": (
                float(sum(v["total_area_mm2"] for v in per_image.values()))
                if all(v["total_area_mm2"] is not None for v in per_image.values())
                and per_image else None
            ),
            "mean_cover_fraction": (
                float(np.mean([v["cover_fraction"] for v in per_image.values()]))
                if per_image else 0.0
            ),
        },
        "thallus_area_px_histogram": {
            "edges": hist_edges[:-1],
            "counts": hist,
        },
    }
    (manifest.root / "reports/summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=1), encoding="utf-8"
    )
    return summary


def eval_dataset(manifest: Manifest, split: str = "test") -> dict[str, dict]:
    """Compare auto masks against manual masks (MCC, precision)."""
    out = {}
    for image_id in manifest.ids(split):
        e = manifest.images[image_id]
        if e.mask_auto is None or e.mask_manual is None:
            continue
        pred = load_mask(manifest.root / e.mask_auto)
        truth = load_mask(manifest.root / e.mask_manual)
        conf = mask_confusion(pred, truth)
        out[image_id] = {"mcc": mcc(conf), "precision": precision(conf)}
    lines = ["image,mcc,precision"]
    lines += [
        f"{k},{v['mcc']:.9g},{v['precision']:.9g}" for k, v in sorted(out.items())
    ]
    (manifest.root / "reports/eval.csv").write_text("\n".join(lines) + "\n",
                                                    encoding="utf-8")
    return out


# --- annotation sessions (shared by the HTTP service and the replay tests) --


@dataclass
class SessionState:
    image_id: str
    rect: tuple[int, int, int, int]
    stroke_groups: list[list[Stroke]] = field(default_factory=list)
    params: GrabcutParams = field(default_factory=GrabcutParams)

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "rect": list(self.rect),
            "stroke_groups": [
                [
                    {
                        "points": s.points.tolist(),
                        "label": s.label,
                        "brush_radius": s.brush_radius,
                    }
                    for s in group
                ]
                for group in self.stroke_groups
            ],
            "seed": self.params.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionState":
        st = cls(
            image_id=doc["image_id"],
            rect=tuple(doc["rect"]),
            params=GrabcutParams(seed=doc.get("seed", 0)),
        )
        for group in doc["stroke_groups"]:
            st.stroke_groups.append(
                [
                    Stroke(
                        points=np.asarray(s["points"], dtype=np.float64),
                        label=s["label"],
                        brush_radius=s["brush_radius"],
                    )
                    for s in group
                ]
            )
        return st


def replay_session(img: Raster, state: SessionState) -> np.ndarray:
    """Recompute the session mask from scratch: init rectangle plus every
    stroke group as hard constraints, then one deterministic segmentation."""
    trimap = init_trimap(img, state.rect)
    for group in state.stroke_groups:
        trimap = apply_strokes(trimap, group)
    return segment(img, trimap, state.params)
