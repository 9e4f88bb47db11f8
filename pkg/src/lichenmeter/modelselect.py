"""Evaluation metrics, 5-fold cross-validated hyperparameter search per
superpixel configuration, the 24-model sweep, and best-model selection."""

from __future__ import annotations

import io
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .errors import InvalidTrainingSet
from .features import FeatureConfig, LabeledTable, build_table, extract_features
from .forest import FOREST_CRITERIA, FOREST_N_ESTIMATORS, ForestParams
from .imaging import Raster, check_mask
from .learners import TrainedModel, train_forest, train_svm
from .slic import SLIC_GRID, SlicParams, slic
from .svm import (
    SVM_C_GRID,
    SVM_DEGREES,
    SVM_GAMMAS,
    SVM_KERNELS,
    SVM_MAX_ITERS,
    SvmParams,
)

logger = logging.getLogger(__name__)

# published defaults used when cross-validation is skipped
DEFAULT_SVM = SvmParams(c=1.0, kernel="rbf", gamma="scale", max_iter=-1)
DEFAULT_FOREST = ForestParams(n_estimators=100, criterion="gini")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any denominator factor is 0."""
    num = c.tp * c.tn - c.fp * c.fn
    den2 = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den2 == 0:
        return 0.0
    return num / math.sqrt(den2)


def precision(c: ConfusionCounts) -> float:
    """tp / (tp + fp); 0 (and a log flag) when no positive predictions."""
    if c.tp + c.fp == 0:
        logger.warning("precision undefined (no positive predictions); returning 0")
        return 0.0
    return c.tp / (c.tp + c.fp)


def mask_confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    pred = check_mask(pred)
    truth = check_mask(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"mask shapes differ: {pred.shape} vs {truth.shape}")
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    tn = pred.size - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)


def label_confusion(pred: np.ndarray, truth: np.ndarray) -> ConfusionCounts:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    tp = int((pred & truth).sum())
    fp = int((pred & ~truth).sum())
    fn = int((~pred & truth).sum())
    return ConfusionCounts(tp=tp, fp=fp, tn=len(pred) - tp - fp - fn, fn=fn)


def svm_grid() -> list[SvmParams]:
    """The published SVC grid; degree only varies for the poly kernel."""
    out = []
    for c, kernel in product(SVM_C_GRID, SVM_KERNELS):
        degrees = SVM_DEGREES if kernel == "poly" else (3,)
        for degree, gamma, max_iter in product(degrees, SVM_GAMMAS, SVM_MAX_ITERS):
            out.append(SvmParams(c=c, kernel=kernel, degree=degree, gamma=gamma,
                                 max_iter=max_iter))
    return out


def forest_grid(seed: int = 0) -> list[ForestParams]:
    return [
        ForestParams(n_estimators=n, criterion=crit, seed=seed)
        for n, crit in product(FOREST_N_ESTIMATORS, FOREST_CRITERIA)
    ]


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Seeded stratified fold assignment (0..k-1 per row)."""
    labels = np.asarray(labels)
    folds = np.empty(len(labels), dtype=np.int64)
    rng = np.random.default_rng(seed)
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if len(idx) < k:
            raise InvalidTrainingSet(
                f"class {cls} has {len(idx)} rows; need at least {k} per class"
            )
        rng.shuffle(idx)
        folds[idx] = np.arange(len(idx)) % k
    return folds


def _train_with(table_feats, table_labels, table, params):
    sub = LabeledTable(
        features=table_feats,
        labels=table_labels,
        image_ids=["cv"] * len(table_labels),
        segment_ids=np.arange(len(table_labels)),
        slic_params=table.slic_params,
        feature_config=table.feature_config,
        threshold=table.threshold,
    )
    if isinstance(params, SvmParams):
        return train_svm(sub, params)
    return train_forest(sub, params)


def cross_validate(
    table: LabeledTable,
    family: str,
    grid: list | None = None,
    k: int = 5,
    seed: int = 0,
):
    """Mean validation MCC over stratified folds for each grid combination;
    returns the winner (ties: lower C / fewer trees, then grid order)."""
    if grid is None:
        grid = svm_grid() if family == "svm" else forest_grid(seed)
    folds = stratified_folds(table.labels, k, seed)
    best_params = None
    best_score = -np.inf
    for params in grid:
        scores = []
        for f in range(k):
            val = folds == f
            try:
                model = _train_with(
                    table.features[~val], table.labels[~val], table, params
                )
            except InvalidTrainingSet:
                scores.append(0.0)
                continue
            pred = model.predict(table.features[val])
            scores.append(mcc(label_confusion(pred, table.labels[val])))
        score = float(np.mean(scores))
        if (best_params is None or score > best_score
                or (score == best_score and _simpler(params, best_params))):
            best_params, best_score = params, score
    return best_params, best_score


def _simpler(a, b) -> bool:
    if isinstance(a, SvmParams):
        return a.c < b.c
    return a.n_estimators < b.n_estimators


@dataclass
class SweepEntry:
    family: str
    slic_params: SlicParams
    chosen_params: object | None = None
    mean_mcc: float | None = None
    per_image_mcc: dict = field(default_factory=dict)
    mean_precision: float | None = None
    train_seconds: float | None = None
    status: str = "ok"

    def label(self) -> str:
        return f"{self.family}_{self.slic_params.key()}"


@dataclass
class SweepReport:
    entries: list[SweepEntry]

    def to_csv(self, include_times: bool = False) -> str:
        out = io.StringIO()
        cols = ["family", "n_segments", "compactness", "sigma", "chosen_params",
                "mean_mcc", "mean_precision", "per_image_mcc", "status"]
        if include_times:
            cols.append("train_seconds")
        out.write(",".join(cols) + "\n")
        for e in self.entries:
            sp = e.slic_params
            per = ";".join(
                f"{k}:{v:.9g}" for k, v in sorted(e.per_image_mcc.items())
            )
            row = [
                e.family, sp.n_segments, f"{sp.compactness:g}", f"{sp.sigma:g}",
                getattr(e.chosen_params, "label", lambda: "")(),
                "" if e.mean_mcc is None else f"{e.mean_mcc:.9g}",
                "" if e.mean_precision is None else f"{e.mean_precision:.9g}",
                per, e.status,
            ]
            if include_times:
                row.append(
                    "" if e.train_seconds is None else f"{e.train_seconds:.3f}"
                )
            out.write(",".join(str(v) for v in row) + "\n")
        return out.getvalue()

    def timing_csv(self) -> str:
        out = io.StringIO()
        out.write("family,n_segments,compactness,sigma,train_seconds\n")
        for e in self.entries:
            sp = e.slic_params
            secs = "" if e.train_seconds is None else f"{e.train_seconds:.3f}"
            out.write(f"{e.family},{sp.n_segments},{sp.compactness:g},"
                      f"{sp.sigma:g},{secs}\n")
        return out.getvalue()


@dataclass
class SweepConfig:
    slic_grid: list[SlicParams] = field(default_factory=lambda: list(SLIC_GRID))
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    threshold: float = 0.5
    cv: bool = False
    cv_folds: int = 5
    seed: int = 0
    workers: int = 1
    svm_params: SvmParams = DEFAULT_SVM
    forest_params: ForestParams | None = None
    svm_grid: list | None = None
    forest_grid: list | None = None

    def resolved_forest(self) -> ForestParams:
        if self.forest_params is not None:
            return self.forest_params
        return ForestParams(
            n_estimators=DEFAULT_FOREST.n_estimators,
            criterion=DEFAULT_FOREST.criterion,
            seed=self.seed,
        )


def classify_image(model: TrainedModel, img: Raster) -> np.ndarray:
    """Segment one image with a trained model: SLIC with the bound params,
    features, per-segment prediction, painted mask."""
    spx = slic(img, model.slic_params)
    rows = extract_features(img, spx, model.feature_config)
    seg_class = model.predict(rows)
    return seg_class[spx.labels].astype(bool)


def _evaluate(model: TrainedModel, test_items, spx_cache) -> tuple[dict, float]:
    per_image = {}
    precisions = []
    for image_id, raster, truth in test_items:
        spx = spx_cache.get((image_id, model.slic_params))
        if spx is None:
            spx = slic(raster, model.slic_params)
            spx_cache[(image_id, model.slic_params)] = spx
        rows = extract_features(raster, spx, model.feature_config)
        pred = model.predict(rows)[spx.labels].astype(bool)
        conf = mask_confusion(pred, truth)
        per_image[image_id] = mcc(conf)
        precisions.append(precision(conf))
    return per_image, float(np.mean(precisions)) if precisions else 0.0


def run_sweep(
    train_items: list[tuple[str, Raster, np.ndarray]],
    test_items: list[tuple[str, Raster, np.ndarray]],
    cfg: SweepConfig = SweepConfig(),
) -> tuple[SweepReport, dict[str, TrainedModel]]:
    """Train SVM + forest for every superpixel configuration and score each
    on the test images (mean per-image MCC). Failures are recorded per entry
    and do not abort the sweep."""
    if not train_items or not test_items:
        raise ValueError("train and test sets must be non-empty")
    spx_cache: dict = {}
    jobs = [
        (family, sp) for sp in cfg.slic_grid for family in ("svm", "forest")
    ]

    def run_one(job) -> tuple[SweepEntry, TrainedModel | None]:
        family, sp = job
        entry = SweepEntry(family=family, slic_params=sp)
        try:
            t0 = time.perf_counter()
            table = build_table(train_items, sp, cfg.feature_config,
                                cfg.threshold, spx_cache)
            if cfg.cv:
                grid = cfg.svm_grid if family == "svm" else cfg.forest_grid
                params, _ = cross_validate(table, family, grid, cfg.cv_folds,
                                           cfg.seed)
            else:
                params = cfg.svm_params if family == "svm" else cfg.resolved_forest()
            model = train_svm(table, params) if family == "svm" else train_forest(
                table, params)
            entry.train_seconds = time.perf_counter() - t0
            entry.chosen_params = params
            entry.per_image_mcc, entry.mean_precision = _evaluate(
                model, test_items, spx_cache)
            entry.mean_mcc = float(np.mean(list(entry.per_image_mcc.values())))
            return entry, model
        except Exception as e:  # sweep keeps going; entry records the failure
            logger.warning("sweep entry %s failed: %s", entry.label(), e)
            entry.status = f"failed: {e}"
            return entry, None

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run_one, jobs))
    else:
        results = [run_one(j) for j in jobs]

    entries = [entry for entry, _ in results]
    models = {
        entry.label(): model for entry, model in results if model is not None
    }
    return SweepReport(entries), models


def select_best(report: SweepReport) -> SweepEntry:
    """Highest mean test MCC; ties prefer fewer superpixels, then SVM."""
    ok = [e for e in report.entries if e.status == "ok" and e.mean_mcc is not None]
    if not ok:
        raise ValueError("sweep produced no usable entries")
    return min(
        ok,
        key=lambda e: (
            -e.mean_mcc,
            e.slic_params.n_segments,
            0 if e.family == "svm" else 1,
        ),
    )
