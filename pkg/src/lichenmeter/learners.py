"""Trained-model container binding a classifier to the exact superpixel and
feature configuration its training table used, plus JSON (de)serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidTrainingSet
from .features import FeatureConfig, LabeledTable
from .forest import ForestModel, ForestParams, Tree, train_forest_arrays
from .slic import SlicParams
from .svm import SvmModel, SvmParams, train_svm_arrays

FORMAT = "lichenmeter-model"
VERSION = 1


@dataclass
class TrainedModel:
    family: str  # "svm" | "forest"
    payload: SvmModel | ForestModel
    slic_params: SlicParams
    feature_config: FeatureConfig
    threshold: float

    @property
    def n_features(self) -> int:
        return self.payload.n_features

    def label(self) -> str:
        return f"{self.payload.params.label()}_{self.slic_params.key()}"

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
        if rows.shape[1] != self.n_features:
            raise ValueError(
                f"feature dim {rows.shape[1]} != model dim {self.n_features}"
            )
        return self.payload.predict(rows)


def _check_table(table: LabeledTable):
    if len(np.unique(table.labels)) < 2:
        raise InvalidTrainingSet("training table contains a single class")


def train_svm(table: LabeledTable, params: SvmParams = SvmParams()) -> TrainedModel:
    _check_table(table)
    model = train_svm_arrays(table.features, table.labels, params)
    return TrainedModel("svm", model, table.slic_params, table.feature_config,
                        table.threshold)


def train_forest(
    table: LabeledTable, params: ForestParams = ForestParams()
) -> TrainedModel:
    _check_table(table)
    model = train_forest_arrays(table.features, table.labels, params)
    return TrainedModel("forest", model, table.slic_params, table.feature_config,
                        table.threshold)


def predict(model: TrainedModel, rows: np.ndarray) -> np.ndarray:
    return model.predict(rows)


def _common_meta(model: TrainedModel) -> dict:
    sp = model.slic_params
    fc = model.feature_config
    return {
        "format": FORMAT,
        "version": VERSION,
        "family": model.family,
        "slic_params": {
            "n_segments": sp.n_segments,
            "compactness": sp.compactness,
            "sigma": sp.sigma,
        },
        "feature_config": {
            "bins": fc.bins,
            "joint": fc.joint,
            "joint_bins": fc.joint_bins,
        },
        "threshold": model.threshold,
    }


def save_model(model: TrainedModel, path: str | Path) -> None:
    doc = _common_meta(model)
    p = model.payload
    if model.family == "svm":
        doc["svm"] = {
            "params": {
                "c": p.params.c,
                "kernel": p.params.kernel,
                "degree": p.params.degree,
                "gamma": p.params.gamma,
                "max_iter": p.params.max_iter,
                "tol": p.params.tol,
            },
            "gamma_value": p.gamma_value,
            "support_vectors": p.support_vectors.tolist(),
            "dual_coef": p.dual_coef.tolist(),
            "intercept": p.intercept,
            "n_iter": p.n_iter,
            "converged": p.converged,
            "kkt_violation": p.kkt_violation,
            "dual_objective": p.dual_objective,
            "n_features": p.n_features,
        }
    else:
        doc["forest"] = {
            "params": {
                "n_estimators": p.params.n_estimators,
                "criterion": p.params.criterion,
                "seed": p.params.seed,
            },
            "n_features": p.n_features,
            "oob_score": p.oob_score,
            "trees": [
                {
                    "feature": t.feature.tolist(),
                    "threshold": t.threshold.tolist(),
                    "left": t.left.tolist(),
                    "right": t.right.tolist(),
                    "value": t.value.tolist(),
                }
                for t in p.trees
            ],
        }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> TrainedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported model version {doc.get('version')}")
    slic_params = SlicParams(**doc["slic_params"])
    feature_config = FeatureConfig(**doc["feature_config"])
    family = doc["family"]
    if family == "svm":
        s = doc["svm"]
        sv = np.asarray(s["support_vectors"], dtype=np.float64).reshape(
            -1, s["n_features"]
        )
        payload = SvmModel(
            params=SvmParams(**s["params"]),
            gamma_value=s["gamma_value"],
            support_vectors=sv,
            dual_coef=np.asarray(s["dual_coef"], dtype=np.float64),
            intercept=s["intercept"],
            n_iter=s["n_iter"],
            converged=s["converged"],
            kkt_violation=s["kkt_violation"],
            dual_objective=s["dual_objective"],
            n_features=s["n_features"],
        )
    elif family == "forest":
        f = doc["forest"]
        payload = ForestModel(
            params=ForestParams(**f["params"]),
            trees=[
                Tree(
                    feature=np.asarray(t["feature"], dtype=np.int32),
                    threshold=np.asarray(t["threshold"], dtype=np.float64),
                    left=np.asarray(t["left"], dtype=np.int32),
                    right=np.asarray(t["right"], dtype=np.int32),
                    value=np.asarray(t["value"], dtype=np.uint8),
                )
                for t in f["trees"]
            ],
            n_features=f["n_features"],
            oob_score=f.get("oob_score"),
        )
    else:
        raise ValueError(f"{path}: unknown model family {family!r}")
    model = TrainedModel(family, payload, slic_params, feature_config,
                         doc["threshold"])
    if feature_config.dim != payload.n_features:
        raise ValueError(
            f"{path}: feature config dim {feature_config.dim} does not match "
            f"stored model dim {payload.n_features}"
        )
    return model
