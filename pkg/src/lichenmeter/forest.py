"""Random forest of fully grown binary decision trees on bootstrap samples.

Per-tree RNG seeds are seed + tree_index, so the ensemble is bit-reproducible.
Splits consider sqrt(d) features drawn per node; prediction is majority vote
with ties going to background (class 0)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidTrainingSet

FOREST_N_ESTIMATORS = (150, 100, 50)
FOREST_CRITERIA = ("gini", "entropy")


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    criterion: str = "gini"
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be at least 1")
        if self.criterion not in FOREST_CRITERIA:
            raise ValueError(f"criterion must be gini or entropy: {self.criterion!r}")

    def label(self) -> str:
        return f"forest_n{self.n_estimators}_{self.criterion}"


def gini_impurity(p1: float) -> float:
    p0 = 1.0 - p1
    return 1.0 - (p0 * p0 + p1 * p1)


def entropy_impurity(p1: float) -> float:
    out = 0.0
    for p in (1.0 - p1, p1):
        if p > 0:
            out -= p * np.log2(p)
    return out


def _impurity_curve(n1_left, n_left, n1, n, criterion):
    """Weighted child impurity for every candidate prefix split, vectorized."""
    n0_left = n_left - n1_left
    n_right = n - n_left
    n1_right = n1 - n1_left
    n0_right = n_right - n1_right
    if criterion == "gini":
        with np.errstate(invalid="ignore", divide="ignore"):
            gl = 1.0 - ((n0_left / n_left) ** 2 + (n1_left / n_left) ** 2)
            gr = 1.0 - ((n0_right / n_right) ** 2 + (n1_right / n_right) ** 2)
    else:
        def ent(k, tot):
            with np.errstate(invalid="ignore", divide="ignore"):
                p = k / tot
                t = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
            return t

        gl = ent(n0_left, n_left) + ent(n1_left, n_left)
        gr = ent(n0_right, n_right) + ent(n1_right, n_right)
    return (n_left * gl + n_right * gr) / n


@dataclass
class _TreeBuilder:
    x: np.ndarray
    y: np.ndarray
    criterion: str
    rng: np.random.Generator
    mtry: int
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def _leaf(self, idx) -> int:
        n1 = int(self.y[idx].sum())
        n0 = len(idx) - n1
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(1 if n1 > n0 else 0)  # tie -> background
        return node

    def build(self, idx: np.ndarray) -> int:
        y = self.y[idx]
        n = len(idx)
        n1 = int(y.sum())
        if n < 2 or n1 == 0 or n1 == n:
            return self._leaf(idx)
        parent_imp = (
            gini_impurity(n1 / n) if self.criterion == "gini"
            else entropy_impurity(n1 / n)
        )
        feats = self.rng.permutation(self.x.shape[1])[: self.mtry]
        best_gain = 0.0
        best_feat = -1
        best_thr = 0.0
        for f in feats:
            col = self.x[idx, f]
            order = np.argsort(col, kind="stable")
            sorted_col = col[order]
            distinct = np.flatnonzero(sorted_col[1:] > sorted_col[:-1])
            if len(distinct) == 0:
                continue
            # candidate split after position k: left = first k+1 sorted rows
            cum1 = np.cumsum(y[order])[distinct]
            n_left = (distinct + 1).astype(np.float64)
            child = _impurity_curve(cum1.astype(np.float64), n_left,
                                    float(n1), float(n), self.criterion)
            gains = parent_imp - child
            k = int(np.argmax(gains))
            if gains[k] > best_gain + 1e-12:
                best_gain = float(gains[k])
                best_feat = int(f)
                best_thr = float(
                    (sorted_col[distinct[k]] + sorted_col[distinct[k] + 1]) / 2.0
                )
        if best_feat < 0:
            return self._leaf(idx)
        node = len(self.feature)
        self.feature.append(best_feat)
        self.threshold.append(best_thr)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0)
        go_left = self.x[idx, best_feat] <= best_thr
        self.left[node] = self.build(idx[go_left])
        self.right[node] = self.build(idx[~go_left])
        return node


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(len(x), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


@dataclass
class ForestModel:
    params: ForestParams
    trees: list[Tree]
    n_features: int
    oob_score: float | None = None

    def votes(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(
                f"feature dim {x.shape[1]} != model dim {self.n_features}"
            )
        out = np.zeros(len(x), dtype=np.int64)
        for t in self.trees:
            out += t.predict(x)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        # strict majority; ties go to background
        return (2 * self.votes(x) > len(self.trees)).astype(np.uint8)


def train_forest_arrays(
    x: np.ndarray, labels: np.ndarray, params: ForestParams = ForestParams()
) -> ForestModel:
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.asarray(labels).astype(np.uint8)
    if x.ndim != 2 or len(x) != len(y):
        raise ValueError("x must be (n, d) with matching labels")
    if not np.isfinite(x).all():
        raise InvalidTrainingSet("features contain non-finite values")
    if len(np.unique(y)) < 2:
        raise InvalidTrainingSet("training set contains a single class")
    n, d = x.shape
    mtry = max(1, int(np.sqrt(d)))
    trees = []
    oob_votes = np.zeros(n, dtype=np.int64)
    oob_counts = np.zeros(n, dtype=np.int64)
    for t in range(params.n_estimators):
        rng = np.random.default_rng(params.seed + t)
        boot = rng.integers(0, n, size=n)
        builder = _TreeBuilder(x=x, y=y, criterion=params.criterion,
                               rng=rng, mtry=mtry)
        builder.build(boot)
        tree = Tree(
            feature=np.array(builder.feature, dtype=np.int32),
            threshold=np.array(builder.threshold, dtype=np.float64),
            left=np.array(builder.left, dtype=np.int32),
            right=np.array(builder.right, dtype=np.int32),
            value=np.array(builder.value, dtype=np.uint8),
        )
        trees.append(tree)
        oob = np.ones(n, dtype=bool)
        oob[boot] = False
        if oob.any():
            oob_votes[oob] += tree.predict(x[oob])
            oob_counts[oob] += 1
    model = ForestModel(params=params, trees=trees, n_features=d)
    seen = oob_counts > 0
    if seen.any():
        pred = (2 * oob_votes[seen] > oob_counts[seen]).astype(np.uint8)
        model.oob_score = float((pred == y[seen]).mean())
    return model
