"""C-SVM trained by sequential minimal optimization on the dual problem.

Working-pair selection is the maximal-violating-pair rule with a second-order
choice of the partner, deterministic first-index tie-breaking. Stops when the
KKT violation (m - M) drops below tol or after max_iter pair updates
(max_iter = -1 means run to convergence)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import InvalidTrainingSet

TAU = 1e-12
_UNLIMITED = 1 << 31

SVM_C_GRID = (1.0, 10.0, 100.0)
SVM_KERNELS = ("rbf", "linear", "poly")
SVM_DEGREES = (2, 3, 4, 5)
SVM_GAMMAS = ("scale", "auto")
SVM_MAX_ITERS = (500, 1000, -1)


@dataclass(frozen=True)
class SvmParams:
    c: float = 1.0
    kernel: str = "rbf"
    degree: int = 3
    gamma: str = "scale"
    max_iter: int = -1
    tol: float = 1e-3

    def __post_init__(self):
        if self.kernel not in SVM_KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.gamma not in SVM_GAMMAS:
            raise ValueError(f"gamma must be 'scale' or 'auto', got {self.gamma!r}")
        if self.c <= 0:
            raise ValueError("C must be positive")

    def label(self) -> str:
        deg = f"_d{self.degree}" if self.kernel == "poly" else ""
        return f"svm_C{self.c:g}_{self.kernel}{deg}_{self.gamma}_it{self.max_iter}"


def resolve_gamma(x: np.ndarray, mode: str) -> float:
    d = x.shape[1]
    if mode == "auto":
        return 1.0 / d
    var = float(x.var())
    return 1.0 / (d * var) if var > 0 else 1.0 / d


def kernel_matrix(
    a: np.ndarray, b: np.ndarray, kind: str, gamma: float, degree: int
) -> np.ndarray:
    if kind == "linear":
        return a @ b.T
    if kind == "poly":
        return (gamma * (a @ b.T) + 1.0) ** degree
    if kind == "rbf":
        d2 = (
            (a * a).sum(axis=1)[:, None]
            - 2.0 * (a @ b.T)
            + (b * b).sum(axis=1)[None, :]
        )
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise ValueError(f"unknown kernel {kind!r}")


# --- SMO solver: numba lane and numpy lane ----------------------------------


def _smo_loops(kmat, y, c, tol, max_iter):
    n = kmat.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    grad = -np.ones(n, dtype=np.float64)
    iters = 0
    m_val = np.inf
    big_m = -np.inf
    while iters < max_iter:
        i = -1
        m_val = -np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] < c) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * grad[t]
                if v > m_val:
                    m_val = v
                    i = t
        big_m = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c):
                v = -y[t] * grad[t]
                if v < big_m:
                    big_m = v
        if i < 0 or m_val - big_m < tol:
            break
        j = -1
        best = np.inf
        kii = kmat[i, i]
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < c):
                b_it = m_val + y[t] * grad[t]
                if b_it > 0:
                    a_it = kii + kmat[t, t] - 2.0 * kmat[i, t]
                    if a_it <= 0:
                        a_it = TAU
                    obj = -(b_it * b_it) / a_it
                    if obj < best:
                        best = obj
                        j = t
        if j < 0:
            break
        # two-variable subproblem (box-constrained)
        quad = kii + kmat[j, j] - 2.0 * kmat[i, j]
        if quad <= 0:
            quad = TAU
        old_i = alpha[i]
        old_j = alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > 0:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            asum = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if asum > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = asum - c
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = asum
            if asum > c:
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = asum - c
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = asum
        dai = alpha[i] - old_i
        daj = alpha[j] - old_j
        for t in range(n):
            grad[t] += y[t] * (y[i] * kmat[t, i] * dai + y[j] * kmat[t, j] * daj)
        iters += 1
    return alpha, grad, iters, m_val, big_m


_smo_jit = backend.jit(_smo_loops)


def _smo_numpy(kmat, y, c, tol, max_iter):
    n = kmat.shape[0]
    alpha = np.zeros(n)
    grad = -np.ones(n)
    diag = np.diagonal(kmat).copy()
    iters = 0
    m_val = np.inf
    big_m = -np.inf
    neg_inf = -np.inf
    while iters < max_iter:
        up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c))
        minus_yg = -y * grad
        up_vals = np.where(up, minus_yg, neg_inf)
        i = int(np.argmax(up_vals))
        m_val = up_vals[i]
        low_vals = np.where(low, minus_yg, np.inf)
        big_m = float(low_vals.min())
        if not np.isfinite(m_val) or m_val - big_m < tol:
            break
        b_vec = m_val - minus_yg
        a_vec = kmat[i, i] + diag - 2.0 * kmat[i]
        a_vec = np.where(a_vec <= 0, TAU, a_vec)
        obj = np.where(low & (b_vec > 0), -(b_vec * b_vec) / a_vec, np.inf)
        j = int(np.argmin(obj))
        if not np.isfinite(obj[j]):
            break
        old_i = alpha[i]
        old_j = alpha[j]
        _two_var_update(kmat, y, c, alpha, grad, i, j)
        dai = alpha[i] - old_i
        daj = alpha[j] - old_j
        grad += y * (y[i] * kmat[:, i] * dai + y[j] * kmat[:, j] * daj)
        iters += 1
    return alpha, grad, iters, float(m_val), float(big_m)


def _two_var_update(kmat, y, c, alpha, grad, i, j):
    quad = kmat[i, i] + kmat[j, j] - 2.0 * kmat[i, j]
    if quad <= 0:
        quad = TAU
    if y[i] != y[j]:
        delta = (-grad[i] - grad[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = -diff
        if diff > 0:
            if alpha[i] > c:
                alpha[i] = c
                alpha[j] = c - diff
        elif alpha[j] > c:
            alpha[j] = c
            alpha[i] = c + diff
    else:
        delta = (grad[i] - grad[j]) / quad
        asum = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if asum > c:
            if alpha[i] > c:
                alpha[i] = c
                alpha[j] = asum - c
        elif alpha[j] < 0:
            alpha[j] = 0.0
            alpha[i] = asum
        if asum > c:
            if alpha[j] > c:
                alpha[j] = c
                alpha[i] = asum - c
        elif alpha[i] < 0:
            alpha[i] = 0.0
            alpha[j] = asum


@dataclass
class SvmModel:
    params: SvmParams
    gamma_value: float
    support_vectors: np.ndarray  # (m, d)
    dual_coef: np.ndarray  # (m,) alpha_i * y_i
    intercept: float
    n_iter: int
    converged: bool
    kkt_violation: float
    dual_objective: float
    n_features: int

    def decision_function(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.n_features:
            raise ValueError(
                f"feature dim {x.shape[1]} != model dim {self.n_features}"
            )
        k = kernel_matrix(
            x, self.support_vectors, self.params.kernel, self.gamma_value,
            self.params.degree,
        )
        return k @ self.dual_coef + self.intercept

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.decision_function(x) > 0).astype(np.uint8)


def dual_objective(kmat: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> float:
    qa = (y * alpha) @ kmat @ (y * alpha)
    return float(alpha.sum() - 0.5 * qa)


def _rho(alpha, grad, y, c):
    yg = y * grad
    free = (alpha > 1e-12) & (alpha < c - 1e-12)
    if free.any():
        return float(yg[free].mean())
    ub = np.inf
    lb = -np.inf
    at_c = alpha >= c - 1e-12
    at_0 = alpha <= 1e-12
    for sel, is_ub in (
        (at_c & (y < 0), True),
        (at_0 & (y > 0), True),
        (at_c & (y > 0), False),
        (at_0 & (y < 0), False),
    ):
        if sel.any():
            if is_ub:
                ub = min(ub, float(yg[sel].min()))
            else:
                lb = max(lb, float(yg[sel].max()))
    if not np.isfinite(ub):
        ub = lb
    if not np.isfinite(lb):
        lb = ub
    return (ub + lb) / 2.0


def train_svm_arrays(
    x: np.ndarray,
    labels: np.ndarray,
    params: SvmParams = SvmParams(),
    force_lane: str | None = None,
) -> SvmModel:
    """Train on features ``x`` with 0/1 labels (1 = lichen = positive)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(labels):
        raise ValueError("x must be (n, d) with matching labels")
    if not np.isfinite(x).all():
        raise InvalidTrainingSet("features contain non-finite values")
    classes = np.unique(labels)
    if len(classes) < 2:
        raise InvalidTrainingSet("training set contains a single class")
    y = np.where(labels == 1, 1.0, -1.0)
    gamma = resolve_gamma(x, params.gamma)
    kmat = kernel_matrix(x, x, params.kernel, gamma, params.degree)
    max_iter = _UNLIMITED if params.max_iter < 0 else params.max_iter
    lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
    solver = _smo_jit if lane == "numba" else _smo_numpy
    alpha, grad, iters, m_val, big_m = solver(
        np.ascontiguousarray(kmat), y, float(params.c), float(params.tol), max_iter
    )
    violation = m_val - big_m if np.isfinite(m_val) else 0.0
    converged = bool(violation < params.tol)
    rho = _rho(alpha, grad, y, params.c)
    sv = alpha > 1e-12
    return SvmModel(
        params=params,
        gamma_value=gamma,
        support_vectors=x[sv].copy(),
        dual_coef=(alpha * y)[sv].copy(),
        intercept=-rho,
        n_iter=iters,
        converged=converged,
        kkt_violation=float(max(violation, 0.0)),
        dual_objective=dual_objective(kmat, y, alpha),
        n_features=x.shape[1],
    )


def smo_state(
    x: np.ndarray,
    labels: np.ndarray,
    params: SvmParams = SvmParams(),
    force_lane: str | None = None,
):
    """Raw solver state (alpha, grad, iterations, m, M); used by tests."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.where(np.asarray(labels) == 1, 1.0, -1.0)
    gamma = resolve_gamma(x, params.gamma)
    kmat = kernel_matrix(x, x, params.kernel, gamma, params.degree)
    max_iter = _UNLIMITED if params.max_iter < 0 else params.max_iter
    lane = force_lane or ("numba" if backend.USE_NUMBA else "numpy")
    solver = _smo_jit if lane == "numba" else _smo_numpy
    return solver(np.ascontiguousarray(kmat), y, float(params.c),
                  float(params.tol), max_iter), kmat, y
