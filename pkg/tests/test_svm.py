import numpy as np
import pytest

from lichenmeter.errors import InvalidTrainingSet
from oracles import svm_battery, svm_dual_oracle

from lichenmeter.svm import (
    SvmParams,
    dual_objective,
    kernel_matrix,
    resolve_gamma,
    smo_state,
    train_svm_arrays,
)


@pytest.mark.parametrize("kernel,c", [("linear", 1.0), ("rbf", 1.0),
                                      ("rbf", 100.0), ("poly", 10.0)])
def test_small_battery_matches_active_set_oracle(kernel, c):
    for x, lab in svm_battery():
        params = SvmParams(c=c, kernel=kernel, degree=3, gamma="scale",
                           max_iter=-1, tol=1e-6)
        (alpha, grad, iters, m, big_m), kmat, y = smo_state(x, lab, params)
        got = dual_objective(kmat, y, alpha)
        expect, _ = svm_dual_oracle(kmat, y, c)
        assert got == pytest.approx(expect, abs=1e-4)
        # dual feasibility to 1e-9
        assert float(alpha @ y) == pytest.approx(0.0, abs=1e-9)
        assert alpha.min() >= -1e-9 and alpha.max() <= c + 1e-9
        # KKT violation below the stopping tolerance
        assert m - big_m < 1e-3


def test_separable_pair_boundary():
    x = np.array([[0.0, 0], [2, 2]])
    model = train_svm_arrays(x, np.array([0, 1]),
                             SvmParams(c=100.0, kernel="linear"))
    assert len(model.support_vectors) == 2  # both points are support vectors
    # decision boundary is x + y = 2
    assert model.decision_function([[1.0, 1.0]])[0] == pytest.approx(0.0, abs=1e-9)
    assert model.decision_function([[2.0, 2.0]])[0] == pytest.approx(1.0, abs=1e-9)
    assert model.decision_function([[0.0, 0.0]])[0] == pytest.approx(-1.0, abs=1e-9)
    assert model.predict([[1.6, 1.0]])[0] == 1
    assert model.predict([[0.4, 1.0]])[0] == 0


def test_xor_rbf_trains_to_perfect_accuracy():
    x = np.array([[0.0, 0], [1, 1], [0, 1], [1, 0]])
    lab = np.array([0, 0, 1, 1])
    model = train_svm_arrays(x, lab, SvmParams(c=100.0, kernel="rbf",
                                               gamma="auto"))
    assert (model.predict(x) == lab).all()
    assert model.converged


def test_single_class_rejected():
    with pytest.raises(InvalidTrainingSet):
        train_svm_arrays(np.zeros((4, 2)), np.ones(4), SvmParams())


def test_gamma_formulas(rng):
    x = rng.normal(0, 2.0, (50, 8))
    assert resolve_gamma(x, "auto") == pytest.approx(1.0 / 8)
    assert resolve_gamma(x, "scale") == pytest.approx(1.0 / (8 * x.var()))


def test_poly_kernel_has_plus_one_offset():
    a = np.array([[1.0, 0.0]])
    b = np.array([[0.0, 1.0]])  # orthogonal: dot = 0
    k = kernel_matrix(a, b, "poly", gamma=1.0, degree=3)
    assert k[0, 0] == pytest.approx(1.0)  # (0 + 1)^3, not 0


def test_max_iter_truncation():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 1, (40, 4)), rng.normal(0.6, 1, (40, 4))])
    lab = np.repeat([0, 1], 40)
    m_full = train_svm_arrays(x, lab, SvmParams(c=10.0, max_iter=-1))
    m_5 = train_svm_arrays(x, lab, SvmParams(c=10.0, max_iter=5))
    assert m_full.converged
    assert not m_5.converged and m_5.n_iter == 5


def test_decision_invariant_to_row_permutation(rng):
    # unique optimum for strictly PD kernels; trained near convergence the
    # decision function cannot depend on row order
    x = rng.normal(0, 1, (24, 5))
    lab = (x[:, 0] + 0.3 * rng.normal(size=24) > 0).astype(int)
    if len(np.unique(lab)) < 2:
        lab[0] = 1 - lab[0]
    params = SvmParams(c=10.0, kernel="rbf", tol=1e-10)
    m1 = train_svm_arrays(x, lab, params)
    perm = rng.permutation(24)
    m2 = train_svm_arrays(x[perm], lab[perm], params)
    probe = rng.normal(0, 1, (40, 5))
    assert np.allclose(m1.decision_function(probe), m2.decision_function(probe),
                       atol=1e-9)


def test_lanes_agree_on_objective(rng):
    x = rng.normal(0, 1, (30, 4))
    lab = (x[:, 0] > 0).astype(int)
    params = SvmParams(c=1.0, kernel="rbf", tol=1e-8)
    (a1, g1, i1, m1, M1), kmat, y = smo_state(x, lab, params, force_lane="numba")
    (a2, g2, i2, m2, M2), _, _ = smo_state(x, lab, params, force_lane="numpy")
    assert dual_objective(kmat, y, a1) == pytest.approx(
        dual_objective(kmat, y, a2), abs=1e-9
    )
