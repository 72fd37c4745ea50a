import json
import math
import warnings

import numpy as np
import pytest

from gaitpd.analysis import evaluate, jacobi_eigh, pca, plane_average
from gaitpd.detector import TrialScore
from gaitpd.errors import DegenerateAllConstant, EmptyRows, TooFewSamples


def test_jacobi_2x2():
    vals, vecs = jacobi_eigh([[2.0, 1.0], [1.0, 2.0]])
    order = np.argsort(vals)
    assert np.allclose(vals[order], [1.0, 3.0], atol=1e-12)
    v = vecs[:, order[1]]
    assert abs(abs(v @ np.array([1, 1]) / math.sqrt(2)) - 1) < 1e-12


def test_jacobi_matches_lapack():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(16, 16))
    a = a + a.T
    vals, vecs = jacobi_eigh(a)
    np.testing.assert_allclose(np.sort(vals), np.linalg.eigvalsh(a), atol=1e-10)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(16), atol=1e-12)
    np.testing.assert_allclose(a @ vecs, vecs * vals, atol=1e-10)


def test_pca_correlated_2d():
    # +-sqrt(6) along (1,1)/sqrt2 and +-sqrt(2) along (1,-1)/sqrt2 give covariance [[2,1],[1,2]]
    u1 = np.array([1.0, 1.0]) / math.sqrt(2)
    u2 = np.array([1.0, -1.0]) / math.sqrt(2)
    x = np.array([math.sqrt(6) * u1, -math.sqrt(6) * u1, math.sqrt(2) * u2, -math.sqrt(2) * u2])
    cov = x.T @ x / len(x)
    np.testing.assert_allclose(cov, [[2, 1], [1, 2]], atol=1e-12)
    res = pca(x, k=2, standardize=False)
    np.testing.assert_allclose(res.explained_variance, [3.0, 1.0], atol=1e-9)
    np.testing.assert_allclose(res.components[0], [1 / math.sqrt(2)] * 2, atol=1e-9)


def test_pca_single_axis():
    x = np.zeros((40, 5))
    x[:, 1] = np.linspace(-1, 1, 40)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        res = pca(x, k=1)
    assert any("constant" in str(m.message) for m in w)
    np.testing.assert_allclose(res.components[0], [0, 1, 0, 0, 0], atol=1e-12)
    assert abs(res.explained_variance_ratio[0] - 1.0) < 1e-12


def test_pca_errors_and_signs():
    with pytest.raises(TooFewSamples):
        pca(np.zeros((3, 5)))
    with pytest.raises(DegenerateAllConstant):
        pca(np.ones((10, 3)))
    rng = np.random.default_rng(0)
    res = pca(rng.normal(size=(200, 6)) @ rng.normal(size=(6, 6)), k=3)
    for comp in res.components:
        assert comp[np.argmax(np.abs(comp))] > 0
    np.testing.assert_allclose(res.components @ res.components.T, np.eye(3), atol=1e-10)


def test_evaluate_counts_and_format():
    rep = evaluate([TrialScore("a", tp=1, delay_pct=20.0, perturbed=True), TrialScore("b", tn=1)])
    assert rep.accuracy == 1.0
    rows = [TrialScore(f"t{i:03d}", tn=1) for i in range(247)]
    rows.append(TrialScore("x", fp=3))
    rep = evaluate(rows)
    assert (rep.tn, rep.fp) == (247, 3)
    assert abs(rep.accuracy - 0.988) < 1e-12
    assert "98.8%" in rep.summary()


def test_delay_stats():
    rep = evaluate([TrialScore("a", tp=1, delay_pct=20.0), TrialScore("b", tp=1, delay_pct=30.0)])
    assert abs(rep.delay_mean - 25.0) < 1e-9 and abs(rep.delay_sd - 5.0) < 1e-9
    doc = json.loads(rep.to_json())
    assert doc["confusion"] == {"TP": 2, "FP": 0, "TN": 0, "FN": 0}
    assert rep.rows_csv().splitlines()[0].startswith("trial_id,kind")


def test_empty_and_plane_average():
    with pytest.raises(EmptyRows):
        evaluate([])
    a = evaluate([TrialScore("a", tp=1, delay_pct=10.0)], "wbam_sagittal")
    b = evaluate([TrialScore("a", fn=1)], "wbam_frontal")
    avg = plane_average([a, b])
    assert avg["accuracy"] == 0.5 and avg["delay_mean_pct"] == 10.0
