import math

import numpy as np
import pytest

from gaqq.estimator import Hyperparams
from gaqq.exceptions import InvalidInput
from gaqq.simulation import (
    BenchmarkConfig, ScenarioSpec, make_means_multi, make_means_two_class, make_precision,
    misclassification_error, replication_rng, rmspe, run_benchmark, run_replication,
    sample_mvn, scenario_hash, scenario_preset, simulate, summarize,
)

FAST = BenchmarkConfig(grid1=(0.1, 1.0), grid2=(0.1, 1.0), hp=Hyperparams(max_outer=20))


def test_precision_m1_m2_m4():
    np.testing.assert_array_equal(make_precision("M1", 3), np.eye(3))
    m2 = make_precision("M2", 4)
    assert m2[0, 1] == pytest.approx(0.6) and m2[0, 2] == pytest.approx(0.36)
    assert m2[0, 3] == pytest.approx(0.216) and m2[2, 2] == 1.0
    m4 = make_precision("M4", 7)
    assert m4[0, 4] == 0.6 and m4[3, 3] == 1.0 and m4[4, 5] == 0.0 and m4[6, 6] == 1.0
    assert np.count_nonzero(m4 - np.diag(np.diag(m4))) == 20


def test_precision_m3_is_permuted_m2(rng):
    m2, m3 = make_precision("M2", 10), make_precision("M3", 10, rng)
    np.testing.assert_allclose(np.linalg.eigvalsh(m3), np.linalg.eigvalsh(m2), atol=1e-12)
    np.testing.assert_array_equal(np.sort(m3.ravel()), np.sort(m2.ravel()))


def test_precision_m5(rng):
    for _ in range(5):
        m5 = make_precision("M5", 30, rng)
        np.testing.assert_array_equal(m5, m5.T)
        lam = np.linalg.eigvalsh(m5)[0]
        assert 0.05 <= lam < 0.15 + 1e-12
        off = m5[np.triu_indices(30, 1)]
        assert np.all(np.abs(off) < 1)
        assert 0.05 < np.mean(off != 0) < 0.3
        assert len(set(np.diag(m5))) == 1


def test_precision_checks():
    with pytest.raises(InvalidInput):
        make_precision("M4", 5)
    with pytest.raises(InvalidInput):
        make_precision("M3", 5)
    with pytest.raises(InvalidInput):
        make_precision("M9", 5)


@pytest.mark.parametrize("sparsity,p,zeros", [("S1", 40, 10), ("S2", 40, 30), ("S1", 10, 3), ("S2", 10, 8)])
def test_two_class_means(rng, sparsity, p, zeros):
    mu1, mu2 = make_means_two_class(p, sparsity, rng)
    assert np.all(mu1 == 0)
    assert np.sum(mu2 == 0) == zeros
    assert np.all((mu2 >= 0) & (mu2 < 2))


def test_multi_means(rng):
    mus = make_means_multi(20, 4, rng)
    for k in range(1, 5):
        block = mus[k - 1, 2 * k - 2: 2 * k + 6]
        assert np.all(np.abs(block - 0.5 * k) <= 1)
        rest = np.delete(mus[k - 1], np.arange(2 * k - 2, 2 * k + 6))
        assert np.all(rest == 0)
    with pytest.raises(InvalidInput):
        make_means_multi(13, 4, rng)


def test_sample_mvn_moments(rng):
    prec = make_precision("M2", 4)
    mu = np.array([1.0, -1.0, 0.0, 2.0])
    x = sample_mvn(mu, prec, 200_000, rng)
    np.testing.assert_allclose(x.mean(axis=0), mu, atol=0.02)
    np.testing.assert_allclose(np.cov(x.T), np.linalg.inv(prec), atol=0.05)


def test_metrics():
    assert misclassification_error([1, 2, 1, 2], [1, 1, 1, 2]) == 0.25
    assert rmspe([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    assert rmspe([1.0, 2.0], [1.0, 2.0]) == 0.0
    with pytest.raises(InvalidInput):
        rmspe([], [])
    with pytest.raises(InvalidInput):
        misclassification_error([1], [1, 2])


def test_summarize_standard_error():
    # me values 10, 20, 30: mean 20, sd 10, se 10/sqrt(3)
    res = summarize(None, "GAQQ", [(0, 10.0, 1.0), (1, 20.0, 1.0), (2, 30.0, 1.0)])
    assert res.me_mean == 20.0
    assert res.me_se == pytest.approx(10 / math.sqrt(3))
    assert res.rmspe_se == 0.0


def test_presets():
    s = scenario_preset("t1-m4-s2-p40", seed=3)
    assert (s.precision_model, s.p, s.sizes, s.sparsity, s.seed) == ("M4", 40, (30, 30), "S2", 3)
    t = scenario_preset("t3-m1-p100")
    assert t.k_classes == 4 and t.sparsity is None
    assert scenario_preset("t3-m2-p50-k3").sizes == (30, 30, 30)
    for bad in ("t1-m1-p40", "t3-m1-s1-p40", "t4-m1-s1-p40", "t1-m6-s1-p40"):
        with pytest.raises(InvalidInput):
            scenario_preset(bad)


def test_spec_validation():
    with pytest.raises(InvalidInput):
        ScenarioSpec("M1", 10, (30, 1), "S1")
    with pytest.raises(InvalidInput):
        ScenarioSpec("M1", 10, (5, 5, 5), "S1")
    assert ScenarioSpec("M1", 10, (5, 6), "S1").test_sizes == (5, 6)


def test_replication_streams():
    a = replication_rng(7, 3, "x").standard_normal(5)
    np.testing.assert_array_equal(a, replication_rng(7, 3, "x").standard_normal(5))
    assert not np.array_equal(a, replication_rng(7, 4, "x").standard_normal(5))
    assert not np.array_equal(a, replication_rng(7, 3, "y").standard_normal(5))
    assert not np.array_equal(a, replication_rng(8, 3, "x").standard_normal(5))
    assert scenario_hash("x") == scenario_hash("x") < 2 ** 64


def test_simulate_shapes():
    spec = ScenarioSpec("M3", 12, (5, 7), "S1", test_sizes=(4, 4))
    train, (tw, tz), truth = simulate(spec, replication_rng(0, 0, spec.scenario_id))
    assert train.w.shape == (12, 12) and list(train.n_k) == [5, 7]
    assert tw.shape == (8, 12) and list(tz) == [1] * 4 + [2] * 4
    assert truth["precision"].shape == (12, 12)


def test_replication_independent_of_rep_count():
    spec = ScenarioSpec("M1", 8, (6, 6), "S2", seed=5)
    a = run_benchmark(spec, ("GLDA",), reps=2, config=FAST)[0]
    b = run_benchmark(spec, ("GLDA",), reps=4, config=FAST)[0]
    assert a.per_rep == b.per_rep[:2]


def test_benchmark_determinism_and_threads():
    spec = ScenarioSpec("M2", 8, (8, 8), "S1", seed=11)
    a = run_benchmark(spec, reps=3, config=FAST)
    b = run_benchmark(spec, reps=3, config=FAST, threads=2)
    assert [r.per_rep for r in a] == [r.per_rep for r in b]
    me, rm = run_replication(spec, "GAQQ", FAST, 1)
    assert a[0].per_rep[1] == (1, 100 * me, rm)


def test_benchmark_needs_two_reps():
    with pytest.raises(InvalidInput):
        run_benchmark(ScenarioSpec("M1", 8, (6, 6), "S1"), reps=1)


def test_multiclass_replication_runs():
    spec = ScenarioSpec("M1", 14, (6, 6, 6))
    me, rm = run_replication(spec, "GAQQ", FAST, 0)
    assert 0 <= me <= 1 and rm > 0
