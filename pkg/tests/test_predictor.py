import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from gaqq.estimator import Dataset, Hyperparams, ModelParams, fit_multi_class, fit_two_class
from gaqq.exceptions import InvalidInput
from gaqq.predictor import (
    glda_baseline, lda_score, log_class_score, marginal_lda_decision, marginal_lda_statistic,
    marginal_precision_x, predict, predict_batch, predict_quantitative, predict_via_lda,
)

from conftest import random_spd


def make_model(rng, p=4, K=2, pi=None):
    c = random_spd(rng, p)
    mu = rng.standard_normal((K, p))
    pi = np.full(K, 1.0 / K) if pi is None else np.asarray(pi, float)
    return ModelParams(mu=mu, c_hat=c, sigma_hat=np.linalg.inv(c), pi=pi,
                       delta=(mu[1:] - mu[0]) / K)


def test_regression_coef_two_ways(rng):
    m = make_model(rng, p=6)
    via_cov = m.sigma_xy @ np.linalg.inv(m.sigma_x)
    np.testing.assert_allclose(m.regression_coef, via_cov, atol=1e-10)


def test_candidate_at_class_mean_is_class_response_mean(rng):
    m = make_model(rng, K=3)
    for k in (1, 2, 3):
        assert predict_quantitative(m, m.mu_x[k - 1], k) == pytest.approx(m.mu_y[k - 1], abs=1e-12)


def test_candidate_is_conditional_mean(rng):
    m = make_model(rng, p=5)
    x = rng.standard_normal(4)
    y1 = predict_quantitative(m, x, 1)
    # gradient of the class-1 log density in y vanishes at the candidate
    r = np.append(x, y1) - m.mu[0]
    assert (m.c_hat @ r)[-1] == pytest.approx(0.0, abs=1e-10)


def test_score_matches_density_oracle(rng):
    m = make_model(rng, p=5, K=3, pi=[0.2, 0.5, 0.3])
    for _ in range(20):
        x = 2 * rng.standard_normal(4)
        for k in (1, 2, 3):
            y = predict_quantitative(m, x, k)
            want = math.log(m.pi[k - 1]) + multivariate_normal(m.mu[k - 1], m.sigma_hat).logpdf(np.append(x, y))
            assert log_class_score(m, x, k) == pytest.approx(want, abs=1e-10)


def test_prior_only_difference_is_log_nine(rng):
    m = make_model(rng, pi=[0.9, 0.1])
    m.mu[1] = m.mu[0]
    m.delta = np.zeros((1, m.p))
    x = rng.standard_normal(m.p - 1)
    assert log_class_score(m, x, 1) - log_class_score(m, x, 2) == pytest.approx(math.log(9), abs=1e-12)
    assert predict(m, x).z_hat == 1


def test_exact_tie_goes_to_smaller_index(rng):
    m = make_model(rng)
    m.mu[1] = m.mu[0]
    pred = predict(m, rng.standard_normal(m.p - 1))
    assert pred.per_class_score[0] == pred.per_class_score[1]
    assert pred.z_hat == 1


def test_prediction_fields(rng):
    m = make_model(rng, K=3)
    x = rng.standard_normal(m.p - 1)
    pred = predict(m, x)
    assert pred.z_hat == int(np.argmax(pred.per_class_score)) + 1
    assert pred.y_hat == pred.per_class_y[pred.z_hat - 1]


def test_batch_matches_single(rng):
    m = make_model(rng, K=3)
    xs = rng.standard_normal((15, m.p - 1))
    batch = predict_batch(m, xs)
    for i in range(15):
        one = predict(m, xs[i])
        assert one.z_hat == batch.z_hat[i]
        assert one.y_hat == pytest.approx(batch.y_hat[i], abs=1e-14)
    assert len(predict_batch(m, np.empty((0, m.p - 1)))) == 0


def test_input_checks(rng):
    m = make_model(rng)
    with pytest.raises(InvalidInput):
        predict(m, np.zeros(m.p))
    with pytest.raises(InvalidInput):
        predict(m, [np.nan] * (m.p - 1))
    with pytest.raises(InvalidInput):
        predict_quantitative(m, np.zeros(m.p - 1), 3)


def test_lda_score_two_class_is_log_odds(rng):
    m = make_model(rng, pi=[0.3, 0.7])
    w = rng.standard_normal(m.p)
    dens = [math.log(m.pi[k]) + multivariate_normal(m.mu[k], m.sigma_hat).logpdf(w) for k in (0, 1)]
    assert lda_score(m, w, 2) == pytest.approx(dens[1] - dens[0], abs=1e-10)
    assert lda_score(m, w, 1) == 0.0


@pytest.mark.parametrize("K", [2, 3, 4])
def test_joint_rule_agrees_with_linear_rule(rng, K):
    agree = 0
    for _ in range(100):
        m = make_model(rng, p=5, K=K, pi=rng.dirichlet(np.ones(K)))
        x = 2 * rng.standard_normal(4)
        pred = predict(m, x)
        s = np.sort(pred.per_class_score)
        if s[-1] - s[-2] < 1e-9:
            continue
        _, z_lda = predict_via_lda(m, x)
        agree += z_lda == pred.z_hat
        assert z_lda == pred.z_hat
    assert agree >= 95


def test_marginal_precision_and_statistic(rng):
    m = make_model(rng, p=5)
    np.testing.assert_allclose(marginal_precision_x(m), np.linalg.inv(m.sigma_x), atol=1e-10)
    x = rng.standard_normal(4)
    dens = [math.log(m.pi[k]) + multivariate_normal(m.mu_x[k], m.sigma_x).logpdf(x) for k in (0, 1)]
    assert marginal_lda_statistic(m, x) == pytest.approx(dens[0] - dens[1], abs=1e-10)
    assert marginal_lda_decision(m, x) == (1 if dens[0] >= dens[1] else 2)


def test_fitted_models_predict(rng):
    w = np.vstack([rng.standard_normal((20, 4)), rng.standard_normal((20, 4)) + 1.5])
    d = Dataset(w, [1] * 20 + [2] * 20)
    m, _ = fit_two_class(d, Hyperparams(1.0, 1.0))
    pred = predict_batch(m, w[:, :-1])
    assert np.mean(pred.z_hat == d.z) > 0.7
    m3, _ = fit_multi_class(Dataset(w, [1] * 14 + [2] * 13 + [3] * 13), Hyperparams(1.0, 1.0))
    assert predict_batch(m3, w[:, :-1]).per_class_score.shape == (40, 3)


# -- pseudo-inverse baseline -------------------------------------------------

def test_glda_full_rank_matches_inverse(rng):
    w = np.vstack([rng.standard_normal((30, 4)), rng.standard_normal((30, 4)) + 1.0])
    d = Dataset(w, [1] * 30 + [2] * 30)
    m = glda_baseline(d)
    np.testing.assert_allclose(m.sigma_hat, d.within_scatter() / 58)
    np.testing.assert_allclose(m.c_hat, np.linalg.inv(m.sigma_hat), rtol=1e-8)
    np.testing.assert_allclose(m.mu, d.class_means)


def test_glda_pinv_axioms_when_singular(rng):
    p = 40
    w = np.vstack([rng.standard_normal((10, p)), rng.standard_normal((10, p)) + 0.5])
    d = Dataset(w, [1] * 10 + [2] * 10)
    m = glda_baseline(d)
    s, c = m.sigma_hat, m.c_hat
    scale = np.abs(s).max()
    assert np.abs(s @ c @ s - s).max() <= 1e-8 * scale
    assert np.abs(c @ s @ c - c).max() <= 1e-8 * np.abs(c).max()
    np.testing.assert_allclose(s @ c, (s @ c).T, atol=1e-8)
    np.testing.assert_allclose(c @ s, (c @ s).T, atol=1e-8)
    sx, cx = m.sigma_x, m.sigma_x_pinv
    assert np.abs(sx @ cx @ sx - sx).max() <= 1e-8 * np.abs(sx).max()
    pred = predict_batch(m, w[:, :-1])
    assert np.all(np.isfinite(pred.y_hat)) and set(pred.z_hat) <= {1, 2}


def test_glda_classifies_on_predictors(rng):
    w = np.vstack([rng.standard_normal((30, 4)), rng.standard_normal((30, 4)) + 1.0])
    d = Dataset(w, [1] * 30 + [2] * 30)
    m = glda_baseline(d)
    xs = rng.standard_normal((25, 3))
    z = predict_batch(m, xs).z_hat
    assert all(z[i] == marginal_lda_decision(m, xs[i]) for i in range(25))
