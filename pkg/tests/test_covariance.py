"""Closed-form estimators, block structure, parameter counts, and the
model JSON contract."""

import numpy as np
import pytest

from kronrisk import (DegenerateDataError, GeneratorConfig,
                      KroneckerCovarianceModel, ModelFormatError,
                      cross_country_block, estimate, full_covariance,
                      model_from_json, model_to_json, parameter_counts,
                      sample_kronecker_gaussian, separability_diagnostic,
                      unfold)
from conftest import random_model


def _alternating_samples(t=20):
    m = np.zeros((2, 2))
    m[0, 0] = 1.0
    return [m if i % 2 == 0 else -m for i in range(t)]


def test_estimate_alternating_worked_example():
    t = 20
    model = estimate(_alternating_samples(t), demean=True)
    e11 = np.zeros((2, 2))
    e11[0, 0] = 1.0
    assert model.sigma2 == pytest.approx(t / (t - 1), abs=1e-12)
    assert np.allclose(model.thetas[0], e11, atol=1e-12)
    assert np.allclose(model.thetas[1], e11, atol=1e-12)
    assert model.sample_count == t and model.demeaned


def test_estimate_rejects_degenerate_data():
    with pytest.raises(DegenerateDataError):
        estimate([np.zeros((2, 2))] * 5)
    with pytest.raises(DegenerateDataError):
        estimate([np.ones((2, 2))] * 5, demean=True)  # identical after demean
    with pytest.raises(DegenerateDataError):
        estimate([np.ones((2, 2))])  # fewer than 2 samples


def test_estimate_rejects_dims_mismatch():
    with pytest.raises(ValueError):
        estimate([np.ones((2, 2)), np.ones((2, 3))])


def test_estimate_monte_carlo_recovery():
    rng = np.random.default_rng(2024)
    model = random_model(rng, 5, 3)
    samples = sample_kronecker_gaussian(
        GeneratorConfig(model=model, sample_count=50_000, seed=91))
    est = estimate(samples, demean=True)
    assert abs(est.sigma2 - model.sigma2) / model.sigma2 < 0.02
    for got, want in zip(est.thetas, model.thetas):
        assert np.linalg.norm(got - want) < 0.02


def test_estimator_trace_identities():
    rng = np.random.default_rng(3)
    samples = [rng.standard_normal((4, 3)) for _ in range(40)]
    model = estimate(samples, demean=True)
    t = len(samples)
    mean = np.mean(samples, axis=0)
    total = sum(np.sum((s - mean) ** 2) for s in samples) / (t - 1)
    for theta in model.thetas:
        assert abs(np.trace(theta) - 1.0) < 1e-10
        assert model.sigma2 * np.trace(theta) == pytest.approx(total, rel=1e-12)


def test_mode_consistency_with_unfoldings():
    rng = np.random.default_rng(4)
    samples = [rng.standard_normal((4, 3)) for _ in range(25)]
    model = estimate(samples, demean=False)
    t = len(samples)
    for mode in (0, 1):
        gram = sum(unfold(s, mode).matrix @ unfold(s, mode).matrix.T
                   for s in samples)
        direct = gram / (model.sigma2 * (t - 1))
        direct /= np.trace(direct)
        assert np.allclose(model.thetas[mode], direct, atol=1e-12)


def test_scale_equivariance():
    rng = np.random.default_rng(5)
    samples = [rng.standard_normal((3, 2)) for _ in range(30)]
    base = estimate(samples)
    scaled = estimate([4.0 * s for s in samples])
    assert scaled.sigma2 == pytest.approx(16.0 * base.sigma2, rel=1e-12)
    for a, b in zip(scaled.thetas, base.thetas):
        assert np.allclose(a, b, atol=1e-12)


def test_consistency_improves_with_sample_count():
    rng = np.random.default_rng(6)
    model = random_model(rng, 5, 3)
    errors = []
    for t in (500, 5_000, 50_000):
        got = estimate(sample_kronecker_gaussian(
            GeneratorConfig(model=model, sample_count=t, seed=1234)))
        err = (abs(got.sigma2 - model.sigma2) / model.sigma2
               + sum(np.linalg.norm(a - b)
                     for a, b in zip(got.thetas, model.thetas)))
        errors.append(err)
    assert errors[0] > errors[1] > errors[2]


def test_full_covariance_identity_example():
    model = KroneckerCovarianceModel(4.0, (np.eye(2) / 2, np.eye(2) / 2))
    assert np.allclose(full_covariance(model), np.eye(4), atol=1e-12)


def test_full_covariance_zero_and_trace():
    rng = np.random.default_rng(7)
    zero = KroneckerCovarianceModel(0.0, (np.eye(3) / 3, np.eye(2) / 2))
    assert not np.any(full_covariance(zero))
    model = random_model(rng, 4, 3)
    sigma = full_covariance(model)
    assert np.trace(sigma) == pytest.approx(model.sigma2, rel=1e-12)
    assert np.allclose(sigma, sigma.T, atol=1e-12)
    assert np.linalg.eigvalsh(sigma)[0] > -1e-12


def test_cross_country_block_structure():
    rng = np.random.default_rng(8)
    model = random_model(rng, 4, 3)
    sigma = full_covariance(model)
    n_m, n_c = model.dims
    for i in range(n_c):
        for j in range(n_c):
            block = cross_country_block(model, i, j)
            brute = sigma[i * n_m:(i + 1) * n_m, j * n_m:(j + 1) * n_m]
            assert np.allclose(block, brute, atol=1e-12)
            assert np.trace(block) == pytest.approx(
                model.sigma2 * model.thetas[1][i, j], abs=1e-12)
    diag = KroneckerCovarianceModel(
        4.0, (model.thetas[0], np.diag([0.25, 0.25, 0.5])))
    assert np.allclose(cross_country_block(diag, 0, 0), model.thetas[0],
                       atol=1e-12)
    assert not np.any(cross_country_block(diag, 0, 1))


def test_cross_country_block_rejects_bad_indices():
    model = KroneckerCovarianceModel(1.0, (np.eye(2) / 2, np.eye(2) / 2))
    with pytest.raises(ValueError):
        cross_country_block(model, 0, 2)
    order1 = KroneckerCovarianceModel(1.0, (np.eye(2) / 2,))
    with pytest.raises(ValueError):
        cross_country_block(order1, 0, 0)


def test_parameter_counts():
    assert parameter_counts((15, 8)) == (7260, 157)
    assert parameter_counts((1,)) == (1, 2)
    assert parameter_counts((2, 2)) == (10, 7)
    with pytest.raises(ValueError):
        parameter_counts(())


def test_separability_diagnostic_exact_case():
    report = separability_diagnostic(_alternating_samples(),
                                     estimate(_alternating_samples()))
    assert report.relative_error == pytest.approx(0.0, abs=1e-12)
    assert np.all(report.per_block_errors <= 1e-12)
    assert (report.full_params, report.separable_params) == (10, 7)


def test_separability_diagnostic_monte_carlo():
    rng = np.random.default_rng(9)
    model = random_model(rng, 5, 3)
    samples = sample_kronecker_gaussian(
        GeneratorConfig(model=model, sample_count=50_000, seed=77))
    report = separability_diagnostic(samples, estimate(samples))
    assert report.relative_error < 0.05
    assert report.per_block_errors.shape == (3, 3)


def test_separability_diagnostic_rejects_zero_samples():
    model = KroneckerCovarianceModel(1.0, (np.eye(2) / 2, np.eye(2) / 2))
    with pytest.raises(DegenerateDataError):
        separability_diagnostic([np.zeros((2, 2))] * 4, model)


def test_model_validation():
    with pytest.raises(ValueError):
        KroneckerCovarianceModel(-1.0, (np.eye(2) / 2,))
    with pytest.raises(ValueError):
        KroneckerCovarianceModel(1.0, (np.eye(2),))  # trace 2
    with pytest.raises(ValueError):
        KroneckerCovarianceModel(1.0, (np.array([[0.5, 0.3], [0.0, 0.5]]),))
    with pytest.raises(ValueError):
        # symmetric unit trace but indefinite
        KroneckerCovarianceModel(1.0, (np.array([[-0.5, 0.0], [0.0, 1.5]]),))


def test_model_json_roundtrip_is_lossless():
    rng = np.random.default_rng(10)
    model = random_model(rng, 5, 3)
    text = model_to_json(model)
    back = model_from_json(text)
    assert back.sigma2 == model.sigma2
    assert back.sample_count == model.sample_count
    assert back.demeaned == model.demeaned
    for a, b in zip(back.thetas, model.thetas):
        assert np.array_equal(a, b)
    assert model_to_json(back) == text


def test_model_json_rejects_malformed_documents():
    good = model_to_json(KroneckerCovarianceModel(
        1.0, (np.eye(2) / 2, np.eye(2) / 2), sample_count=9))
    with pytest.raises(ModelFormatError):
        model_from_json("not json at all")
    with pytest.raises(ModelFormatError):
        model_from_json("[1, 2, 3]")
    with pytest.raises(ModelFormatError):
        model_from_json(good.replace('"thetas"', '"nope"'))
    with pytest.raises(ModelFormatError):
        model_from_json(good.replace('"dims": [2, 2]', '"dims": [2]'))
    with pytest.raises(ModelFormatError):
        model_from_json(good.replace('"sigma2": 1,', '"sigma2": -1,'))


def test_demean_flag_changes_estimates_on_shifted_data():
    rng = np.random.default_rng(11)
    samples = [rng.standard_normal((3, 2)) + 5.0 for _ in range(50)]
    with_mean = estimate(samples, demean=False)
    without = estimate(samples, demean=True)
    assert with_mean.sigma2 > without.sigma2  # the offset inflates raw moments
    assert not with_mean.demeaned and without.demeaned
