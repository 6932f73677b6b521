"""Shared test helpers: random-but-seeded model and tensor factories."""

import numpy as np
import pytest

from kronrisk import KroneckerCovarianceModel


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_theta(rng, n, floor=0.02):
    """Random unit-trace SPD density matrix with spectrum bounded below."""
    lam = rng.uniform(floor, 1.0, size=n)
    lam /= lam.sum()
    q = random_orthogonal(rng, n)
    theta = (q * lam) @ q.T
    theta = (theta + theta.T) / 2.0
    return theta / np.trace(theta)


def random_model(rng, n_m, n_c, sigma2=None, floor=0.02):
    if sigma2 is None:
        sigma2 = float(rng.uniform(0.5, 4.0))
    return KroneckerCovarianceModel(
        sigma2=sigma2,
        thetas=(random_theta(rng, n_m, floor), random_theta(rng, n_c, floor)))


@pytest.fixture
def make_model():
    return random_model


@pytest.fixture
def make_theta():
    return random_theta
