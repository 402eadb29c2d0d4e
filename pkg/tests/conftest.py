import numpy as np
import pytest

import rategames as rg
from rategames.synth import make_two_gaussians


@pytest.fixture(scope="session")
def gaussians():
    return make_two_gaussians(1500, seed=5)


@pytest.fixture(scope="session")
def small_ds():
    rng = np.random.default_rng(42)
    n = 240
    labels = np.where(rng.random(n) < 0.5, 1, -1)
    X = rng.normal(0, 1, (n, 3))
    X[:, 0] += 0.9 * labels
    groups = (rng.random(n) < 0.4).astype(int)
    return rg.Dataset(X, labels, groups, name="small")


@pytest.fixture
def tpr_def():
    return rg.RateDefinition(target="predict-positive", label=1,
                             sense="decreasing", name="tpr")


@pytest.fixture
def tnr_def():
    return rg.RateDefinition(target="predict-negative", label=-1,
                             sense="decreasing", name="tnr")


def random_models(rng, d, n_models, scale=2.0):
    return [rg.LinearModel(rng.normal(0, scale, d), rng.normal(0, scale))
            for _ in range(n_models)]


def central_difference(f, x, h=1e-5):
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        grad[i] = (f(x + e) - f(x - e)) / (2 * h)
    return grad
