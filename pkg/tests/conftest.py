import numpy as np
import pytest

from unreg import ErmProblem, ScalarLoss, squared_loss_problem, logistic_loss_problem

import helpers


@pytest.fixture
def one_d() -> ErmProblem:
    """F(x) = (5/2)(x - 1)^2 from rows (1), (2) with labels (1, 2).

    mu = lambda_min(A^T A) = 1 + 4 = 5 exactly.
    """
    return squared_loss_problem([[1.0], [2.0]], [1.0, 2.0], 1.0, mu=5.0)


def make_squared(seed, n=5, d=3, explicit_l2=0.0, uniform_weights=True):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, d))
    b = rng.standard_normal(n)
    if uniform_weights:
        w = np.full(n, 1.0 / n)
    else:
        w = rng.uniform(0.2, 1.5, size=n) / n
    losses = tuple(ScalarLoss("squared", float(bi), float(wi))
                   for bi, wi in zip(b, w))
    h = (a * w[:, None]).T @ a
    mu = float(np.linalg.eigvalsh(h).min()) + explicit_l2
    assert mu > 1e-10
    return ErmProblem(matrix=a, losses=losses, mu=mu, explicit_l2=explicit_l2)


def make_logistic(seed, n=5, d=3, gamma=0.3):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, d))
    b = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return logistic_loss_problem(a, b, 1.0 / n, mu=gamma, explicit_l2=gamma)


@pytest.fixture
def small_squared() -> ErmProblem:
    return make_squared(7)


@pytest.fixture
def small_logistic() -> ErmProblem:
    return make_logistic(11)


@pytest.fixture
def tiny_ls() -> ErmProblem:
    """3x2 least squares used by the dual bound checks."""
    return make_squared(3, n=3, d=2)


def assert_close(actual, expected, rel=1e-9, abs_tol=0.0):
    actual = np.asarray(actual, dtype=np.float64)
    expected = np.asarray(expected, dtype=np.float64)
    tol = rel * np.maximum(np.abs(expected), 1.0) + abs_tol
    err = np.abs(actual - expected)
    assert (err <= tol).all(), f"max err {err.max():.3e} over tol"


__all__ = ["make_squared", "make_logistic", "assert_close", "helpers"]
