import math

import numpy as np
import pytest

from saew.baselines import RdaState, rda_grid, rda_step
from saew.core import InvalidInputError


def test_rda_grid():
    grid = rda_grid()
    assert len(grid) == 9
    assert grid[0] == 1e-5
    assert grid[-1] == 1e3


def test_zero_gradients_keep_origin():
    state = RdaState(d=3, gamma=1.0, rho=0.1, lam=0.1)
    for _ in range(20):
        rda_step(state, np.zeros(3))
    assert np.array_equal(state.predict(), np.zeros(3))


def test_unit_gradient_recursion():
    state = RdaState(d=1, gamma=1.0)
    for t in range(1, 101):
        rda_step(state, [1.0])
        assert math.isclose(state.predict()[0], -math.sqrt(t))


def test_gradient_mean_is_exact(rng):
    state = RdaState(d=4, gamma=0.5)
    gradients = rng.normal(size=(250, 4))
    for g in gradients:
        rda_step(state, g)
    assert np.allclose(state.grad_mean, gradients.mean(axis=0), rtol=0, atol=1e-12)


def test_soft_threshold_sparsity(rng):
    state = RdaState(d=6, gamma=2.0, rho=0.5, lam=0.2)
    for _ in range(200):
        rda_step(state, rng.normal(loc=[1.0, 0.0, -1.0, 0.1, 0.0, 0.0], size=6))
        inside = np.abs(state.grad_mean) <= state.threshold
        assert np.all(state.predict()[inside] == 0)
        assert np.all(state.predict()[~inside] != 0)


def test_large_lambda_gives_zero():
    state = RdaState(d=3, gamma=1.0, lam=10.0)
    for g in ([1.0, -2.0, 3.0], [0.5, 0.5, -0.5]):
        rda_step(state, g)
    assert np.array_equal(state.predict(), np.zeros(3))


def test_shrinkage_monotone(rng):
    gradients = rng.normal(loc=0.2, size=(100, 10))
    previous = None
    for lam in [0.0] + rda_grid():
        state = RdaState(d=10, gamma=1.0, lam=lam)
        for g in gradients:
            rda_step(state, g)
        nonzeros = np.count_nonzero(state.predict())
        if previous is not None:
            assert nonzeros <= previous
        previous = nonzeros
    assert previous == 0


def test_rda_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        RdaState(d=2, gamma=0.0)
    with pytest.raises(InvalidInputError):
        RdaState(d=2, gamma=1.0, lam=-1.0)
    state = RdaState(d=2, gamma=1.0)
    with pytest.raises(InvalidInputError):
        rda_step(state, [np.nan, 1.0])
