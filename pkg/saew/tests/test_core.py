import math

import numpy as np
import pytest

from saew.core import (
    CSV_HEADER,
    InvalidInputError,
    L1Ball,
    ProblemParams,
    RunRecord,
    as_vector,
    ball_contains,
    excess_l2,
    l1_norm,
)
from saew.losses import make_square_env


def test_l1_norm_examples():
    assert l1_norm([0, 0, 0]) == 0
    assert l1_norm([1, -2, 3]) == 6
    assert l1_norm([0.5, 0.5]) == 1.0


def test_l1_norm_rejects_non_finite():
    with pytest.raises(InvalidInputError):
        l1_norm([1.0, float("nan")])
    with pytest.raises(InvalidInputError):
        l1_norm([float("inf")])


def test_ball_contains_examples():
    unit = L1Ball(np.zeros(2), 1.0)
    assert ball_contains(unit, [1, 0])
    assert not ball_contains(unit, [0.6, 0.6])
    assert ball_contains(L1Ball([1, 0], 0.0), [1, 0])


def test_ball_contains_tolerance():
    unit = L1Ball(np.zeros(2), 1.0)
    assert ball_contains(unit, [1 + 5e-10, 0])
    assert not ball_contains(unit, [1 + 1e-8, 0])


def test_ball_contains_dimension_mismatch():
    with pytest.raises(InvalidInputError):
        ball_contains(L1Ball(np.zeros(2), 1.0), [0, 0, 0])


def test_ball_contains_center(rng):
    for _ in range(50):
        center = rng.normal(size=5) * 10
        assert ball_contains(L1Ball(center, rng.uniform(0, 2)), center)


def test_ball_rejects_negative_radius():
    with pytest.raises(InvalidInputError):
        L1Ball(np.zeros(2), -0.1)


def test_ball_corner():
    ball = L1Ball([1.0, 2.0], 0.5)
    assert np.array_equal(ball.corner(1, -1), [1.0, 1.5])
    assert np.array_equal(ball.corner(0, 1), [1.5, 2.0])


def test_excess_l2_examples():
    theta_star = np.array([0.3, -0.2])
    assert excess_l2(theta_star, theta_star) == 0
    assert excess_l2([3, 4], [0, 0]) == 5
    assert math.isclose(excess_l2([1, 1], [0, 0]), math.sqrt(2))
    with pytest.raises(InvalidInputError):
        excess_l2([1, 1], [0, 0, 0])


def test_as_vector_checks_length():
    assert as_vector(3.0).shape == (1,)
    with pytest.raises(InvalidInputError):
        as_vector([1, 2], d=3)
    with pytest.raises(InvalidInputError):
        as_vector([[1, 2], [3, 4]])


def test_problem_params_validation():
    ProblemParams(d0=1, alpha=1, U=1, B=1, delta=0.05)
    for bad in (
        dict(d0=-1, alpha=1, U=1, B=1, delta=0.05),
        dict(d0=0, alpha=1, U=1, B=1, delta=0.05),
        dict(d0=1, alpha=0, U=1, B=1, delta=0.05),
        dict(d0=1, alpha=1, U=-1, B=1, delta=0.05),
        dict(d0=1, alpha=1, U=1, B=math.inf, delta=0.05),
        dict(d0=1, alpha=1, U=1, B=1, delta=1.0),
    ):
        with pytest.raises(InvalidInputError):
            ProblemParams(**bad)
    with pytest.raises(InvalidInputError):
        ProblemParams(d0=4, alpha=1, U=1, B=1, delta=0.1).check_dimension(3)


def test_l2_error_bounded_by_strong_convexity(rng):
    # identity design: risk = ||theta - theta*||^2 with alpha = 1
    env = make_square_env(d=6, d0=2, noise_sd=0.1, seed=3)
    oracle = env.metrics
    for _ in range(100):
        theta = rng.normal(size=6)
        risk = oracle.excess_risk(theta).value
        assert oracle.l2_error(theta) ** 2 <= risk / env.alpha + 1e-12


def test_theta_star_is_read_only():
    env = make_square_env(d=4, d0=1, noise_sd=0.1, seed=0)
    with pytest.raises(ValueError):
        env.metrics.theta_star[0] = 1.0


def test_run_record_validation():
    record = RunRecord()
    with pytest.raises(InvalidInputError):
        record.append(0, 1.0, 0.1, 0.1, 0.1, 1.0, 0)
    record.append(1, 1.0, 0.1, 0.1, 0.1, 1.0, 0)
    with pytest.raises(InvalidInputError):
        record.append(1, 1.0, 0.1, 0.1, 0.2, 1.0, 0)
    with pytest.raises(InvalidInputError):
        record.append(2, 1.0, 0.1, 0.1, 0.05, 1.0, 0)
    with pytest.raises(InvalidInputError):
        record.append(2, 1.0, 0.1, 0.1, 0.2, 1.0, 0, extras=(1.0,))


def test_run_record_csv(datadir):
    record = RunRecord(seed=4, config_hash="abc", extra_columns=("risk_se",))
    record.append(1, 0.5, 0.25, 0.2, 0.25, 1.0, 0, extras=(0.01,))
    record.append(2, 0.25, 0.125, 0.1, 0.375, 0.5, 1, extras=(0.02,))
    fpath = datadir / "seed_4.csv"
    record.write_csv(fpath)
    lines = fpath.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) + ",risk_se"
    assert lines[1] == "1,0.5,0.25,0.2,0.25,1.0,0,0.01"
    assert len(lines) == 3
    loaded = RunRecord.read_csv(fpath)
    assert loaded.extra_columns == ("risk_se",)
    assert loaded.rows == record.rows
    assert np.array_equal(loaded.column("session"), [0, 1])


def test_run_record_metadata():
    record = RunRecord(seed=2, config_hash="f00", session_starts=[1, 40])
    meta = record.metadata
    assert meta["seed"] == 2
    assert meta["session_starts"] == [1, 40]
    assert meta["columns"][0] == "t"
