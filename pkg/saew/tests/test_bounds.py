import math

import numpy as np
import pytest

from saew.bounds import (
    ConfidenceSchedule,
    RiskConversionParams,
    a_prime,
    b_prime,
    delta_i,
    err_bound,
    gradient_bound_square,
    l2_error_bound,
    lemma3_min_radius,
    poisson_bound,
    radius_bound,
    regret_to_risk_bound,
    session_length_bound,
    strong_convexity_l2_bound,
    theorem1_bound,
    theorem1_constants,
    theorem2_bound,
    theorem3_bound,
    theorem3_constants,
)
from saew.core import InvalidInputError, ProblemParams
from saew.subroutine import RegretCertificate

UNIT = ProblemParams(d0=1, alpha=1.0, U=1.0, B=1.0, delta=0.05)
UNIT_CERT = RegretCertificate(1.0, 1.0)
ZERO_CERT = RegretCertificate(0.0, 0.0)


def close(x, y):
    return math.isclose(x, y, rel_tol=1e-9, abs_tol=1e-12)


def test_delta_i():
    assert close(delta_i(0.1, 1), 0.025)
    assert close(delta_i(0.04, 3), 0.0025)
    assert math.fsum(delta_i(0.3, i) for i in range(1, 10**5)) <= 0.3
    assert delta_i(0.3, 4) < delta_i(0.3, 3)
    with pytest.raises(InvalidInputError):
        delta_i(0.1, 0)
    with pytest.raises(InvalidInputError):
        delta_i(1.5, 1)


def test_a_prime_and_b_prime_examples():
    assert close(a_prime(0.0, 2, math.exp(-2)), 2.0)
    assert close(b_prime(0.0, 2, math.exp(-1)), 1.5)
    assert close(b_prime(0.0, 2, 1 - 1e-15), 0.5)


def test_window_one_is_clipped():
    assert a_prime(0.0, 1, 0.1) == a_prime(0.0, 2, 0.1)
    assert b_prime(1.0, 1, 0.1) == b_prime(1.0, 2, 0.1)
    with pytest.raises(InvalidInputError):
        a_prime(0.0, 0, 0.1)


def test_a_prime_b_prime_monotone():
    windows = [1, 2, 3, 10, 100, 10**4, 10**6]
    for f in (a_prime, b_prime):
        values = [f(0.5, w, 0.05) for w in windows]
        assert values == sorted(values)
        by_delta = [f(0.5, 50, delta) for delta in (0.9, 0.5, 0.1, 0.01)]
        assert by_delta == sorted(by_delta)


def test_theorem1_aggregate_a_prime_dominates():
    a, delta = 1.0, 0.05
    for T in list(range(2, 2000)) + [10**k for k in range(4, 7)]:
        aggregate, _ = theorem1_constants(a, 0.0, T, delta)
        per_session = a_prime(a, T, delta / (1 + 2 * math.log2(T)) ** 2)
        assert per_session <= aggregate + 1e-12


def test_err_bound():
    assert close(err_bound(25, 1, 2, 0.5), 6.0)
    assert close(err_bound(0, 3.0, 2.0, 0.7), 1.4)
    assert err_bound(9, 0, 0, 1) == 0
    with pytest.raises(InvalidInputError):
        err_bound(-1, 1, 1, 1)


def test_radius_bound():
    assert close(radius_bound(1, 1, 0, 2, 1, 1), 2.0)
    assert radius_bound(3, 1, 2, 1, 5, 0) == 0
    assert close(radius_bound(2, 1.5, 1, 0.5, 10, 3.0) * math.sqrt(2),
                 radius_bound(2, 1.5, 1, 0.5, 5, 3.0))


def test_radius_bound_clips_negative_err(caplog):
    assert radius_bound(1, 1, 0, 1, 1, -0.5) == 0
    assert "clipped" in caplog.text


def test_gradient_bound_square():
    assert gradient_bound_square(1, 1, 1) == 6
    assert gradient_bound_square(1, 1, 0) == 2
    assert close(gradient_bound_square(2, 3, 1) - gradient_bound_square(2, 2, 1), 4.0)


def test_session_length_bound():
    assert session_length_bound(1, 1, 1, 0) == 3
    assert session_length_bound(0, 2.0, 3.0, 5) == 1
    lead = session_length_bound(1, 1, 0, 6) - 1
    assert close(lead, 2**6)


def test_lemma3_min_radius():
    assert close(lemma3_min_radius(1, 1, 1, 0, 2), 2.0)
    assert lemma3_min_radius(1, 1, 1, 1, 10**12) < 1e-5


def test_poisson_bound():
    assert close(poisson_bound(0, 1, math.exp(-1)), 1.0)
    assert math.isclose(poisson_bound(3.0, 2.0, 1 - 1e-12), (math.e - 1) * 3.0, rel_tol=1e-9)


def test_theorem1_branches_cross():
    first = theorem1_bound(UNIT, UNIT_CERT, 1)
    a_p, b_p = theorem1_constants(1.0, 1.0, 1, 0.05)
    slow_at_one = a_p * math.sqrt(2) + 4 * b_p + 1 / 8
    assert close(first, slow_at_one)

    T = 10**6
    a_p, b_p = theorem1_constants(1.0, 1.0, T, 0.05)
    slow = a_p * math.sqrt(2 / T) + 4 * b_p / T + 1 / (8 * T)
    assert theorem1_bound(UNIT, UNIT_CERT, T) < slow


def test_theorem1_fast_rate():
    ratio = theorem1_bound(UNIT, UNIT_CERT, 2 * 10**6) / theorem1_bound(UNIT, UNIT_CERT, 10**6)
    assert 0.49 < ratio < 0.55


def test_theorem1_positive_finite():
    for T in (1, 2, 17, 1000, 10**8):
        value = theorem1_bound(UNIT, UNIT_CERT, T)
        assert math.isfinite(value) and value > 0


def test_theorem2_at_one():
    a_p, b_p = theorem1_constants(1.0, 1.0, 1, 0.05)
    fast = 4 * (1 + b_p) + 1 / 8
    slow = 4 * (a_p + b_p + 1)
    assert close(theorem2_bound(UNIT, UNIT_CERT, 1), min(fast, slow))


def test_theorem2_log_growth():
    T = 10**6
    ratio = theorem2_bound(UNIT, UNIT_CERT, T**2) / theorem2_bound(UNIT, UNIT_CERT, T)
    assert 1.9 < ratio < 2.5


def test_theorem2_dominates_theorem1_at_one(rng):
    for _ in range(500):
        U = float(10 ** rng.uniform(-3, 3))
        B = float(10 ** rng.uniform(-3, 3))
        # strong convexity over the ball forces alpha * U <= B
        params = ProblemParams(
            d0=int(rng.integers(1, 50)),
            alpha=float(B / U * rng.uniform(1e-3, 1)),
            U=U,
            B=B,
            delta=float(rng.uniform(0.05, 0.95)),
        )
        assert theorem2_bound(params, ZERO_CERT, 1) >= theorem1_bound(params, ZERO_CERT, 1)


def test_bounds_monotone(rng):
    for _ in range(100):
        base = dict(
            d0=int(rng.integers(1, 10)),
            alpha=float(rng.uniform(0.1, 2)),
            U=float(rng.uniform(0.1, 2)),
            B=float(rng.uniform(0.1, 2)),
            delta=float(rng.uniform(0.01, 0.5)),
        )
        T = int(rng.integers(1, 10**5))
        for bound in (theorem1_bound, theorem2_bound):
            ref = bound(ProblemParams(**base), UNIT_CERT, T)
            assert bound(ProblemParams(**{**base, "delta": base["delta"] * 1.5}), UNIT_CERT, T) <= ref
            assert bound(ProblemParams(**{**base, "B": base["B"] * 1.5}), UNIT_CERT, T) >= ref
    assert regret_to_risk_bound(1, 1, 10, 50, 0.1) <= regret_to_risk_bound(1, 1, 20, 50, 0.1)
    assert regret_to_risk_bound(1, 1, 10, 50, 0.2) <= regret_to_risk_bound(1, 1, 10, 50, 0.1)
    assert poisson_bound(2, 1, 0.2) <= poisson_bound(2, 1, 0.1)


def test_bounds_deterministic():
    assert theorem1_bound(UNIT, UNIT_CERT, 777) == theorem1_bound(UNIT, UNIT_CERT, 777)
    assert theorem2_bound(UNIT, UNIT_CERT, 777) == theorem2_bound(UNIT, UNIT_CERT, 777)


def test_bounds_need_sparsity_budget():
    with pytest.raises(InvalidInputError):
        theorem1_bound(ProblemParams(0, 1, 1, 1, 0.1), UNIT_CERT, 10)


def test_theorem3_constants():
    _, c_p = theorem3_constants(0.0, 0.0, math.e, 2.0)
    assert close(c_p, 1 + 9 * math.log(4))
    assert math.isclose(c_p, 13.4766, abs_tol=1e-4)


def test_theorem3_noise_free_limit():
    value = theorem3_bound(1, 1, 1, 1, 1, 0.0, UNIT_CERT, 10**6, 0.05)
    _, c_p = theorem3_constants(1.0, 1.0, 10**6, 0.05)
    fast = 4 * c_p**2 / 10**12 + 1 / 10**12
    assert close(value, fast)


def test_theorem3_noise_comparison():
    X, Y, U = 1.0, 1.0, 1.0
    B = gradient_bound_square(X, Y, U)
    cert, T, delta = UNIT_CERT, 10**7, 0.05
    sigma = 0.5 * B / X
    a_p, c_p = theorem3_constants(cert.a, cert.b, T, delta)
    with_sigma = theorem3_bound(X, Y, U, 1, 1.0, sigma, cert, T, delta)
    fast_with_b = X**2 * (B**2 / X**2 * a_p**2 / T + (Y + X * U) ** 2 * c_p**2 / T**2) + 1 / T**2
    assert with_sigma < fast_with_b


def test_regret_to_risk_matches_err_bound():
    for T in (1, 2, 5, 100, 10**5):
        for delta in (0.01, 0.05, 0.5):
            for grad_sq_sum in (0.0, 1.0, 37.5):
                via_err = 0.7 * err_bound(grad_sq_sum, a_prime(0, T, delta), b_prime(0, T, delta), 2.0)
                assert close(regret_to_risk_bound(0.7, 2.0, grad_sq_sum, T, delta), via_err)
                closed = 0.7 * math.sqrt(
                    2 * math.log((2 + max(math.log(T / 2), 0)) / (2 * delta)) * grad_sq_sum
                ) + (0.5 + math.log1p(0.5 * max(math.log(T / 2), 0)) - math.log(delta)) * 0.7 * 2.0
                assert close(regret_to_risk_bound(0.7, 2.0, grad_sq_sum, T, delta), closed)


def test_regret_to_risk_additive_only():
    value = regret_to_risk_bound(2.0, 1.0, 0.0, 8, 0.1)
    assert close(value, 2.0 * b_prime(0, 8, 0.1))


def test_confidence_schedule():
    schedule = ConfidenceSchedule(0.1, UNIT_CERT)
    assert close(schedule.session_delta(0), 0.1 / 4)
    assert close(schedule.a_prime(10, 2), a_prime(1.0, 10, 0.1 / 16))
    assert close(schedule.b_prime(10, 2), b_prime(1.0, 10, 0.1 / 16))
    assert schedule.partial_sum(10**5) <= 0.1
    assert close(schedule.partial_sum(2), 0.1 / 4 + 0.1 / 9)


def test_risk_conversion_params():
    conv = RiskConversionParams(T=100, delta=0.05)
    assert conv.gamma > 0
    assert close(conv.eta(2.0, 4.0), 1 / 8)
    last = conv.V
    for g in (0.5, 1.0, 0.0, 2.0):
        conv.observe(g)
        assert conv.V >= last
        last = conv.V
    expected = min(1 / 4.0, math.sqrt(2) * conv.gamma / conv.V) / 2.0
    assert close(conv.eta(2.0, 4.0), expected)
    assert RiskConversionParams(T=1, delta=0.5).gamma > 0


def test_l2_bounds():
    assert close(strong_convexity_l2_bound(4.0, 1.0), 2.0)
    assert strong_convexity_l2_bound(-1e-18, 1.0) == 0
    assert close(l2_error_bound(UNIT, UNIT_CERT, 50) ** 2, theorem1_bound(UNIT, UNIT_CERT, 50))


@pytest.mark.slow
def test_poisson_bound_coverage():
    rng = np.random.default_rng(11)
    trials, T, delta = 10**4, 100, 0.05
    sums = rng.uniform(0, 1, size=(trials, T)).sum(axis=1)
    bound = poisson_bound(T * 0.5, 1.0, delta)
    assert np.mean(sums > bound) <= delta


@pytest.mark.slow
def test_regret_to_risk_coverage():
    """Risk minus loss of a fixed prediction sequence under i.i.d. linear losses.

    Losses are l_t(theta) = <z_t, theta> with z_t uniform on [-1, 1]^d around
    mean m. The predictions lie in a ball of radius epsilon around the
    minimizer over the ball.
    """
    rng = np.random.default_rng(12)
    trials, T, d, delta, eps = 10**4, 100, 3, 0.05, 1.0
    m = np.array([0.3, -0.2, 0.1])
    predictions = rng.uniform(-1, 1, size=(T, d))
    predictions *= eps / np.abs(predictions).sum(axis=1, keepdims=True)
    reference = np.zeros(d)
    violations = 0
    for _ in range(trials):
        z = m + rng.uniform(-1, 1, size=(T, d))
        # risk gap minus observed linearized gap, a martingale
        gap = float(np.sum((predictions - reference) @ m) - np.sum(np.sum(z * (predictions - reference), axis=1)))
        grad_sq_sum = float(np.sum(np.max(np.abs(z), axis=1) ** 2))
        B = float(np.max(np.abs(m)) + 1)
        if gap > regret_to_risk_bound(eps, B, grad_sq_sum, T, delta):
            violations += 1
    assert violations / trials <= delta
