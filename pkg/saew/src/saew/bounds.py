"""
Closed-form constants and bound evaluators.

Every function here is a pure function of its arguments. Logarithms are
natural except where log2 is written explicitly.

Copyright (C) 2024 The saew-toolkit authors

This program is free software: you can redistribute it and/or modify
it under the terms of the GNU General Public License as published by
the Free Software Foundation, either version 3 of the License, or
(at your option) any later version.

This program is distributed in the hope that it will be useful,
but WITHOUT ANY WARRANTY; without even the implied warranty of
MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
GNU General Public License for more details.
You should have received a copy of the GNU General Public License
along with this program.  If not, see <https://www.gnu.org/licenses/>.
"""

# pylint: disable=C0111,R0913
import logging
import math
from dataclasses import dataclass, field

from saew.core import InvalidInputError, ProblemParams
from saew.subroutine import RegretCertificate

logger = logging.getLogger(__name__)

# how each traced risk bound relates to the excess risk it bounds
BOUND_CONSTANTS = {
    "theorem1_bound": "exact",
    "theorem2_bound": "exact",
    "theorem3_bound": "up to a universal multiplicative constant",
}


def _check_delta(delta: float):
    if not 0 < delta < 1:
        raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")


def _check_window(window: int):
    if window < 1:
        raise InvalidInputError(f"window must be >= 1, got {window}")


def _check_d0(d0: int):
    if d0 < 1:
        raise InvalidInputError("risk bounds need a sparsity budget d0 >= 1")


def log_log_term(window: float) -> float:
    """log(1 + log(window / 2) / 2) with the inner log clipped at 0.

    window < 2 makes log(window / 2) negative, clipping keeps the
    term at its window=2 value of 0.
    """
    return math.log1p(0.5 * max(math.log(window / 2), 0.0))


def delta_i(delta: float, i: int) -> float:
    _check_delta(delta)
    if i < 1:
        raise InvalidInputError(f"session index must be >= 1, got {i}")
    return delta / (i + 1) ** 2


def a_prime(a: float, window: int, delta_next: float) -> float:
    _check_window(window)
    _check_delta(delta_next)
    inner = log_log_term(window) - math.log(delta_next)
    if inner <= 0:
        raise InvalidInputError("non-positive value under the square root")
    return a + math.sqrt(2) * math.sqrt(inner)


def b_prime(b: float, window: int, delta_next: float) -> float:
    _check_window(window)
    _check_delta(delta_next)
    return b + 0.5 + log_log_term(window) - math.log(delta_next)


def err_bound(grad_sq_sum: float, a_p: float, b_p: float, B: float) -> float:
    if grad_sq_sum < 0:
        raise InvalidInputError(f"gradient square sum must be >= 0, got {grad_sq_sum}")
    if not all(math.isfinite(v) for v in (grad_sq_sum, a_p, b_p, B)):
        raise InvalidInputError("err_bound inputs must be finite")
    return a_p * math.sqrt(grad_sq_sum) + b_p * B


def radius_bound(d0: int, U: float, i: int, alpha: float, window: int, err: float) -> float:
    _check_window(window)
    if err < 0:
        logger.warning("negative error bound %.4g clipped to 0", err)
        err = 0.0
    return 2 * math.sqrt(2 * d0 * U * 2 ** (-i / 2) * err / (alpha * window))


def session_gamma(d0: int, B: float, alpha: float, U: float) -> float:
    """2^4 d0 B / (alpha U), the constant governing session lengths."""
    return 16 * d0 * B / (alpha * U)


def session_length_bound(gamma: float, a_p: float, b_p: float, j: int) -> float:
    if j < 0:
        raise InvalidInputError(f"session index must be >= 0, got {j}")
    return 1 + 2**j * gamma**2 * a_p**2 + 2 ** (j / 2) * gamma * b_p


def lemma3_min_radius(U: float, gamma: float, a_p: float, b_p: float, t: int) -> float:
    if t < 1:
        raise InvalidInputError(f"t must be >= 1, got {t}")
    return U * (math.sqrt(2) * gamma * a_p / math.sqrt(t) + (2 + 4 * gamma * b_p) / t)


def theorem1_constants(a: float, b: float, T: int, delta: float):
    """Aggregate (a', b') valid uniformly over the sessions up to time T."""
    _check_delta(delta)
    if T < 1:
        raise InvalidInputError(f"T must be >= 1, got {T}")
    loglog = math.log1p(3 * math.log(T))
    a_p = a + math.sqrt(6 * loglog - 2 * math.log(delta))
    b_p = b + 0.5 + 3 * loglog - math.log(delta)
    return a_p, b_p


def theorem1_bound(params: ProblemParams, cert: RegretCertificate, T: int) -> float:
    _check_d0(params.d0)
    a_p, b_p = theorem1_constants(cert.a, cert.b, T, params.delta)
    d0, alpha, U, B = params.d0, params.alpha, params.U, params.B
    slow = U * B * (a_p * math.sqrt(2 / T) + 4 * b_p / T) + alpha * U**2 / (8 * d0 * T)
    fast = (d0 * B**2 / alpha) * (2**7 * a_p**2 / T + 2**11 * b_p**2 / T**2) + (
        2 * alpha * U**2 / (d0 * T**2)
    )
    return min(slow, fast)


def theorem2_bound(params: ProblemParams, cert: RegretCertificate, T: int) -> float:
    _check_d0(params.d0)
    a_p, b_p = theorem1_constants(cert.a, cert.b, T, params.delta)
    d0, alpha, U, B = params.d0, params.alpha, params.U, params.B
    slow = 4 * U * B * (a_p * math.sqrt(T) + b_p + 1)
    fast = (
        2**5 * d0 * B**2 / alpha * a_p**2 * math.log2(T)
        + 4 * U * B * (1 + b_p)
        + alpha * U**2 / (8 * d0)
    )
    return min(slow, fast)


def l2_error_bound(params: ProblemParams, cert: RegretCertificate, T: int) -> float:
    return math.sqrt(theorem1_bound(params, cert, T) / params.alpha)


def strong_convexity_l2_bound(excess_risk: float, alpha: float) -> float:
    if alpha <= 0:
        raise InvalidInputError(f"alpha must be > 0, got {alpha}")
    return math.sqrt(max(excess_risk, 0.0) / alpha)


def gradient_bound_square(X: float, Y: float, U: float) -> float:
    if X <= 0 or Y < 0 or U < 0:
        raise InvalidInputError("X must be > 0 and Y, U >= 0")
    return 2 * X * (Y + 2 * X * U)


def theorem3_constants(a: float, b: float, T: int, delta: float):
    """(a', c') for the square-loss bound.

    delta only enters through log(2 / delta), so any delta > 0 evaluates.
    """
    if delta <= 0:
        raise InvalidInputError(f"delta must be > 0, got {delta}")
    if T < 1:
        raise InvalidInputError(f"T must be >= 1, got {T}")
    loglog = math.log1p(3 * math.log(T))
    log_term = math.log(2 / delta)
    a_p = 2 * a + 2 * math.sqrt(6 * loglog + 2 * log_term)
    c_p = 1 + 3 * b + 4 * a**2 + 9 * loglog + 3 * log_term
    return a_p, c_p


def theorem3_bound(X, Y, U, d0, alpha, sigma, cert: RegretCertificate, T, delta) -> float:
    """Square-loss risk bound with sigma^2 = E[loss(theta*)].

    The result holds up to a universal multiplicative constant, use it for
    shape and scaling comparisons only.
    """
    _check_delta(delta)
    _check_d0(d0)
    a_p, c_p = theorem3_constants(cert.a, cert.b, T, delta)
    spread = Y + X * U
    slow = U * X * (sigma * a_p / math.sqrt(T) + spread * c_p / T) + alpha * U**2 / (d0 * T)
    fast = (X**2 * d0 / alpha) * (sigma**2 * a_p**2 / T + spread**2 * c_p**2 / T**2) + (
        alpha * U**2 / (d0 * T**2)
    )
    return min(slow, fast)


def poisson_bound(sum_conditional_means: float, B: float, delta: float) -> float:
    """High-probability bound on a sum of nonnegative increments bounded by B."""
    _check_delta(delta)
    if B <= 0:
        raise InvalidInputError(f"B must be > 0, got {B}")
    return (math.e - 1) * sum_conditional_means + B * math.log(1 / delta)


def regret_to_risk_bound(epsilon: float, B: float, grad_sq_sum: float, T: int, delta: float) -> float:
    """Bound on cumulative risk minus cumulative loss-linearization over T steps.

    Same expression as err_bound with the martingale constants a_prime(0, ...)
    and b_prime(0, ...), scaled by the diameter parameter epsilon.
    """
    if T < 1:
        raise InvalidInputError(f"T must be >= 1, got {T}")
    return epsilon * err_bound(grad_sq_sum, a_prime(0.0, T, delta), b_prime(0.0, T, delta), B)


@dataclass(frozen=True)
class ConfidenceSchedule:
    """Per-session confidence levels delta_i = delta / (i + 1)^2.

    Session i (counted from 0) consumes delta_{i+1}, so the failure
    probabilities of all sessions sum to less than delta.
    """

    delta: float
    cert: RegretCertificate

    def __post_init__(self):
        _check_delta(self.delta)

    def session_delta(self, i: int) -> float:
        return delta_i(self.delta, i + 1)

    def a_prime(self, window: int, i: int) -> float:
        return a_prime(self.cert.a, window, self.session_delta(i))

    def b_prime(self, window: int, i: int) -> float:
        return b_prime(self.cert.b, window, self.session_delta(i))

    def partial_sum(self, n: int) -> float:
        return math.fsum(delta_i(self.delta, i) for i in range(1, n + 1))


@dataclass
class RiskConversionParams:
    """Tuning of the exponentially weighted martingale in the regret to risk step.

    eta_t = min(1 / B, c * Gamma / V_{t-1}) / epsilon with c = sqrt(2).
    """

    T: int
    delta: float
    c: float = math.sqrt(2)
    grad_sq_sum: float = field(default=0.0)

    def __post_init__(self):
        _check_delta(self.delta)
        if self.T < 1:
            raise InvalidInputError(f"T must be >= 1, got {self.T}")

    @property
    def gamma(self) -> float:
        inner = math.log1p(max(math.log(math.sqrt(self.T) / self.c), 0.0))
        return math.sqrt(inner - math.log(self.delta))

    @property
    def V(self) -> float:
        return math.sqrt(self.grad_sq_sum)

    def observe(self, gradient_sup_norm: float):
        if not math.isfinite(gradient_sup_norm) or gradient_sup_norm < 0:
            raise InvalidInputError("gradient sup-norm must be finite and >= 0")
        self.grad_sq_sum += gradient_sup_norm**2

    def eta(self, epsilon: float, B: float) -> float:
        if epsilon <= 0 or B <= 0:
            raise InvalidInputError("epsilon and B must be > 0")
        rate = 1 / B
        if self.grad_sq_sum > 0:
            rate = min(rate, self.c * self.gamma / self.V)
        return rate / epsilon
