"""
Loss families and the synthetic environments built on them.

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

# pylint: disable=C0111,R0913,R0902
import math
from abc import abstractmethod
from typing import Callable, Iterator, Tuple

import numpy as np
from scipy.stats import norm, truncnorm

from saew.core import (
    DenseVector,
    Environment,
    InvalidInputError,
    RiskEstimate,
    RiskOracle,
    Sample,
    as_vector,
)

DESIGNS = ("gaussian", "truncated")
RISK_ORACLES = ("exact", "monte_carlo")

# rows drawn per refill of the sample buffer, part of the stream definition
SAMPLE_CHUNK = 256
HOLDOUT_CHUNK = 10_000
DEFAULT_HOLDOUT = 100_000


def _check_sparsity(d, d0):
    if not 1 <= d0 <= d:
        raise InvalidInputError(f"d0 must lie in [1, d={d}], got {d0}")


def _check_pair(theta, x):
    theta = as_vector(theta, name="theta")
    x = as_vector(x, len(theta), "x")
    return theta, x


def square_loss(theta, x, y) -> float:
    theta, x = _check_pair(theta, x)
    return float((y - x @ theta) ** 2)


def square_grad(theta, x, y) -> DenseVector:
    theta, x = _check_pair(theta, x)
    return 2 * x * (x @ theta - y)


def _check_level(alpha_q: float):
    if not 0 < alpha_q < 1:
        raise InvalidInputError(f"quantile level must lie in (0, 1), got {alpha_q}")


def pinball(u, alpha_q: float):
    """rho(u) = u * (alpha_q - 1[u < 0]), elementwise."""
    u = np.asarray(u, dtype=np.float64)
    return u * (alpha_q - (u < 0).astype(np.float64))


def pinball_loss(theta, x, y, alpha_q: float) -> float:
    _check_level(alpha_q)
    theta, x = _check_pair(theta, x)
    return float(pinball(y - x @ theta, alpha_q))


def pinball_subgrad(theta, x, y, alpha_q: float) -> DenseVector:
    """Subgradient in theta, at the kink u = 0 the factor is alpha_q - 1."""
    _check_level(alpha_q)
    theta, x = _check_pair(theta, x)
    u = y - x @ theta
    return -x * (alpha_q - float(u <= 0))


def gaussian_pinball_risk(mu: float, s: float, alpha_q: float) -> float:
    """E[rho(u)] for u ~ N(mu, s^2)."""
    _check_level(alpha_q)
    if s < 0:
        raise InvalidInputError(f"scale must be >= 0, got {s}")
    if s == 0:
        return float(pinball(mu, alpha_q))
    z = mu / s
    return alpha_q * mu - mu * norm.cdf(-z) + s * norm.pdf(z)


def sparse_unit_l1(d: int, d0: int, rng: np.random.Generator) -> DenseVector:
    """d0 standard normal coordinates at random positions, rescaled to unit l1 norm."""
    theta = np.zeros(d)
    if d0 == 0:
        return theta
    support = rng.choice(d, size=d0, replace=False)
    values = rng.standard_normal(d0)
    theta[support] = values / np.sum(np.abs(values))
    return theta


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


class LinearEnvironment(Environment):
    """y = x^T theta_gen + noise with i.i.d. Gaussian or truncated Gaussian rows.

    The seed is split into three independent streams: the generating
    parameter, the online sample stream and the holdout used by Monte-Carlo
    risk estimates. A separate theta_seed pins the generating parameter
    while the streams still follow seed.
    """

    loss_family = "linear"

    def __init__(self, d, d0, noise_sd, seed=0, design="gaussian", clip_x=3.0,
                 intercept=False, holdout=DEFAULT_HOLDOUT, theta_seed=None):
        super().__init__(d + 1 if intercept else d)
        _check_sparsity(d, d0)
        if noise_sd < 0:
            raise InvalidInputError(f"noise_sd must be >= 0, got {noise_sd}")
        if design not in DESIGNS:
            raise InvalidInputError(f"design must be one of {DESIGNS}, got {design!r}")
        if design == "truncated" and not clip_x > 0:
            raise InvalidInputError(f"clip_x must be > 0, got {clip_x}")
        if holdout < 2:
            raise InvalidInputError(f"holdout needs at least 2 samples, got {holdout}")
        self.covariates = d
        self.d0 = d0
        self.noise_sd = float(noise_sd)
        self.design = design
        self.clip_x = float(clip_x)
        self.intercept = intercept
        self.holdout = int(holdout)
        theta_seq, stream_seq, holdout_seq = _seed_sequence(seed).spawn(3)
        if theta_seed is not None:
            theta_seq = _seed_sequence(theta_seed)
        self.holdout_seed = holdout_seq
        generated = sparse_unit_l1(d, d0, np.random.default_rng(theta_seq))
        if intercept:
            generated = np.concatenate([[0.0], generated])
        self.theta_gen = generated
        self._rng = np.random.default_rng(stream_seq)
        self._buffer_x = np.empty((0, self.d))
        self._buffer_y = np.empty(0)
        self._pos = 0

    @property
    def design_variance(self) -> float:
        """Per-coordinate variance of the covariates, the covariance's smallest eigenvalue."""
        if self.design == "truncated":
            return float(truncnorm.var(-self.clip_x, self.clip_x))
        return 1.0

    @property
    def noise_variance(self) -> float:
        if self.design == "truncated":
            return self.noise_sd**2 * float(truncnorm.var(-self.clip_x, self.clip_x))
        return self.noise_sd**2

    @property
    def X(self) -> float:
        """Almost sure bound on ||x||_inf, infinite for the Gaussian design."""
        if self.design == "truncated":
            return max(self.clip_x, 1.0) if self.intercept else self.clip_x
        return math.inf

    @property
    def Y(self) -> float:
        """Almost sure bound on |y|, infinite for the Gaussian design."""
        if self.design == "truncated":
            return self.X * float(np.sum(np.abs(self.theta_gen))) + self.clip_x * self.noise_sd
        return math.inf

    def _normals(self, rng, size):
        if self.design == "truncated":
            return truncnorm.rvs(-self.clip_x, self.clip_x, size=size, random_state=rng)
        return rng.standard_normal(size)

    def batch(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        x = self._normals(rng, (n, self.covariates))
        if self.intercept:
            x = np.hstack([np.ones((n, 1)), x])
        noise = np.zeros(n)
        if self.noise_sd > 0:
            noise = self.noise_sd * self._normals(rng, n)
        return x, x @ self.theta_gen + noise

    def draw(self) -> Sample:
        if self._pos >= len(self._buffer_y):
            self._buffer_x, self._buffer_y = self.batch(SAMPLE_CHUNK, self._rng)
            self._pos = 0
        sample = Sample(self._buffer_x[self._pos].copy(), float(self._buffer_y[self._pos]))
        self._pos += 1
        return sample

    def holdout_batches(self, n=None) -> Iterator[Tuple[np.ndarray, np.ndarray]]:
        """Fixed holdout, regenerated from its own seed in chunks on every call."""
        n = self.holdout if n is None else n
        rng = np.random.default_rng(self.holdout_seed)
        done = 0
        while done < n:
            size = min(HOLDOUT_CHUNK, n - done)
            yield self.batch(size, rng)
            done += size

    @abstractmethod
    def batch_loss(self, predictions, y) -> np.ndarray:
        """Per-row loss of scalar predictions against responses y."""

    def predictor_excess_risk(self, predict_batch: Callable[[np.ndarray], np.ndarray],
                              n=None) -> RiskEstimate:
        """Paired holdout estimate of E[loss(f)] - E[loss(theta*)] for any predictor f."""
        theta_star = self.metrics.theta_star
        diffs = []
        for x, y in self.holdout_batches(n):
            diffs.append(self.batch_loss(predict_batch(x), y) - self.batch_loss(x @ theta_star, y))
        diff = np.concatenate(diffs)
        return RiskEstimate(float(np.mean(diff)), float(np.std(diff, ddof=1) / math.sqrt(len(diff))))


class SquareRiskOracle(RiskOracle):
    """Risk(theta) = v * ||theta - theta*||^2 for isotropic designs of variance v."""

    def __init__(self, theta_star, design_variance: float = 1.0):
        super().__init__(theta_star)
        self.design_variance = design_variance

    def excess_risk(self, theta) -> RiskEstimate:
        diff = as_vector(theta, len(self.theta_star), "theta") - self.theta_star
        return RiskEstimate(self.design_variance * float(diff @ diff))


class SquareEnvironment(LinearEnvironment):
    loss_family = "square"

    def __init__(self, d, d0, noise_sd, seed=0, design="gaussian", clip_x=3.0,
                 holdout=DEFAULT_HOLDOUT, theta_seed=None):
        super().__init__(d, d0, noise_sd, seed, design, clip_x, False, holdout, theta_seed)
        self._metrics = SquareRiskOracle(self.theta_gen, self.design_variance)

    @property
    def alpha(self) -> float:
        return self.design_variance

    @property
    def metrics(self) -> SquareRiskOracle:
        return self._metrics

    def loss(self, theta, sample: Sample) -> float:
        return square_loss(theta, sample.x, sample.y)

    def gradient(self, theta, sample: Sample) -> DenseVector:
        return square_grad(theta, sample.x, sample.y)

    def batch_loss(self, predictions, y) -> np.ndarray:
        return (np.asarray(y) - np.asarray(predictions)) ** 2


class GaussianPinballRiskOracle(RiskOracle):
    """Exact pinball excess risk under the Gaussian design with an intercept at index 0.

    The residual at theta is N(mu, s^2) with mu the intercept gap and
    s^2 = sigma^2 + ||slope gap||^2.
    """

    def __init__(self, theta_star, theta_gen, sigma: float, alpha_q: float):
        super().__init__(theta_star)
        self.theta_gen = as_vector(theta_gen, len(self.theta_star), "theta_gen")
        self.sigma = sigma
        self.alpha_q = alpha_q
        self._floor = self.risk(self.theta_star)

    def risk(self, theta) -> float:
        gap = self.theta_gen - as_vector(theta, len(self.theta_star), "theta")
        s = math.sqrt(self.sigma**2 + float(gap[1:] @ gap[1:]))
        return gaussian_pinball_risk(float(gap[0]), s, self.alpha_q)

    def excess_risk(self, theta) -> RiskEstimate:
        return RiskEstimate(max(self.risk(theta) - self._floor, 0.0))


class MonteCarloRiskOracle(RiskOracle):
    """Paired difference of losses on the environment's fixed holdout."""

    def __init__(self, theta_star, env: LinearEnvironment):
        super().__init__(theta_star)
        self._env = env

    def excess_risk(self, theta) -> RiskEstimate:
        theta = as_vector(theta, len(self.theta_star), "theta")
        return self._env.predictor_excess_risk(lambda x: x @ theta)


class QuantileEnvironment(LinearEnvironment):
    """Pinball loss at level alpha_q on a Gaussian design with a constant covariate.

    Coordinate 0 is the intercept. The risk minimizer is the generating
    parameter with its intercept shifted by the noise's alpha_q-quantile.
    """

    loss_family = "quantile"

    def __init__(self, d, d0, alpha_q, noise_sd, seed=0, risk_oracle="exact",
                 holdout=DEFAULT_HOLDOUT, theta_seed=None):
        _check_level(alpha_q)
        if risk_oracle not in RISK_ORACLES:
            raise InvalidInputError(f"risk_oracle must be one of {RISK_ORACLES}, got {risk_oracle!r}")
        super().__init__(d, d0, noise_sd, seed, "gaussian", 3.0, True, holdout, theta_seed)
        self.alpha_q = alpha_q
        self.risk_oracle = risk_oracle
        theta_star = self.theta_gen.copy()
        theta_star[0] += self.intercept_shift
        if risk_oracle == "exact":
            self._metrics = GaussianPinballRiskOracle(theta_star, self.theta_gen, noise_sd, alpha_q)
        else:
            self._metrics = MonteCarloRiskOracle(theta_star, self)

    @property
    def intercept_shift(self) -> float:
        if self.noise_sd == 0:
            return 0.0
        return self.noise_sd * float(norm.ppf(self.alpha_q))

    @property
    def metrics(self) -> RiskOracle:
        return self._metrics

    def loss(self, theta, sample: Sample) -> float:
        return pinball_loss(theta, sample.x, sample.y, self.alpha_q)

    def gradient(self, theta, sample: Sample) -> DenseVector:
        return pinball_subgrad(theta, sample.x, sample.y, self.alpha_q)

    def batch_loss(self, predictions, y) -> np.ndarray:
        return pinball(np.asarray(y) - np.asarray(predictions), self.alpha_q)


def make_square_env(d, d0, noise_sd, seed=0, design="gaussian", clip_x=3.0,
                    holdout=DEFAULT_HOLDOUT, theta_seed=None) -> SquareEnvironment:
    _check_sparsity(d, d0)
    return SquareEnvironment(d, d0, noise_sd, seed, design, clip_x, holdout, theta_seed)


def make_quantile_env(d, d0, alpha_q, noise_sd, seed=0, risk_oracle="exact",
                      holdout=DEFAULT_HOLDOUT, theta_seed=None) -> QuantileEnvironment:
    _check_sparsity(d, d0)
    return QuantileEnvironment(d, d0, alpha_q, noise_sd, seed, risk_oracle, holdout, theta_seed)


def true_excess_risk(theta, env: Environment) -> RiskEstimate:
    return env.metrics.excess_risk(theta)
