"""
Online convex optimization inside an l1-ball.

A subroutine predicts a point of its ball, observes the gradient of the
current loss at that point and guarantees a linearized regret of at most
radius * (a * sqrt(sum ||g_t||_inf^2) + b * B) against every point of the
ball. The shipped learner runs exponential weights over the 2d corners
center +/- radius * e_j.

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

# pylint: disable=C0111
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from saew.core import DenseVector, InvalidInputError, L1Ball, as_vector

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RegretCertificate:
    a: float
    b: float

    def __post_init__(self):
        for name in ("a", "b"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise InvalidInputError(f"certificate {name} must be finite and >= 0")
            object.__setattr__(self, name, value)

    def regret_bound(self, radius: float, grad_sq_sum: float, B: float) -> float:
        return radius * (self.a * math.sqrt(grad_sq_sum) + self.b * B)


class Subroutine(ABC):
    """An online learner confined to a fixed l1-ball."""

    kind = "abstract"

    def __init__(self, ball: L1Ball, B: float):
        if not B > 0:
            raise InvalidInputError(f"gradient bound B must be > 0, got {B}")
        self.ball = ball
        self.B = float(B)
        self.steps = 0

    @property
    def dimension(self) -> int:
        return self.ball.dimension

    @abstractmethod
    def predict(self) -> DenseVector: ...

    @abstractmethod
    def update(self, gradient) -> "Subroutine": ...

    @abstractmethod
    def certificate(self) -> RegretCertificate: ...

    @abstractmethod
    def to_dict(self) -> dict: ...

    @classmethod
    @abstractmethod
    def from_dict(cls, data: dict) -> "Subroutine": ...


def eg_certificate(d: int) -> RegretCertificate:
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    log_n = math.log(2 * d)
    return RegretCertificate(a=2 * math.sqrt(2 * log_n), b=2 + 2 * log_n)


class ExponentiatedGradient(Subroutine):
    """Exponential weights over the corners of an l1-ball.

    Weights are kept in lazy form. With G the cumulative gradient, corner
    j+ has log-weight -s * G_j and corner j- has log-weight +s * G_j, where

        s = radius * eta = min(1 / B_hat, sqrt(ln(2d) / V^2))

    V^2 is the sum of squared sup-norms seen so far and B_hat is the declared
    B, raised to the running maximum sup-norm if a gradient ever exceeds it.
    s only decreases, so the weights are those of exponential weights with a
    nonincreasing learning rate. With gradients bounded by B this keeps the
    corner regret below radius * (a * V + b * B) for (a, b) = eg_certificate(d)
    under the uniform prior.
    """

    kind = "eg"

    def __init__(self, ball: L1Ball, B: float, prior=None):
        super().__init__(ball, B)
        d = ball.dimension
        self.grad_sum = np.zeros(d)
        self.grad_sq_sum = 0.0
        self.b_hat = self.B
        if prior is None:
            self.log_prior = np.zeros(2 * d)
        else:
            prior = as_vector(prior, 2 * d, "prior")
            if np.any(prior <= 0):
                raise InvalidInputError("prior weights must be strictly positive")
            self.log_prior = np.log(prior / np.sum(prior))

    @property
    def scaled_rate(self) -> float:
        rate = 1.0 / self.b_hat
        if self.grad_sq_sum > 0:
            rate = min(rate, math.sqrt(math.log(2 * self.dimension) / self.grad_sq_sum))
        return rate

    @property
    def learning_rate(self) -> float:
        if self.ball.radius == 0:
            return math.inf
        return self.scaled_rate / self.ball.radius

    @property
    def weights(self) -> DenseVector:
        """Corner weights, first the d corners center + r e_j then center - r e_j."""
        step = self.scaled_rate * self.grad_sum
        return softmax(self.log_prior + np.concatenate([-step, step]))

    def predict(self) -> DenseVector:
        w = self.weights
        d = self.dimension
        return self.ball.center + self.ball.radius * (w[:d] - w[d:])

    def update(self, gradient) -> "ExponentiatedGradient":
        g = as_vector(gradient, self.dimension, "gradient")
        sup = float(np.max(np.abs(g)))
        if sup > self.b_hat:
            logger.warning(
                "gradient sup-norm %.4g exceeds declared bound B=%.4g", sup, self.B
            )
        self.b_hat = max(self.b_hat, sup)
        self.grad_sum += g
        self.grad_sq_sum += sup**2
        self.steps += 1
        return self

    def certificate(self) -> RegretCertificate:
        return eg_certificate(self.dimension)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "center": self.ball.center.tolist(),
            "radius": self.ball.radius,
            "B": self.B,
            "b_hat": self.b_hat,
            "grad_sum": self.grad_sum.tolist(),
            "grad_sq_sum": self.grad_sq_sum,
            "steps": self.steps,
            "log_prior": self.log_prior.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExponentiatedGradient":
        sub = cls(L1Ball(data["center"], data["radius"]), data["B"])
        sub.b_hat = float(data["b_hat"])
        sub.grad_sum = as_vector(data["grad_sum"], sub.dimension, "grad_sum")
        sub.grad_sq_sum = float(data["grad_sq_sum"])
        sub.steps = int(data["steps"])
        sub.log_prior = np.asarray(data["log_prior"], dtype=np.float64)
        return sub


SUBROUTINES = {ExponentiatedGradient.kind: ExponentiatedGradient}


def subroutine_from_dict(data: dict) -> Subroutine:
    try:
        sub_cls = SUBROUTINES[data["kind"]]
    except KeyError as error:
        raise InvalidInputError(f"unknown subroutine kind {data.get('kind')!r}") from error
    return sub_cls.from_dict(data)


def eg_init(ball: L1Ball, B: float, prior=None) -> ExponentiatedGradient:
    return ExponentiatedGradient(ball, B, prior)


def eg_predict(state: ExponentiatedGradient) -> DenseVector:
    return state.predict()


def eg_update(state: ExponentiatedGradient, gradient) -> ExponentiatedGradient:
    return state.update(gradient)


def corner_regret(gradients, predictions, ball: L1Ball) -> float:
    """Linearized regret of a prediction sequence against the best corner of ball.

    sum_t <g_t, prediction_t> - min_corner sum_t <g_t, corner>
    """
    gradients = np.atleast_2d(np.asarray(gradients, dtype=np.float64))
    predictions = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    if gradients.shape != predictions.shape or gradients.shape[1] != ball.dimension:
        raise InvalidInputError("gradients and predictions must both be (T, d)")
    total = gradients.sum(axis=0)
    learner = float(np.sum(gradients * (predictions - ball.center)))
    return learner + ball.radius * float(np.max(np.abs(total)))
