"""
l1-regularized dual averaging, the sparse online baseline.

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
import math

import numpy as np

from saew.core import DenseVector, InvalidInputError, as_vector


def rda_grid():
    """Hindsight grid 10^-5, ..., 10^3 for gamma, rho and lambda."""
    return [10.0**k for k in range(-5, 4)]


class RdaState:
    """Dual averaging with an l1 term and the enhanced sparsity offset rho.

    After t gradients, with lambda_t = lambda + gamma * rho / sqrt(t),

        theta_j = 0                                            if |gbar_j| <= lambda_t
        theta_j = -(sqrt(t) / gamma) * (gbar_j - lambda_t * sign(gbar_j))   otherwise
    """

    def __init__(self, d: int, gamma: float, rho: float = 0.0, lam: float = 0.0):
        if d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {d}")
        if not gamma > 0:
            raise InvalidInputError(f"gamma must be > 0, got {gamma}")
        if rho < 0 or lam < 0:
            raise InvalidInputError("rho and lambda must be >= 0")
        self.d = d
        self.gamma = float(gamma)
        self.rho = float(rho)
        self.lam = float(lam)
        self.t = 0
        self.grad_sum = np.zeros(d)
        self.theta = np.zeros(d)

    @property
    def grad_mean(self) -> DenseVector:
        if self.t == 0:
            return np.zeros(self.d)
        return self.grad_sum / self.t

    @property
    def threshold(self) -> float:
        if self.t == 0:
            return self.lam
        return self.lam + self.gamma * self.rho / math.sqrt(self.t)

    def predict(self) -> DenseVector:
        return self.theta.copy()

    def update(self, gradient) -> "RdaState":
        g = as_vector(gradient, self.d, "gradient")
        self.t += 1
        self.grad_sum += g
        gbar = self.grad_mean
        shrunk = np.sign(gbar) * np.maximum(np.abs(gbar) - self.threshold, 0.0)
        self.theta = -(math.sqrt(self.t) / self.gamma) * shrunk
        return self


def rda_step(state: RdaState, gradient) -> RdaState:
    return state.update(gradient)
