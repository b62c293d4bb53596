"""
Parameter-free regression through doubling sessions.

During doubling session j (samples 2^j to 2^(j+1) - 1) the predictions are an
exponentially weighted mix of clipped linear predictors, one per grid entry
(d0, alpha, U, B), each the frozen estimator of an accelerated run on the
samples seen before 2^j. Meanwhile the runs for the next grid advance on the
incoming samples. The estimator output during session j is the average of
the mixed predictors of session j - 1.

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

# pylint: disable=C0111,R0902,R0913
import csv
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.special import softmax

from saew.core import DenseVector, InvalidInputError, ProblemParams, as_vector
from saew.saew import SaewState
from saew.subroutine import ExponentiatedGradient

logger = logging.getLogger(__name__)

SUMMARY_HEADER = ("j", "grid_size", "best_candidate", "meta_risk", "best_risk")


class BudgetExceededError(RuntimeError):
    """The grid times the stream length exceeds the configured compute budget."""


def clip(x, Y: float):
    if not Y > 0:
        raise InvalidInputError(f"clipping range must be > 0, got {Y}")
    if np.ndim(x) == 0:
        return max(-Y, min(float(x), Y))
    return np.clip(x, -Y, Y)


@dataclass(frozen=True)
class GridEntry:
    d0: int
    alpha: Optional[float] = None
    U: Optional[float] = None
    B: Optional[float] = None

    @property
    def is_null(self) -> bool:
        return self.d0 == 0

    @property
    def label(self) -> str:
        if self.is_null:
            return "d0=0"
        return f"d0={self.d0};alpha={self.alpha:g};U={self.U:g};B={self.B:g}"


@dataclass
class HyperGrid:
    j: int
    d: int
    Y: float
    entries: List[GridEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


def _ceil_log2(x: float) -> int:
    return math.ceil(math.log2(x))


def build_grid(j: int, d: int, Y: float, max_grid_level: Optional[int] = None) -> HyperGrid:
    """Power-of-two grid for doubling session j.

    d0 in {0} U {2^k, k = 0..ceil(log2 d)}, U and B in
    {2^k, k = -2j..2j + ceil(2 log2 Y)} and, per (d0, B), alpha in
    {2^k, k = -2j + ceil(log2(B d0 / Y^2))..j + ceil(log2 d0)}.
    max_grid_level caps the j used to widen the ranges.
    """
    if j < 0 or d < 1 or not Y > 0:
        raise InvalidInputError("build_grid needs j >= 0, d >= 1 and Y > 0")
    level = j if max_grid_level is None else min(j, max_grid_level)
    grid = HyperGrid(j, d, Y, [GridEntry(0)])
    scale_top = 2 * level + _ceil_log2(Y**2)
    scales = [2.0**k for k in range(-2 * level, scale_top + 1)]
    for kd in range(_ceil_log2(d) + 1):
        d0 = 2**kd
        for U in scales:
            for B in scales:
                low = -2 * level + _ceil_log2(B * d0 / Y**2)
                high = level + kd
                for ka in range(low, high + 1):
                    grid.entries.append(GridEntry(d0, 2.0**ka, U, B))
    return grid


def grid_cost(T: int, d: int, Y: float, max_grid_level: Optional[int] = None) -> int:
    """Candidate steps the budget guard plans for while T samples are served.

    Doubling session j opens once 2^j - 1 samples are seen and plans for
    every live candidate of grid j + 1 to reach time 2^(j+1) - 1.
    """
    cost = 0
    j = 0
    while 2**j - 1 <= T:
        live = sum(1 for e in build_grid(j + 1, d, Y, max_grid_level) if not e.is_null)
        cost += live * (2 ** (j + 1) - 1)
        j += 1
    return cost


class Aggregator(ABC):
    @property
    @abstractmethod
    def weights(self) -> DenseVector: ...

    @abstractmethod
    def update(self, losses) -> "Aggregator": ...

    def predict(self, predictions) -> float:
        return float(self.weights @ np.asarray(predictions, dtype=np.float64))


class ExpWeightsAggregator(Aggregator):
    """Exponential weights on cumulative losses with a fixed learning rate."""

    def __init__(self, n: int, eta: float):
        if n < 1 or not eta > 0:
            raise InvalidInputError("aggregator needs n >= 1 experts and eta > 0")
        self.eta = eta
        self.cum_loss = np.zeros(n)

    @property
    def weights(self) -> DenseVector:
        return softmax(-self.eta * self.cum_loss)

    def update(self, losses) -> "ExpWeightsAggregator":
        self.cum_loss += as_vector(losses, len(self.cum_loss), "losses")
        return self


class AveragePredictor:
    """x -> sum_p w_p * clip(x^T theta_p, Y), vectorized over rows of x."""

    def __init__(self, weights, thetas, Y: float):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        self.Y = Y

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.clip(x @ self.thetas.T, -self.Y, self.Y) @ self.weights
        return float(out) if x.ndim == 1 else out


def zero_predictor(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.0 if x.ndim == 1 else np.zeros(x.shape[0])


@dataclass
class SessionSummary:
    j: int
    grid_size: int
    best_candidate: str
    meta_risk: float
    best_risk: float


def write_summaries_csv(fpath, summaries: List[SessionSummary]):
    with open(fpath, "w", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(SUMMARY_HEADER)
        for s in summaries:
            writer.writerow([s.j, s.grid_size, s.best_candidate, repr(s.meta_risk), repr(s.best_risk)])


class _Candidate:
    """One accelerated run on the square loss, or the null predictor."""

    def __init__(self, entry: GridEntry, d: int, delta: float, subroutine_factory):
        self.entry = entry
        self.state = None
        if not entry.is_null:
            params = ProblemParams(min(entry.d0, d), entry.alpha, entry.U, entry.B, delta)
            self.state = SaewState(params, d, subroutine_factory)
        self._zero = np.zeros(d)

    def advance(self, x, y):
        if self.state is not None:
            self.state.step(lambda theta: 2 * x * (x @ theta - y))

    @property
    def theta_tilde(self) -> DenseVector:
        if self.state is None:
            return self._zero
        return self.state.theta_tilde


RiskFn = Callable[[Callable[[np.ndarray], np.ndarray]], float]


class CalibrationState:
    def __init__(self, d: int, Y: float, delta: float, budget: Optional[int] = None,
                 max_grid_level: Optional[int] = None,
                 subroutine_factory=ExponentiatedGradient,
                 risk_fn: Optional[RiskFn] = None):
        if d < 1 or not Y > 0 or not 0 < delta < 1:
            raise InvalidInputError("calibration needs d >= 1, Y > 0 and delta in (0, 1)")
        self.d = d
        self.Y = float(Y)
        self.delta = delta
        self.budget = budget
        self.max_grid_level = max_grid_level
        self.subroutine_factory = subroutine_factory
        self.risk_fn = risk_fn
        self.eta = 1 / (8 * self.Y**2)
        self.t = 0
        self.j = 0
        self.steps_spent = 0
        self.out_of_range = 0
        self.history_x: List[DenseVector] = []
        self.history_y: List[float] = []
        self.summaries: List[SessionSummary] = []
        self.fbar = None

        if max_grid_level is not None:
            logger.warning(
                "grid capped at level %d, doubling sessions after %d reuse the same grid",
                max_grid_level, max_grid_level,
            )
        self.grid = build_grid(0, d, Y, max_grid_level)
        self.thetas = np.zeros((len(self.grid), d))
        self._start_session()

    def session_delta(self, j: int) -> float:
        return self.delta / (2 * (j + 1) ** 2)

    @property
    def session_end(self) -> int:
        return 2 ** (self.j + 1) - 1

    def _start_session(self):
        self.aggregator = ExpWeightsAggregator(len(self.grid), self.eta)
        self.weight_sum = np.zeros(len(self.grid))
        self.session_steps = 0
        self.next_grid = build_grid(self.j + 1, self.d, self.Y, self.max_grid_level)
        self.live = sum(1 for e in self.next_grid if not e.is_null)
        planned = self.steps_spent + self.live * (2 ** (self.j + 1) - 1)
        if self.budget is not None and planned > self.budget:
            raise BudgetExceededError(
                f"doubling session {self.j + 1} needs {planned} candidate steps, "
                f"budget is {self.budget}"
            )
        delta_next = self.session_delta(self.j + 1)
        self.candidates = [
            _Candidate(e, self.d, delta_next, self.subroutine_factory) for e in self.next_grid
        ]
        for x, y in zip(self.history_x, self.history_y):
            self._advance_candidates(x, y)
        logger.info(
            "doubling session %d: %d experts, %d candidates for the next grid",
            self.j, len(self.grid), len(self.candidates),
        )

    def _advance_candidates(self, x, y):
        for cand in self.candidates:
            cand.advance(x, y)
        self.steps_spent += self.live

    def expert_predictions(self, x) -> DenseVector:
        return np.clip(self.thetas @ x, -self.Y, self.Y)

    def step(self, x, y: float):
        x = as_vector(x, self.d, "x")
        y = float(y)
        self.t += 1
        if abs(y) > self.Y:
            if self.out_of_range == 0:
                logger.warning("|y|=%.4g exceeds the clipping range Y=%.4g", abs(y), self.Y)
            self.out_of_range += 1

        preds = self.expert_predictions(x)
        weights = self.aggregator.weights
        prediction = float(weights @ preds)
        self.weight_sum += weights
        self.session_steps += 1
        self.aggregator.update((y - preds) ** 2)

        self._advance_candidates(x, y)
        self.history_x.append(x)
        self.history_y.append(y)

        if self.t == self.session_end:
            self._close_session()
        return prediction, self

    def _close_session(self):
        fbar = AveragePredictor(self.weight_sum / self.session_steps, self.thetas, self.Y)
        best = int(np.argmin(self.aggregator.cum_loss))
        meta_risk = best_risk = float("nan")
        if self.risk_fn is not None:
            meta_risk = self.risk_fn(fbar)
            best_risk = min(
                self.risk_fn(AveragePredictor([1.0], theta, self.Y)) for theta in self.thetas
            )
        self.summaries.append(
            SessionSummary(self.j, len(self.grid), self.grid.entries[best].label,
                           meta_risk, best_risk)
        )
        self.fbar = fbar
        self.grid = self.next_grid
        self.thetas = np.array([c.theta_tilde for c in self.candidates])
        self.j += 1
        self._start_session()

    def estimator(self):
        if self.fbar is None:
            return zero_predictor
        return self.fbar


def calibration_step(state: CalibrationState, x, y):
    return state.step(x, y)


def calibration_estimator(state: CalibrationState):
    return state.estimator()
