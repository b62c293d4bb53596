"""
Shared numeric types, l1-ball geometry, the environment abstraction
and per-run records used by every other module.

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
import csv
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

# absolute slack on every l1 membership test
BALL_TOLERANCE = 1e-9

DenseVector = np.ndarray

CSV_HEADER = ("t", "l2_error", "risk_hat", "risk_tilde", "cum_risk", "epsilon", "session")


class InvalidInputError(ValueError):
    """Raised when an operation receives values outside its domain."""


def as_vector(values, d: Optional[int] = None, name: str = "vector") -> DenseVector:
    """Coerce values to a finite 1-D float64 array, optionally of length d."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim == 0:
        vec = vec.reshape(1)
    if vec.ndim != 1:
        raise InvalidInputError(f"{name} must be one dimensional, got shape {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if d is not None and vec.shape[0] != d:
        raise InvalidInputError(f"{name} has length {vec.shape[0]}, expected {d}")
    return vec


def l1_norm(v) -> float:
    # plain summation, d stays in the thousands
    return float(np.sum(np.abs(as_vector(v))))


def excess_l2(v, theta_star) -> float:
    v = as_vector(v)
    theta_star = as_vector(theta_star, len(v), "theta_star")
    return float(np.linalg.norm(v - theta_star))


@dataclass(frozen=True)
class L1Ball:
    center: DenseVector
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center, name="center"))
        radius = float(self.radius)
        if not math.isfinite(radius) or radius < 0:
            raise InvalidInputError(f"ball radius must be finite and >= 0, got {radius}")
        object.__setattr__(self, "radius", radius)

    @property
    def dimension(self) -> int:
        return self.center.shape[0]

    def contains(self, v) -> bool:
        v = as_vector(v, self.dimension)
        return float(np.sum(np.abs(v - self.center))) <= self.radius + BALL_TOLERANCE

    def corner(self, j: int, sign: int) -> DenseVector:
        """center + sign * radius * e_j"""
        out = self.center.copy()
        out[j] += sign * self.radius
        return out


def ball_contains(ball: L1Ball, v) -> bool:
    return ball.contains(v)


@dataclass(frozen=True)
class ProblemParams:
    """(d0, alpha, U, B, delta) as consumed by the acceleration procedure.

    The risk is assumed 2*alpha strongly convex, U bounds ||theta*||_1 and
    B bounds the sup-norm of the gradients over the 2U l1-ball.
    """

    d0: int
    alpha: float
    U: float
    B: float
    delta: float

    def __post_init__(self):
        if int(self.d0) != self.d0 or self.d0 < 1:
            raise InvalidInputError(f"d0 must be a positive integer, got {self.d0}")
        object.__setattr__(self, "d0", int(self.d0))
        for name in ("alpha", "U", "B"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise InvalidInputError(f"{name} must be finite and > 0, got {value}")
            object.__setattr__(self, name, value)
        delta = float(self.delta)
        if not 0 < delta < 1:
            raise InvalidInputError(f"delta must lie in (0, 1), got {delta}")
        object.__setattr__(self, "delta", delta)

    def check_dimension(self, d: int):
        if self.d0 > d:
            raise InvalidInputError(f"d0={self.d0} exceeds the dimension d={d}")

    def to_dict(self) -> dict:
        return {
            "d0": self.d0,
            "alpha": self.alpha,
            "U": self.U,
            "B": self.B,
            "delta": self.delta,
        }


class Sample(NamedTuple):
    x: DenseVector
    y: float


class RiskEstimate(NamedTuple):
    value: float
    stderr: float = 0.0


class RiskOracle(ABC):
    """Metrics-only access to the risk minimiser theta*.

    Optimizers never see this object, the harness uses it to score them.
    """

    def __init__(self, theta_star):
        self._theta_star = as_vector(theta_star, name="theta_star").copy()
        self._theta_star.setflags(write=False)

    @property
    def theta_star(self) -> DenseVector:
        return self._theta_star

    @abstractmethod
    def excess_risk(self, theta) -> RiskEstimate: ...

    def l2_error(self, theta) -> float:
        return excess_l2(theta, self._theta_star)


class Environment(ABC):
    """Seeded stream of i.i.d. losses l_t(theta) = loss(theta, sample_t)."""

    loss_family = "abstract"

    def __init__(self, d: int):
        if d < 1:
            raise InvalidInputError(f"dimension must be >= 1, got {d}")
        self.d = d

    @abstractmethod
    def draw(self) -> Sample: ...

    @abstractmethod
    def loss(self, theta, sample: Sample) -> float: ...

    @abstractmethod
    def gradient(self, theta, sample: Sample) -> DenseVector: ...

    @property
    @abstractmethod
    def metrics(self) -> RiskOracle: ...

    def gradient_oracle(self) -> "GradientOracle":
        return GradientOracle(self)


class GradientOracle:
    """theta -> gradient of the next loss at theta.

    Each call consumes one sample, so the oracle is queried exactly once per
    time step. The sample and the loss at the query are kept for reporting.
    """

    def __init__(self, env: Environment):
        self._env = env
        self.last_sample: Optional[Sample] = None
        self.last_loss = float("nan")
        self.calls = 0

    def __call__(self, theta) -> DenseVector:
        sample = self._env.draw()
        self.last_sample = sample
        self.last_loss = self._env.loss(theta, sample)
        self.calls += 1
        return self._env.gradient(theta, sample)


GradientFn = Callable[[DenseVector], DenseVector]


def _format_value(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class RunRecord:
    """Per-step metrics of one run plus its metadata.

    Rows are (t, l2_error, risk_hat, risk_tilde, cum_risk, epsilon, session)
    followed by any extra columns declared at construction.
    """

    seed: int = 0
    config_hash: str = ""
    extra_columns: Sequence[str] = ()
    rows: list = field(default_factory=list)
    session_starts: list = field(default_factory=list)
    bound_constants: dict = field(default_factory=dict)

    @property
    def header(self) -> tuple:
        return CSV_HEADER + tuple(self.extra_columns)

    @property
    def metadata(self) -> dict:
        meta = {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "columns": list(self.header),
            "session_starts": [int(t) for t in self.session_starts],
        }
        if self.bound_constants:
            meta["bound_constants"] = dict(self.bound_constants)
        return meta

    def append(
        self, t, l2_error, risk_hat, risk_tilde, cum_risk, epsilon, session, extras=()
    ):
        if len(extras) != len(self.extra_columns):
            raise InvalidInputError(
                f"expected {len(self.extra_columns)} extra values, got {len(extras)}"
            )
        if self.rows:
            prev = self.rows[-1]
            if t <= prev[0]:
                raise InvalidInputError(f"t must increase, got {t} after {prev[0]}")
            if cum_risk < prev[4]:
                raise InvalidInputError("cumulative excess risk must be nondecreasing")
        elif t < 1:
            raise InvalidInputError("t starts at 1")
        self.rows.append(
            (int(t), float(l2_error), float(risk_hat), float(risk_tilde),
             float(cum_risk), float(epsilon), int(session)) + tuple(float(e) for e in extras)
        )

    def column(self, name: str) -> np.ndarray:
        idx = self.header.index(name)
        return np.array([row[idx] for row in self.rows], dtype=np.float64)

    def write_csv(self, fpath):
        with open(fpath, "w", newline="") as csv_file:
            writer = csv.writer(csv_file, delimiter=",", lineterminator="\n")
            writer.writerow(self.header)
            for row in self.rows:
                writer.writerow([_format_value(v) for v in row])

    @classmethod
    def read_csv(cls, fpath, seed: int = 0, config_hash: str = "") -> "RunRecord":
        with open(fpath, "r", newline="") as csv_file:
            reader = csv.reader(csv_file)
            header = tuple(next(reader))
            if header[: len(CSV_HEADER)] != CSV_HEADER:
                raise InvalidInputError(f"{fpath} does not start with {','.join(CSV_HEADER)}")
            record = cls(seed=seed, config_hash=config_hash,
                         extra_columns=header[len(CSV_HEADER):])
            for values in reader:
                if not values:
                    continue
                row = [float(v) for v in values]
                row[0] = int(row[0])
                row[6] = int(row[6])
                record.rows.append(tuple(row))
        return record
