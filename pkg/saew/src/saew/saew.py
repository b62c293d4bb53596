"""
Sparse acceleration of exponential weights.

The engine runs a subroutine in a sequence of l1-balls of radius
U * 2^(-i/2). Each ball is centered at the hard-truncated average of the
previous session's predictions. A session closes as soon as the confidence
radius epsilon_t around theta* is small enough for the next, smaller ball.

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

# pylint: disable=C0111,R0902
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np

from saew.bounds import (
    ConfidenceSchedule,
    err_bound,
    lemma3_min_radius,
    radius_bound,
    session_gamma,
    session_length_bound,
)
from saew.core import (
    BALL_TOLERANCE,
    DenseVector,
    InvalidInputError,
    L1Ball,
    ProblemParams,
    as_vector,
)
from saew.subroutine import ExponentiatedGradient, Subroutine, subroutine_from_dict

logger = logging.getLogger(__name__)

SNAPSHOT_SCHEMA = "saew-state"
SNAPSHOT_VERSION = 1

# the running average is recomputed from the session sum this often
RECOMPUTE_EVERY = 2**10


def truncate_top(v, d0: int) -> DenseVector:
    """Keep the d0 largest-magnitude coordinates of v, zero the rest.

    Equal magnitudes are resolved in favour of the lower index.
    """
    v = as_vector(v)
    if d0 < 0 or d0 > v.shape[0]:
        raise InvalidInputError(f"d0 must lie in [0, {v.shape[0]}], got {d0}")
    out = np.zeros_like(v)
    if d0 == 0:
        return out
    keep = np.argsort(-np.abs(v), kind="stable")[:d0]
    out[keep] = v[keep]
    return out


@dataclass
class SessionRecord:
    index: int
    start: int
    end: int
    center: list
    radius: float
    max_grad_norm: float
    a_prime: float
    b_prime: float
    epsilon: float

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass
class StepTrace:
    t: int
    session: int
    window: int
    grad_sq_sum: float
    err: float
    epsilon: float


SubroutineFactory = Callable[[L1Ball, float], Subroutine]


class SaewState:
    """Full state of the accelerated procedure.

    t counts observed gradients, so after the first step t = 1 and the
    prediction made during that step is theta_hat_0.
    """

    def __init__(
        self,
        params: ProblemParams,
        d: int,
        subroutine_factory: SubroutineFactory = ExponentiatedGradient,
        trace: bool = False,
    ):
        params.check_dimension(d)
        self.params = params
        self.d = d
        self.subroutine_factory = subroutine_factory
        self.t = 0
        self.session = 0
        self.session_start = 1
        self.session_starts = [1]
        self.sessions: List[SessionRecord] = []
        self.center = np.zeros(d)
        self.radius = params.U
        self.subroutine = subroutine_factory(L1Ball(self.center, self.radius), params.B)
        self.schedule = ConfidenceSchedule(params.delta, self.subroutine.certificate())
        self.grad_sq_sum = 0.0
        self.max_grad_norm = 0.0
        self.a_prime = float("nan")
        self.b_prime = float("nan")
        self.err = float("nan")
        self.epsilon = params.U
        # argmin over observed steps only, the pre-loop radius U backs no estimate
        self.eps_min = math.inf
        self.eps_argmin = 0
        self.theta_bar = np.zeros(d)
        self.session_sum = np.zeros(d)
        self.overall_sum = np.zeros(d)
        self.theta_tilde = np.zeros(d)
        self.last_prediction: Optional[DenseVector] = None
        self.trace: Optional[List[StepTrace]] = [] if trace else None

    @property
    def window(self) -> int:
        return self.t - self.session_start + 1

    @property
    def ball(self) -> L1Ball:
        return self.subroutine.ball

    @property
    def overall_average(self) -> DenseVector:
        if self.t == 0:
            return np.zeros(self.d)
        return self.overall_sum / self.t

    def step(self, gradient_oracle: Callable[[DenseVector], DenseVector]) -> "SaewState":
        params = self.params
        self.t += 1
        window = self.window
        theta_hat = self.subroutine.predict()
        gradient = as_vector(gradient_oracle(theta_hat.copy()), self.d, "gradient")
        self.subroutine.update(gradient)
        sup = float(np.max(np.abs(gradient)))
        self.grad_sq_sum += sup**2
        self.max_grad_norm = max(self.max_grad_norm, sup)

        self.a_prime = self.schedule.a_prime(window, self.session)
        self.b_prime = self.schedule.b_prime(window, self.session)
        self.err = err_bound(self.grad_sq_sum, self.a_prime, self.b_prime, params.B)
        self.epsilon = radius_bound(
            params.d0, params.U, self.session, params.alpha, window, self.err
        )

        self.session_sum += theta_hat
        self.overall_sum += theta_hat
        if window % RECOMPUTE_EVERY == 0:
            self.theta_bar = self.session_sum / window
        else:
            self.theta_bar = self.theta_bar + (theta_hat - self.theta_bar) / window

        if self.epsilon < self.eps_min:
            self.eps_min = self.epsilon
            self.eps_argmin = self.t
            self.theta_tilde = self.theta_bar.copy()

        self.last_prediction = theta_hat
        if self.trace is not None:
            self.trace.append(
                StepTrace(self.t, self.session, window, self.grad_sq_sum, self.err, self.epsilon)
            )

        if self.epsilon <= params.U * 2 ** (-(self.session + 1) / 2):
            self._close_session()
        return self

    def _close_session(self):
        self.sessions.append(
            SessionRecord(
                index=self.session,
                start=self.session_start,
                end=self.t + 1,
                center=self.center.tolist(),
                radius=self.radius,
                max_grad_norm=self.max_grad_norm,
                a_prime=self.a_prime,
                b_prime=self.b_prime,
                epsilon=self.epsilon,
            )
        )
        self.session += 1
        self.session_start = self.t + 1
        self.session_starts.append(self.session_start)
        self.center = truncate_top(self.theta_bar, self.params.d0)
        self.radius = self.params.U * 2 ** (-self.session / 2)
        self.subroutine = self.subroutine_factory(
            L1Ball(self.center, self.radius), self.params.B
        )
        self.grad_sq_sum = 0.0
        self.max_grad_norm = 0.0
        self.session_sum = np.zeros(self.d)
        logger.debug("session %d starts at t=%d", self.session, self.session_start)

    def estimators(self):
        return self.subroutine.predict(), self.theta_tilde.copy()

    def centers(self) -> List[DenseVector]:
        """Centers of every session so far, the running one last."""
        return [np.asarray(s.center) for s in self.sessions] + [self.center]

    def radii(self) -> List[float]:
        return [s.radius for s in self.sessions] + [self.radius]

    def to_dict(self) -> dict:
        return {
            "schema": SNAPSHOT_SCHEMA,
            "version": SNAPSHOT_VERSION,
            "params": self.params.to_dict(),
            "d": self.d,
            "t": self.t,
            "session": self.session,
            "session_start": self.session_start,
            "session_starts": list(self.session_starts),
            "sessions": [asdict(s) for s in self.sessions],
            "center": self.center.tolist(),
            "radius": self.radius,
            "grad_sq_sum": self.grad_sq_sum,
            "max_grad_norm": self.max_grad_norm,
            "a_prime": self.a_prime,
            "b_prime": self.b_prime,
            "err": self.err,
            "epsilon": self.epsilon,
            "eps_min": self.eps_min,
            "eps_argmin": self.eps_argmin,
            "theta_bar": self.theta_bar.tolist(),
            "session_sum": self.session_sum.tolist(),
            "overall_sum": self.overall_sum.tolist(),
            "theta_tilde": self.theta_tilde.tolist(),
            "last_prediction": (
                None if self.last_prediction is None else self.last_prediction.tolist()
            ),
            "subroutine": self.subroutine.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=4)

    @classmethod
    def from_dict(cls, data: dict) -> "SaewState":
        if data.get("schema") != SNAPSHOT_SCHEMA or data.get("version") != SNAPSHOT_VERSION:
            raise InvalidInputError(
                f"expected a {SNAPSHOT_SCHEMA} v{SNAPSHOT_VERSION} snapshot, "
                f"got {data.get('schema')} v{data.get('version')}"
            )
        subroutine = subroutine_from_dict(data["subroutine"])
        state = cls(ProblemParams(**data["params"]), data["d"], type(subroutine))
        state.subroutine = subroutine
        state.t = data["t"]
        state.session = data["session"]
        state.session_start = data["session_start"]
        state.session_starts = list(data["session_starts"])
        state.sessions = [SessionRecord(**s) for s in data["sessions"]]
        state.center = np.asarray(data["center"], dtype=np.float64)
        state.radius = data["radius"]
        for name in ("grad_sq_sum", "max_grad_norm", "a_prime", "b_prime", "err",
                     "epsilon", "eps_min"):
            setattr(state, name, float(data[name]))
        state.eps_argmin = data["eps_argmin"]
        for name in ("theta_bar", "session_sum", "overall_sum", "theta_tilde"):
            setattr(state, name, np.asarray(data[name], dtype=np.float64))
        if data["last_prediction"] is not None:
            state.last_prediction = np.asarray(data["last_prediction"], dtype=np.float64)
        return state

    @classmethod
    def from_json(cls, text: str) -> "SaewState":
        return cls.from_dict(json.loads(text))


def saew_init(
    params: ProblemParams,
    d: int,
    subroutine_factory: SubroutineFactory = ExponentiatedGradient,
    trace: bool = False,
) -> SaewState:
    return SaewState(params, d, subroutine_factory, trace)


def saew_step(state: SaewState, gradient_oracle) -> SaewState:
    return state.step(gradient_oracle)


def saew_estimators(state: SaewState):
    return state.estimators()


def induction_event_held(state: SaewState, theta_star) -> bool:
    """True when every session center lies within its radius of theta_star in l1."""
    theta_star = as_vector(theta_star, state.d, "theta_star")
    for center, radius in zip(state.centers(), state.radii()):
        if np.sum(np.abs(center - theta_star)) > radius + BALL_TOLERANCE:
            return False
    return True


def session_length_violations(state: SaewState) -> List[SessionRecord]:
    """Completed sessions that ran longer than the session length bound.

    Sessions whose gradients exceeded the declared B are not checked.
    """
    params = state.params
    gamma = session_gamma(params.d0, params.B, params.alpha, params.U)
    out = []
    for record in state.sessions:
        if record.max_grad_norm > params.B:
            continue
        bound = session_length_bound(gamma, record.a_prime, record.b_prime, record.index)
        if record.length > bound:
            out.append(record)
    return out


def session_lengths_within_bound(state: SaewState) -> bool:
    return not session_length_violations(state)


def min_radius_violations(state: SaewState) -> List[SessionRecord]:
    """Completed sessions closing with a radius above lemma3_min_radius.

    At t = t_{i+1} the smallest radius seen so far, the initial U included,
    is compared with the bound for the largest a', b' of sessions 0..i.
    Checking stops at the first session whose gradients exceeded B.
    """
    params = state.params
    gamma = session_gamma(params.d0, params.B, params.alpha, params.U)
    smallest, a_p, b_p = params.U, 0.0, 0.0
    out = []
    for record in state.sessions:
        if record.max_grad_norm > params.B:
            break
        smallest = min(smallest, record.epsilon)
        a_p = max(a_p, record.a_prime)
        b_p = max(b_p, record.b_prime)
        if smallest > lemma3_min_radius(params.U, gamma, a_p, b_p, record.end):
            out.append(record)
    return out
