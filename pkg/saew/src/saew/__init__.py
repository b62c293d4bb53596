"""
Sparse acceleration of exponential weights for stochastic online
optimization in l1-balls.

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

from saew.core import (
    InvalidInputError,
    L1Ball,
    ProblemParams,
    RunRecord,
    ball_contains,
    excess_l2,
    l1_norm,
)
from saew.saew import SaewState, saew_estimators, saew_init, saew_step, truncate_top
from saew.subroutine import ExponentiatedGradient, eg_certificate

__version__ = "0.1.0"

__all__ = [
    "ExponentiatedGradient",
    "InvalidInputError",
    "L1Ball",
    "ProblemParams",
    "RunRecord",
    "SaewState",
    "ball_contains",
    "eg_certificate",
    "excess_l2",
    "l1_norm",
    "saew_estimators",
    "saew_init",
    "saew_step",
    "truncate_top",
]
