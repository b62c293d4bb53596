"""
Counter-based seed streams.

Every (master seed, run seed, component) triple maps to its own
SeedSequence through the spawn key, so adding a seed to an experiment
leaves the streams of the other seeds untouched and a run gives the same
numbers whether it executes in a worker process or in the parent.

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

import numpy as np

ENVIRONMENT = 0
THETA = 1


def stream(master_seed: int, seed: int, component: int = ENVIRONMENT) -> np.random.SeedSequence:
    if master_seed < 0 or seed < 0:
        raise ValueError("seeds must be non-negative integers")
    return np.random.SeedSequence(master_seed, spawn_key=(seed, component))


def fixed_theta_stream(master_seed: int, theta_seed: int) -> np.random.SeedSequence:
    """Stream for a generating parameter shared by every run of an experiment."""
    return stream(master_seed, theta_seed, THETA)
