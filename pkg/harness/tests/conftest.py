import shutil
from pathlib import Path

import numpy as np
import pytest

from saew_harness.config import EnvironmentConfig, ExperimentConfig, RunConfig


@pytest.fixture
def datadir(tmp_path, request):
    """Provide a writable test data directory.

    If a folder harness/tests/data/{test_name} exists it will be copied into a
    temporary directory so tests can modify the files. Otherwise an empty
    directory is returned.
    """
    test_data_dir = Path(__file__).parent / "data" / request.node.name
    dest = tmp_path / request.node.name
    if test_data_dir.exists():
        shutil.copytree(test_data_dir, dest)
    else:
        dest.mkdir(parents=True, exist_ok=True)
    return dest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def small_config(tmp_path):
    """Factory for quick experiments writing under tmp_path."""

    def make(algorithm="eg", T=10, seeds=(1,), output="out", max_workers=1, **environment):
        environment = {"d": 5, "d0": 2, "noise_sd": 0.1, **environment}
        return ExperimentConfig(
            run=RunConfig(algorithm=algorithm, T=T, seeds=tuple(seeds),
                          output=str(tmp_path / output), max_workers=max_workers),
            environment=EnvironmentConfig(**environment),
        )

    return make
