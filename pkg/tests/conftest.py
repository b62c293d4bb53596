"""Fixtures for driving the saew command line through typer's CliRunner.

`experiment_file` writes a small INI experiment under tmp_path whose output
directory also lives under tmp_path.
"""

import pytest
from typer.testing import CliRunner


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def experiment_file(tmp_path):
    def make(algorithm="eg", T=20, seeds="1", extra=""):
        fpath = tmp_path / f"{algorithm}.ini"
        fpath.write_text(
            "[run]\n"
            f"algorithm = {algorithm}\n"
            f"T = {T}\n"
            f"seeds = {seeds}\n"
            f"output = {tmp_path / 'runs'}\n"
            "max_workers = 1\n"
            "[environment]\n"
            "d = 4\n"
            "d0 = 2\n"
            "noise_sd = 0.1\n" + extra
        )
        return fpath

    return make
