import re

import numpy as np
import pytest

from saew.core import InvalidInputError, RunRecord
from saew_harness.experiment import run_experiment
from saew_harness.file_utils import metadata_path, write_json
from saew_harness.plots import emit_plots, plot_run_dir
from saew_harness.summary import load_run, summarize

QUOTED = re.compile(r"'([^']+\.(?:dat|png))'")


def staircase_run(dir_path, session_starts):
    record = RunRecord(seed=3, session_starts=list(session_starts))
    cum = 0.0
    for t in range(1, 41):
        session = sum(1 for s in session_starts if s <= t) - 1
        cum += 1 / t
        record.append(t, 1 / np.sqrt(t), 1 / t, 1 / t, cum, 2 ** (-session / 2), session)
    fpath = dir_path / "seed_3.csv"
    record.write_csv(fpath)
    write_json(metadata_path(fpath), record.metadata)
    return fpath


def test_staircase_has_one_marker_per_session(tmp_path):
    fpath = staircase_run(tmp_path, [1, 5, 12, 30])
    written = emit_plots(summarize([fpath]), tmp_path / "plots", load_run(fpath))
    assert sorted(p.name for p in written) == [
        "cum_risk.dat", "cum_risk.gp", "l2_error.dat", "l2_error.gp", "staircase.dat",
        "staircase.gp",
    ]
    script = (tmp_path / "plots" / "staircase.gp").read_text()
    markers = [line for line in script.splitlines() if line.startswith("set arrow")]
    assert len(markers) == 4
    for t_i, line in zip([1, 5, 12, 30], markers):
        assert line.startswith(f"set arrow from {t_i}, graph 0 to {t_i}, graph 1")


def test_scripts_reference_only_emitted_files(tmp_path):
    fpath = staircase_run(tmp_path, [1, 9])
    plot_dir = tmp_path / "plots"
    emit_plots(summarize([fpath]), plot_dir, load_run(fpath))
    for script in plot_dir.glob("*.gp"):
        names = QUOTED.findall(script.read_text())
        assert names
        for name in names:
            assert "/" not in name
            if name.endswith(".dat"):
                assert (plot_dir / name).exists()


def test_data_files_match_summary(tmp_path):
    fpath = staircase_run(tmp_path, [1])
    summary = summarize([fpath])
    emit_plots(summary, tmp_path / "plots")
    data = np.loadtxt(tmp_path / "plots" / "l2_error.dat")
    assert data.shape == (40, 5)
    assert np.allclose(data[:, 0], summary.t)
    assert np.allclose(data[:, 1], summary.column("log_l2_error_median"))
    assert not (tmp_path / "plots" / "staircase.gp").exists()


def test_plot_run_dir(small_config):
    result = run_experiment(small_config("saew", T=100, seeds=[1, 2]))
    written = plot_run_dir(result.output)
    assert {p.parent for p in written} == {result.output.resolve() / "plots"}
    record = load_run(result.output / "seed_1.csv")
    script = (result.output / "plots" / "staircase.gp").read_text()
    assert script.count("set arrow") == len(record.session_starts)


def test_plot_run_dir_needs_runs(tmp_path):
    with pytest.raises(InvalidInputError):
        plot_run_dir(tmp_path)
