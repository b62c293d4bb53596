"""
gnuplot scripts and the data files they read.

Scripts only name files written next to them, so a plots directory can be
moved or archived and rendered with `gnuplot <script>.gp` from inside it.

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
from typing import List, Optional

import numpy as np

from saew.core import InvalidInputError, RunRecord

from saew_harness.file_utils import ensure_dir, output_path, run_files
from saew_harness.summary import Summary, load_run, summarize

TERMINAL = "set terminal pngcairo size 900,600 enhanced"


def _write_dat(fpath, header, columns):
    np.savetxt(fpath, np.column_stack(columns), fmt="%.10g", header=" ".join(header), comments="# ")


def _write_script(fpath, lines):
    with open(fpath, "w") as script:
        script.write("\n".join(lines) + "\n")


def _band_script(name, ylabel, logscale):
    return [
        TERMINAL,
        f"set output '{name}.png'",
        "set datafile missing 'nan'",
        f"set logscale {logscale}",
        "set xlabel 't'",
        f"set ylabel '{ylabel}'",
        "set key top right",
        f"plot '{name}.dat' using 1:3:4 with filledcurves fs transparent solid 0.25"
        " lc rgb '#4c72b0' title 'quartiles', \\",
        f"     '{name}.dat' using 1:2 with lines lw 2 lc rgb '#4c72b0' title 'median'",
    ]


def emit_plots(summary: Summary, plot_dir, staircase: Optional[RunRecord] = None) -> List:
    """Write l2_error, cum_risk and, given a run, staircase scripts into plot_dir."""
    plot_dir = ensure_dir(plot_dir)
    written = []
    for name, column, ylabel, logscale in (
        ("l2_error", "log_l2_error", "log10 l2 error of the estimator", "x"),
        ("cum_risk", "cum_risk", "cumulative excess risk", "x"),
    ):
        dat = output_path(plot_dir, f"{name}.dat")
        _write_dat(dat, ("t", "median", "q1", "q3", "mean"),
                   [summary.t] + [summary.column(f"{column}_{s}") for s in ("median", "q1", "q3", "mean")])
        script = output_path(plot_dir, f"{name}.gp")
        _write_script(script, _band_script(name, ylabel, logscale))
        written += [dat, script]

    if staircase is not None:
        written += _emit_staircase(staircase, plot_dir)
    return written


def _emit_staircase(record: RunRecord, plot_dir):
    """Confidence radius and error of one run with a marker at every session start."""
    dat = output_path(plot_dir, "staircase.dat")
    _write_dat(dat, ("t", "epsilon", "l2_error"),
               [record.column("t"), record.column("epsilon"), record.column("l2_error")])
    lines = [
        TERMINAL,
        "set output 'staircase.png'",
        "set datafile missing 'nan'",
        "set logscale xy",
        "set xlabel 't'",
        "set ylabel 'l1 radius and l2 error'",
        f"set title 'seed {record.seed}'",
    ]
    for t_i in record.session_starts:
        lines.append(f"set arrow from {int(t_i)}, graph 0 to {int(t_i)}, graph 1 nohead dt 2 lc rgb 'gray'")
    lines += [
        "plot 'staircase.dat' using 1:2 with steps lw 2 lc rgb '#c44e52' title 'epsilon', \\",
        "     'staircase.dat' using 1:3 with lines lw 1 lc rgb '#4c72b0' title 'l2 error'",
    ]
    script = output_path(plot_dir, "staircase.gp")
    _write_script(script, lines)
    return [dat, script]


def plot_run_dir(run_dir, plot_dir=None) -> List:
    """Summarize run_dir and emit its plots into run_dir/plots."""
    files = run_files(run_dir)
    if not files:
        raise InvalidInputError(f"no seed_<n>.csv run files in {run_dir}")
    summary = summarize(files)
    if plot_dir is None:
        plot_dir = output_path(run_dir, "plots")
    return emit_plots(summary, plot_dir, load_run(files[0]))
