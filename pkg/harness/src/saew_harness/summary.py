"""
Cross-seed aggregates of run files and the rate fits used to read them.

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
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from saew.core import InvalidInputError, RunRecord

from saew_harness.file_utils import metadata_path, output_path, read_json, write_json

SUMMARY_COLUMNS = ("log_l2_error", "cum_risk", "risk_tilde", "epsilon")
STATS = ("median", "q1", "q3", "mean")


class SchemaMismatchError(InvalidInputError):
    """Run files that cannot be aggregated together."""


def loglog_slope(t, values, start_fraction: float = 0.5) -> float:
    """Least squares slope of log(values) against log(t) for t >= start_fraction * t[-1].

    Non-positive and non-finite values are left out, nan when fewer than
    two points remain.
    """
    t = np.asarray(t, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if t.shape != values.shape or t.ndim != 1:
        raise InvalidInputError("t and values must be 1-D arrays of equal length")
    if not 0 <= start_fraction < 1:
        raise InvalidInputError(f"start_fraction must lie in [0, 1), got {start_fraction}")
    if len(t) == 0:
        return math.nan
    keep = (t >= start_fraction * t[-1]) & (t > 0) & np.isfinite(values) & (values > 0)
    if np.count_nonzero(keep) < 2:
        return math.nan
    return float(linregress(np.log(t[keep]), np.log(values[keep])).slope)


def linear_fit_r2(x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = np.isfinite(x) & np.isfinite(y)
    if np.count_nonzero(keep) < 3:
        return math.nan
    try:
        return float(linregress(x[keep], y[keep]).rvalue ** 2)
    except ValueError as error:
        raise InvalidInputError(str(error)) from error


def load_run(fpath) -> RunRecord:
    """A run file plus its metadata sidecar when there is one."""
    meta_file = metadata_path(fpath)
    meta = read_json(meta_file) if meta_file.exists() else {}
    record = RunRecord.read_csv(fpath, meta.get("seed", 0), meta.get("config_hash", ""))
    record.session_starts = list(meta.get("session_starts", []))
    record.bound_constants = dict(meta.get("bound_constants", {}))
    return record


@dataclass
class Summary:
    t: np.ndarray
    n_runs: int
    stats: dict = field(default_factory=dict)
    scalars: dict = field(default_factory=dict)

    @property
    def header(self):
        return ("t",) + tuple(f"{c}_{s}" for c in SUMMARY_COLUMNS for s in STATS)

    def column(self, name) -> np.ndarray:
        if name == "t":
            return self.t
        return self.stats[name]

    def write_csv(self, fpath):
        with open(fpath, "w", newline="") as csv_file:
            writer = csv.writer(csv_file, lineterminator="\n")
            writer.writerow(self.header)
            columns = [self.column(name) for name in self.header[1:]]
            for i, t in enumerate(self.t):
                writer.writerow([int(t)] + [repr(float(c[i])) for c in columns])

    def write(self, out_dir):
        self.write_csv(output_path(out_dir, "summary.csv"))
        write_json(output_path(out_dir, "summary.json"), _json_safe(self.scalars))


def _json_safe(scalars):
    return {k: (v if math.isfinite(v) else None) for k, v in scalars.items()}


def _aggregate(values):
    with warnings.catch_warnings():
        # all-nan columns, e.g. epsilon for runs without sessions
        warnings.simplefilter("ignore", RuntimeWarning)
        return {
            "median": np.nanmedian(values, axis=0),
            "q1": np.nanpercentile(values, 25, axis=0),
            "q3": np.nanpercentile(values, 75, axis=0),
            "mean": np.nanmean(values, axis=0),
        }


def summarize(run_files) -> Summary:
    run_files = list(run_files)
    records = [load_run(f) for f in run_files]
    if not records:
        raise InvalidInputError("summarize needs at least one run file")
    first = records[0]
    t = first.column("t")
    for fpath, record in zip(run_files[1:], records[1:]):
        if record.header != first.header:
            raise SchemaMismatchError(f"{fpath} has columns {record.header}, expected {first.header}")
        if not np.array_equal(record.column("t"), t):
            raise SchemaMismatchError(f"{fpath} was recorded at different times than {run_files[0]}")

    with np.errstate(divide="ignore", invalid="ignore"):
        raw = {
            "log_l2_error": np.log10(np.array([r.column("l2_error") for r in records])),
            "cum_risk": np.array([r.column("cum_risk") for r in records]),
            "risk_tilde": np.array([r.column("risk_tilde") for r in records]),
            "epsilon": np.array([r.column("epsilon") for r in records]),
        }
    summary = Summary(t, len(records))
    for name in SUMMARY_COLUMNS:
        for stat, values in _aggregate(raw[name]).items():
            summary.stats[f"{name}_{stat}"] = values

    def final(name):
        return float(summary.stats[name][-1]) if len(t) else math.nan

    l2_median = np.power(10.0, summary.stats["log_l2_error_median"])
    summary.scalars = {
        "n_runs": len(records),
        "final_log_l2_error": final("log_l2_error_median"),
        "final_cum_risk_median": final("cum_risk_median"),
        "final_cum_risk_mean": final("cum_risk_mean"),
        "final_risk_tilde_median": final("risk_tilde_median"),
        "l2_slope": loglog_slope(t, l2_median),
        "risk_slope": loglog_slope(t, summary.stats["risk_tilde_median"]),
    }
    return summary
