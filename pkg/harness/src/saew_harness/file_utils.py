"""
Copyright (C) 2020 Abraham George Smith
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

import json
import os
import re
from pathlib import Path

from natsort import natsorted

RUN_FILE = re.compile(r"^seed_(\d+)\.csv$")


def ls(dir_path):
    # Don't show hidden files
    # These can happen due to issues like file system
    # synchronisation technology. Nothing here writes them.
    fnames = os.listdir(dir_path)
    fnames = [f for f in fnames if f[0] != "."]
    return natsorted(fnames)


def run_files(dir_path):
    """seed_<n>.csv files in dir_path, seed_2 before seed_10."""
    return [Path(dir_path) / f for f in ls(dir_path) if RUN_FILE.match(f)]


def metadata_path(run_file):
    return Path(run_file).with_suffix(".json")


def output_path(root, name):
    """root / name, refusing any name that resolves outside root."""
    root = Path(root).resolve()
    path = (root / name).resolve()
    if root != path and root not in path.parents:
        raise ValueError(f"{name} resolves outside the output directory {root}")
    return path


def ensure_dir(dir_path):
    path = Path(dir_path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(fpath, data):
    with open(fpath, "w") as json_file:
        json.dump(data, json_file, indent=4, sort_keys=True)
        json_file.write("\n")


def read_json(fpath):
    with open(fpath, "r") as json_file:
        return json.load(json_file)
