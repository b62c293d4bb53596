"""
Experiment configuration read from and written to INI files.

A config has a [run] section, an [environment] section, one section per
algorithm and an optional [sweep] section naming algorithm keys to tune in
hindsight. Values equal to "none" select the default derived from the
environment (for example U = ||theta*||_1).

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
import configparser
import dataclasses
import hashlib
import io
import itertools
from dataclasses import dataclass, field
from typing import Optional, Tuple

from saew.baselines import rda_grid
from saew.losses import DEFAULT_HOLDOUT, DESIGNS, RISK_ORACLES

ALGORITHMS = ("saew", "eg", "rda", "calibrate")
LOSSES = ("square", "quantile")
SCORES = ("cum_risk", "risk_tilde", "l2_error")


class ConfigError(ValueError):
    def __init__(self, section, key, message):
        self.section = section
        self.key = key
        self.message = message
        where = f"[{section}] {key}" if key else f"[{section}]"
        super().__init__(f"{where}: {message}")

    def __reduce__(self):
        return (ConfigError, (self.section, self.key, self.message))


def _none_or(parse):
    def parse_optional(text):
        if text.strip().lower() == "none":
            return None
        return parse(text)

    return parse_optional


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list_of(parse):
    def parse_list(text):
        return tuple(parse(v) for v in text.split(",") if v.strip())

    return parse_list


def _str(text):
    return text.strip()


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def option(default, parse):
    if isinstance(default, tuple):
        return field(default_factory=lambda: default, metadata={"parse": parse})
    return field(default=default, metadata={"parse": parse})


@dataclass
class EnvironmentConfig:
    loss: str = option("square", _str)
    d: int = option(20, int)
    d0: int = option(3, int)
    noise_sd: float = option(0.1, float)
    alpha_q: float = option(0.8, float)
    # pins theta* across runs, none draws a fresh theta* per seed
    seed: Optional[int] = option(None, _none_or(int))
    design: str = option("gaussian", _str)
    clip_x: float = option(3.0, float)
    risk_oracle: str = option("exact", _str)
    holdout: int = option(DEFAULT_HOLDOUT, int)

    def validate(self):
        if self.loss not in LOSSES:
            raise ConfigError("environment", "loss", f"must be one of {LOSSES}")
        if self.d < 1:
            raise ConfigError("environment", "d", "must be >= 1")
        if not 1 <= self.d0 <= self.d:
            raise ConfigError("environment", "d0", f"must lie in [1, d={self.d}]")
        if self.noise_sd < 0:
            raise ConfigError("environment", "noise_sd", "must be >= 0")
        if not 0 < self.alpha_q < 1:
            raise ConfigError("environment", "alpha_q", "must lie in (0, 1)")
        if self.seed is not None and self.seed < 0:
            raise ConfigError("environment", "seed", "must be >= 0")
        if self.design not in DESIGNS:
            raise ConfigError("environment", "design", f"must be one of {DESIGNS}")
        if self.loss == "quantile" and self.design != "gaussian":
            raise ConfigError("environment", "design", "the quantile loss only has a gaussian design")
        if not self.clip_x > 0:
            raise ConfigError("environment", "clip_x", "must be > 0")
        if self.risk_oracle not in RISK_ORACLES:
            raise ConfigError("environment", "risk_oracle", f"must be one of {RISK_ORACLES}")
        if self.holdout < 2:
            raise ConfigError("environment", "holdout", "must be >= 2")


def _positive(section, cfg, *names):
    for name in names:
        value = getattr(cfg, name)
        if value is not None and not value > 0:
            raise ConfigError(section, name, f"must be > 0, got {value}")


def _probability(section, value, name="delta"):
    if not 0 < value < 1:
        raise ConfigError(section, name, f"must lie in (0, 1), got {value}")


@dataclass
class SaewConfig:
    d0: Optional[int] = option(None, _none_or(int))
    alpha: float = option(1.0, float)
    U: Optional[float] = option(None, _none_or(float))
    B: float = option(1.0, float)
    delta: float = option(0.05, float)

    def validate(self):
        if self.d0 is not None and self.d0 < 1:
            raise ConfigError("saew", "d0", "must be >= 1")
        _positive("saew", self, "alpha", "U", "B")
        _probability("saew", self.delta)


@dataclass
class EgConfig:
    U: Optional[float] = option(None, _none_or(float))
    B: float = option(1.0, float)

    def validate(self):
        _positive("eg", self, "U", "B")


@dataclass
class RdaConfig:
    gamma: float = option(1.0, float)
    rho: float = option(0.0, float)
    lam: float = option(0.0, float)

    def validate(self):
        _positive("rda", self, "gamma")
        for name in ("rho", "lam"):
            if getattr(self, name) < 0:
                raise ConfigError("rda", name, "must be >= 0")


@dataclass
class CalibrateConfig:
    # none uses the almost sure bound of a truncated design
    Y: Optional[float] = option(None, _none_or(float))
    delta: float = option(0.05, float)
    budget: Optional[int] = option(None, _none_or(int))
    max_grid_level: Optional[int] = option(None, _none_or(int))
    risk_samples: int = option(10_000, int)

    def validate(self):
        _positive("calibrate", self, "Y", "budget")
        _probability("calibrate", self.delta)
        if self.max_grid_level is not None and self.max_grid_level < 0:
            raise ConfigError("calibrate", "max_grid_level", "must be >= 0")
        if self.risk_samples < 2:
            raise ConfigError("calibrate", "risk_samples", "must be >= 2")


@dataclass
class SweepConfig:
    parameters: Tuple[str, ...] = option((), _list_of(_str))
    grid: Tuple[float, ...] = option(tuple(rda_grid()), _list_of(float))
    score: str = option("cum_risk", _str)

    @property
    def enabled(self) -> bool:
        return bool(self.parameters)


SECTIONS = {
    "environment": EnvironmentConfig,
    "saew": SaewConfig,
    "eg": EgConfig,
    "rda": RdaConfig,
    "calibrate": CalibrateConfig,
    "sweep": SweepConfig,
}


@dataclass
class RunConfig:
    algorithm: str = option("saew", _str)
    T: int = option(2000, int)
    seeds: Tuple[int, ...] = option((1,), _list_of(int))
    output: str = option("runs", _str)
    trace_bounds: bool = option(False, _bool)
    max_workers: int = option(12, int)
    master_seed: int = option(0, int)


@dataclass
class ExperimentConfig:
    run: RunConfig = field(default_factory=RunConfig)
    environment: EnvironmentConfig = field(default_factory=EnvironmentConfig)
    saew: SaewConfig = field(default_factory=SaewConfig)
    eg: EgConfig = field(default_factory=EgConfig)
    rda: RdaConfig = field(default_factory=RdaConfig)
    calibrate: CalibrateConfig = field(default_factory=CalibrateConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    @property
    def algorithm(self) -> str:
        return self.run.algorithm

    @property
    def algorithm_params(self):
        return getattr(self, self.run.algorithm)

    def validate(self) -> "ExperimentConfig":
        run = self.run
        if run.algorithm not in ALGORITHMS:
            raise ConfigError("run", "algorithm", f"must be one of {ALGORITHMS}, got {run.algorithm!r}")
        if run.T < 1:
            raise ConfigError("run", "T", "must be >= 1")
        if not run.seeds:
            raise ConfigError("run", "seeds", "needs at least one seed")
        if len(set(run.seeds)) != len(run.seeds):
            raise ConfigError("run", "seeds", "contains duplicates")
        if min(run.seeds) < 0 or run.master_seed < 0:
            raise ConfigError("run", "seeds", "seeds must be >= 0")
        if run.max_workers < 1:
            raise ConfigError("run", "max_workers", "must be >= 1")
        if not run.output:
            raise ConfigError("run", "output", "must not be empty")
        self.environment.validate()
        self.algorithm_params.validate()
        if run.algorithm == "calibrate" and self.environment.loss != "square":
            raise ConfigError("environment", "loss", "calibrate runs on the square loss")
        if (run.algorithm == "calibrate" and self.calibrate.Y is None
                and self.environment.design == "gaussian"):
            raise ConfigError("calibrate", "Y", "the gaussian design has no almost sure bound, set Y")
        self._validate_sweep()
        return self

    def _validate_sweep(self):
        sweep = self.sweep
        if sweep.score not in SCORES:
            raise ConfigError("sweep", "score", f"must be one of {SCORES}")
        if not sweep.enabled:
            return
        if self.run.algorithm == "calibrate":
            raise ConfigError("sweep", "parameters", "calibrate has no parameters to tune")
        if not sweep.grid or min(sweep.grid) <= 0:
            raise ConfigError("sweep", "grid", "needs positive values")
        names = {f.name for f in dataclasses.fields(self.algorithm_params)}
        for name in sweep.parameters:
            if name not in names or name == "d0":
                raise ConfigError(
                    "sweep", "parameters", f"{name!r} is not a real-valued [{self.run.algorithm}] key"
                )

    def sweep_variants(self):
        """One config per point of the hindsight grid, sweep cleared."""
        sweep = self.sweep
        variants = []
        for values in itertools.product(sweep.grid, repeat=len(sweep.parameters)):
            params = dataclasses.replace(self.algorithm_params, **dict(zip(sweep.parameters, values)))
            params.validate()
            variant = dataclasses.replace(self, sweep=SweepConfig(score=sweep.score))
            setattr(variant, self.run.algorithm, params)
            variants.append(variant)
        return variants

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section in ("run",) + tuple(SECTIONS):
            values = getattr(self, section)
            parser[section] = {
                f.name: _format(getattr(values, f.name)) for f in dataclasses.fields(values)
            }
        out = io.StringIO()
        parser.write(out)
        return out.getvalue()

    @property
    def config_hash(self) -> str:
        """Digest of everything that shapes the numbers, not where or how fast they are made."""
        run = dataclasses.replace(self.run, output="", max_workers=1)
        text = dataclasses.replace(self, run=run).to_ini()
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def save(self, fpath):
        with open(fpath, "w") as config_file:
            config_file.write(self.to_ini())

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as error:
            raise ConfigError("file", "", str(error).splitlines()[0]) from error
        known = {"run": RunConfig, **SECTIONS}
        for section in parser.sections():
            if section not in known:
                raise ConfigError(section, "", "unknown section")
        parts = {}
        for section, section_cls in known.items():
            items = dict(parser[section]) if parser.has_section(section) else {}
            parts[section] = _read_section(section, section_cls, items)
        return cls(**parts).validate()


def _read_section(section, section_cls, items):
    fields = {f.name: f for f in dataclasses.fields(section_cls)}
    kwargs = {}
    for key, text in items.items():
        if key not in fields:
            raise ConfigError(section, key, "unknown key")
        try:
            kwargs[key] = fields[key].metadata["parse"](text)
        except ValueError as error:
            raise ConfigError(section, key, f"cannot parse {text!r}: {error}") from error
    return section_cls(**kwargs)


def load_config(fpath) -> ExperimentConfig:
    with open(fpath, "r") as config_file:
        return ExperimentConfig.from_ini(config_file.read())
