"""
Run one configured experiment over all of its seeds.

Every seed is an isolated pipeline: its own environment streams, its own
optimizer and its own RunRecord. Pipelines run in worker processes and
only the parent writes files, so a parallel run produces the same bytes
as a serial one.

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

# pylint: disable=C0111,R0913,R0914
import csv
import dataclasses
import math
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import List, Optional

import numpy as np
from humanfriendly import format_timespan

from saew.bounds import BOUND_CONSTANTS, theorem1_bound, theorem2_bound, theorem3_bound
from saew.calibration import CalibrationState, calibration_step, write_summaries_csv
from saew.baselines import RdaState, rda_step
from saew.core import L1Ball, ProblemParams, RunRecord, l1_norm
from saew.losses import make_quantile_env, make_square_env
from saew.saew import SaewState
from saew.subroutine import ExponentiatedGradient

from saew_harness import seeding
from saew_harness.config import ConfigError, ExperimentConfig
from saew_harness.file_utils import ensure_dir, metadata_path, output_path, write_json
from saew_harness.summary import Summary, summarize

TRACE_COLUMNS = ("err", "theorem1_bound", "theorem2_bound")
BOUNDED_TRACE_COLUMN = "theorem3_bound"


class ExperimentLog:
    """Append-only run_log.txt in the output directory."""

    def __init__(self, out_dir):
        self.fpath = Path(out_dir) / "run_log.txt"

    def log(self, message):
        with open(self.fpath, "a+") as log_file:
            log_file.write(f"{datetime.now()}|{time.time()}|{message}\n")
            log_file.flush()

    def say(self, message):
        print(message)
        self.log(message)


@dataclass
class RunResult:
    seed: int
    record: RunRecord
    sessions: Optional[list] = None


@dataclass
class ExperimentResult:
    output: Path
    run_files: List[Path]
    summary: Summary
    config: ExperimentConfig
    sweep: Optional[list] = None


def build_environment(config: ExperimentConfig, seed: int):
    env = config.environment
    master = config.run.master_seed
    theta_seed = None
    if env.seed is not None:
        theta_seed = seeding.fixed_theta_stream(master, env.seed)
    stream = seeding.stream(master, seed)
    if env.loss == "square":
        return make_square_env(env.d, env.d0, env.noise_sd, stream, env.design, env.clip_x,
                               env.holdout, theta_seed)
    return make_quantile_env(env.d, env.d0, env.alpha_q, env.noise_sd, stream, env.risk_oracle,
                             env.holdout, theta_seed)


def extra_columns(config: ExperimentConfig):
    columns = ()
    if config.environment.loss == "quantile":
        columns += ("risk_se",)
    if config.algorithm == "saew":
        columns += ("risk_overall",)
        if config.run.trace_bounds:
            columns += TRACE_COLUMNS
            if _bounded_square(config):
                columns += (BOUNDED_TRACE_COLUMN,)
    return columns


def _bounded_square(config: ExperimentConfig) -> bool:
    env = config.environment
    return env.loss == "square" and env.design == "truncated"


class _Scorer:
    """Excess risk and l2 error through the environment's metrics path."""

    def __init__(self, env):
        self.metrics = env.metrics
        self.with_se = env.loss_family == "quantile"
        self.cum_risk = 0.0

    def risk(self, theta) -> float:
        return self.metrics.excess_risk(theta).value

    def row(self, record, t, theta_hat, theta_tilde, epsilon, session, extras=()):
        risk_hat = self.metrics.excess_risk(theta_hat)
        risk_tilde = self.metrics.excess_risk(theta_tilde)
        # Monte-Carlo estimates can dip below zero
        self.cum_risk += max(risk_hat.value, 0.0)
        if self.with_se:
            extras = (risk_tilde.stderr,) + tuple(extras)
        record.append(t, self.metrics.l2_error(theta_tilde), risk_hat.value, risk_tilde.value,
                      self.cum_risk, epsilon, session, extras)


def _oracle_default(value, fallback):
    return fallback if value is None else value


def run_saew(config, env, record):
    cfg = config.saew
    theta_star = env.metrics.theta_star
    params = ProblemParams(
        _oracle_default(cfg.d0, int(np.count_nonzero(theta_star))),
        cfg.alpha,
        _oracle_default(cfg.U, l1_norm(theta_star)),
        cfg.B,
        cfg.delta,
    )
    state = SaewState(params, env.d)
    cert = state.subroutine.certificate()
    oracle = env.gradient_oracle()
    scorer = _Scorer(env)
    trace = config.run.trace_bounds
    bounded = trace and BOUNDED_TRACE_COLUMN in record.extra_columns
    if trace:
        record.bound_constants = {
            name: BOUND_CONSTANTS[name] for name in record.extra_columns if name in BOUND_CONSTANTS
        }
    sigma = math.sqrt(env.noise_variance)
    for t in range(1, config.run.T + 1):
        session = state.session
        state.step(oracle)
        extras = (scorer.risk(state.overall_average),)
        if trace:
            extras += (state.err, theorem1_bound(params, cert, t), theorem2_bound(params, cert, t))
        if bounded:
            extras += (theorem3_bound(env.X, env.Y, params.U, params.d0, params.alpha, sigma,
                                      cert, t, params.delta),)
        scorer.row(record, t, state.last_prediction, state.theta_tilde, state.epsilon, session,
                   extras)
    record.session_starts = list(state.session_starts)


def run_eg(config, env, record):
    """The subroutine alone in the ball of radius U around 0, scored on its running average."""
    cfg = config.eg
    U = _oracle_default(cfg.U, l1_norm(env.metrics.theta_star))
    sub = ExponentiatedGradient(L1Ball(np.zeros(env.d), U), cfg.B)
    oracle = env.gradient_oracle()
    scorer = _Scorer(env)
    average = np.zeros(env.d)
    for t in range(1, config.run.T + 1):
        theta_hat = sub.predict()
        sub.update(oracle(theta_hat))
        average += (theta_hat - average) / t
        scorer.row(record, t, theta_hat, average, math.nan, 0)
    record.session_starts = [1]


def run_rda(config, env, record):
    cfg = config.rda
    state = RdaState(env.d, cfg.gamma, cfg.rho, cfg.lam)
    oracle = env.gradient_oracle()
    scorer = _Scorer(env)
    for t in range(1, config.run.T + 1):
        theta_hat = state.predict()
        rda_step(state, oracle(theta_hat))
        scorer.row(record, t, theta_hat, state.predict(), math.nan, 0)
    record.session_starts = [1]


def run_calibrate(config, env, record):
    """One row per closed doubling session.

    risk_hat is the excess risk of the averaged predictor the session hands
    on, risk_tilde the best single expert's, and cum_risk charges each
    handed-on predictor for the 2^(j+1) steps it serves.
    """
    cfg = config.calibrate
    Y = _oracle_default(cfg.Y, env.Y)
    if not math.isfinite(Y):
        raise ConfigError("calibrate", "Y", "the gaussian design has no almost sure bound, set Y")
    state = CalibrationState(
        env.d, Y, cfg.delta, cfg.budget, cfg.max_grid_level,
        risk_fn=lambda f: env.predictor_excess_risk(f, n=cfg.risk_samples).value,
    )
    cum_risk = 0.0
    for t in range(1, config.run.T + 1):
        sample = env.draw()
        calibration_step(state, sample.x, sample.y)
        if len(state.summaries) > len(record.rows):
            summary = state.summaries[-1]
            cum_risk += max(summary.meta_risk, 0.0) * 2 ** (summary.j + 1)
            record.append(t, math.nan, summary.meta_risk, summary.best_risk, cum_risk, math.nan,
                          summary.j)
    record.session_starts = [2**s.j for s in state.summaries]
    return state.summaries


ADAPTERS = {
    "saew": run_saew,
    "eg": run_eg,
    "rda": run_rda,
    "calibrate": run_calibrate,
}


def run_single(config: ExperimentConfig, seed: int) -> RunResult:
    env = build_environment(config, seed)
    record = RunRecord(seed=seed, config_hash=config.config_hash,
                       extra_columns=extra_columns(config))
    sessions = ADAPTERS[config.algorithm](config, env, record)
    return RunResult(seed, record, sessions)


def final_score(record: RunRecord, score: str) -> float:
    if not record.rows:
        return math.inf
    value = record.column(score)[-1]
    return float(value) if math.isfinite(value) else math.inf


def _run_job(job):
    config, seed = job
    return run_single(config, seed)


def _score_job(job):
    config, seed = job
    return final_score(run_single(config, seed).record, config.sweep.score)


def worker_count(max_workers: int, jobs: int) -> int:
    return max(1, min(multiprocessing.cpu_count(), max_workers, jobs))


def map_jobs(func, jobs, max_workers, on_done=None):
    """func over jobs, results in job order."""
    results = [None] * len(jobs)
    workers = worker_count(max_workers, len(jobs))
    if workers == 1:
        for i, job in enumerate(jobs):
            results[i] = func(job)
            if on_done:
                on_done(i, results[i])
        return results
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {executor.submit(func, job): i for i, job in enumerate(jobs)}
        for future in as_completed(futures):
            i = futures[future]
            results[i] = future.result()
            if on_done:
                on_done(i, results[i])
    return results


def hindsight_select(config: ExperimentConfig, log: ExperimentLog):
    """Score every grid point on every seed and keep the one with the best median."""
    names = config.sweep.parameters
    variants = config.sweep_variants()
    seeds = config.run.seeds
    jobs = [(variant, seed) for variant in variants for seed in seeds]
    log.say(f"Sweeping {','.join(names)} over {len(variants)} grid points, {len(jobs)} runs")
    scores = map_jobs(_score_job, jobs, config.run.max_workers)
    scores = np.array(scores).reshape(len(variants), len(seeds))
    medians = np.median(scores, axis=1)
    best = int(np.argmin(medians))
    rows = []
    for variant, median in zip(variants, medians):
        params = variant.algorithm_params
        rows.append([getattr(params, name) for name in names] + [float(median)])
    chosen = variants[best]
    label = ";".join(f"{name}={getattr(chosen.algorithm_params, name):g}" for name in names)
    log.say(f"Selected {label} with median final {config.sweep.score} {medians[best]:.4g}")
    return chosen, rows


def write_sweep_csv(fpath, names, rows, score):
    with open(fpath, "w", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(list(names) + [f"median_{score}"])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])


def run_experiment(config: ExperimentConfig, output=None, trace_bounds=None) -> ExperimentResult:
    start = time.time()
    run = config.run
    if output is not None:
        run = dataclasses.replace(run, output=str(output))
    if trace_bounds is not None:
        run = dataclasses.replace(run, trace_bounds=trace_bounds)
    config = dataclasses.replace(config, run=run).validate()

    out = ensure_dir(run.output)
    log = ExperimentLog(out)
    env = config.environment
    log.say(
        f"Experiment {config.config_hash}: {config.algorithm} on the {env.loss} loss,"
        f" d={env.d}, d0={env.d0}, T={run.T}, {len(run.seeds)} seeds,"
        f" {worker_count(run.max_workers, len(run.seeds))} workers"
    )
    if run.trace_bounds and config.algorithm != "saew":
        log.say(f"trace_bounds has no effect on {config.algorithm} runs")

    sweep = None
    if config.sweep.enabled:
        names = config.sweep.parameters
        score = config.sweep.score
        config, sweep = hindsight_select(config, log)
        write_sweep_csv(output_path(out, "sweep.csv"), names, sweep, score)
    config.save(output_path(out, "config.ini"))

    def report(i, result):
        message = f"seed {result.seed} done ({i + 1}/{len(run.seeds)}) after {format_timespan(time.time() - start)}"
        print(message)
        log.log(message)

    jobs = [(config, seed) for seed in run.seeds]
    results = map_jobs(_run_job, jobs, run.max_workers, report)

    files = []
    for result in results:
        fpath = output_path(out, f"seed_{result.seed}.csv")
        result.record.write_csv(fpath)
        write_json(metadata_path(fpath), result.record.metadata)
        if result.sessions is not None:
            write_summaries_csv(output_path(out, f"seed_{result.seed}_sessions.csv"), result.sessions)
        files.append(fpath)

    summary = summarize(files)
    summary.write(out)
    log.say(f"Experiment {config.config_hash} finished in {format_timespan(time.time() - start)}")
    return ExperimentResult(out, files, summary, config, sweep)
