"""Drive a `sample` run from a resolved RunConfig.

Targets: `prior` simulates (theta, x) forward with no conditioning; `joint`
additionally simulates observations on the output grid (how the example
datasets are produced); `posterior` dispatches to marginal MH or the SMC
sampler with the configured inner filter; `prediction` extends each record
of a previous posterior output forward from its final state, ignoring any
observations.

Outputs are written with per-sample parameters, normalized weights,
log-likelihoods and trajectories at the output times, plus the seed and a
canonical config echo, so equal-(seed, config) runs are byte-identical.
"""

import numpy as np

from .config import RunConfig
from .core import simulate
from .core.rng import RngStream
from .errors import ConfigError, DataFormatError
from .inference import FilterRunner, build_filter_grid, mh_sample, output_times, smc_sampler
from .lang import load_model
from .lineargauss import extract_linear_gaussian
from .sampleio import RunOutput, SampleRecord, write_run_output, read_run_output
from .timeseries import InputProvider, read_timeseries, role_arrays


def _load(cfg: RunConfig):
    try:
        with open(cfg.model_file, "r", encoding="utf-8") as fh:
            source = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read model file {cfg.model_file!r}: {e}") from None
    ir = load_model(source)
    inputs = None
    if ir.n_input > 0:
        if cfg.input_file is None:
            raise ConfigError(f"model {ir.name} has input variables; --input-file required")
        inputs = InputProvider(ir, read_timeseries(cfg.input_file, ir, roles=("input",)))
    return ir, inputs


def _metadata(cfg, ir):
    return {"model": ir.name, "seed": cfg.seed, "config": cfg.echo()}


def _forward_records(cfg, ir, inputs, rng, with_obs):
    """Lock-step forward simulation of nsamples independent draws."""
    times = output_times(cfg.start_time, cfg.end_time, cfg.noutputs)
    n = cfg.nsamples
    check = not cfg.disable_assert
    thetas = simulate.sample_parameter(ir, rng.child(0), size=n)
    x = simulate.sample_initial(ir, thetas, rng.child(1), size=n)
    states = np.zeros((n, len(times), ir.n_state))
    states[:, 0] = x
    obs = np.full((n, len(times), ir.n_obs), np.nan) if with_obs else None
    for k in range(1, len(times)):
        dt = times[k] - times[k - 1]
        x = simulate.step_transition(
            ir, thetas, x, inputs, times[k - 1], dt, rng.child(2, k), check_finite=check
        )
        states[:, k] = x
        if with_obs:
            u_now = inputs.at(times[k]) if inputs is not None else None
            obs[:, k] = simulate.simulate_obs(ir, thetas, x, u_now, rng.child(3, k))
    weight = 1.0 / n if n else 0.0
    records = []
    for j in range(n):
        records.append(
            SampleRecord(
                index=j,
                weight=weight,
                loglik=float("nan"),
                theta=thetas[j],
                times=times,
                states=states[j],
                obs=obs[j] if with_obs else None,
            )
        )
    return records


def _posterior_records(cfg, ir, inputs, rng):
    obs_ts = read_timeseries(cfg.obs_file, ir, roles=("obs",))
    times, values, mask = role_arrays(obs_ts, ir, "obs")
    grid = build_filter_grid(
        cfg.start_time,
        cfg.end_time,
        cfg.noutputs,
        obs_times=times,
        obs_values=values,
        obs_mask=mask,
        n_obs=ir.n_obs,
    )
    runner = FilterRunner(
        ir,
        grid,
        inputs=inputs,
        filter_kind=cfg.filter,
        n_particles=cfg.nparticles,
        resampler=cfg.resampler,
        ess_rel=cfg.ess_rel,
        check_finite=not cfg.disable_assert,
    )
    if cfg.filter == "kalman":
        # surface NonlinearModelError before any sampling loop starts
        probe = simulate.sample_parameter(ir, rng.child(9), size=1)[0]
        extract_linear_gaussian(ir, probe, grid.times, inputs)
    out_rows = np.flatnonzero(grid.is_output)
    records = []
    if cfg.sampler == "mh":
        chains, _ = mh_sample(ir, runner, cfg.nsamples, rng.child(0))
        weight = 1.0 / len(chains) if chains else 0.0
        for j, chain in enumerate(chains):
            records.append(
                SampleRecord(
                    index=j,
                    weight=weight,
                    loglik=chain.loglik,
                    theta=chain.theta,
                    times=grid.times[out_rows],
                    states=chain.trajectory[out_rows],
                )
            )
    else:
        res = smc_sampler(
            ir,
            runner,
            cfg.nsamples,
            rng.child(0),
            theta_resampler=cfg.resampler,
            nthreads=cfg.nthreads,
        )
        weights = np.exp(res.log_v)
        for j in range(cfg.nsamples):
            records.append(
                SampleRecord(
                    index=j,
                    weight=float(weights[j]),
                    loglik=float(res.logliks[j]),
                    theta=res.thetas[j],
                    times=grid.times[out_rows],
                    states=res.trajectories[j][out_rows],
                )
            )
    return records


def _prediction_records(cfg, ir, inputs, rng):
    init = read_run_output(cfg.init_file)
    if init.param_labels != ir.slot_labels("param"):
        raise DataFormatError(
            f"init file parameters {init.param_labels} do not match model {ir.name}"
        )
    if init.state_labels != ir.slot_labels("state"):
        raise DataFormatError(f"init file states {init.state_labels} do not match model {ir.name}")
    times = output_times(cfg.start_time, cfg.end_time, cfg.noutputs)
    check = not cfg.disable_assert
    n = len(init.records)
    thetas = np.stack([rec.theta for rec in init.records]) if n else np.zeros((0, ir.n_param))
    x = np.stack([rec.states[-1] for rec in init.records]) if n else np.zeros((0, ir.n_state))
    for rec in init.records:
        t_last = rec.times[-1]
        if abs(t_last - cfg.start_time) > 1e-9 * max(1.0, abs(t_last)):
            raise DataFormatError(
                f"init file trajectories end at t={t_last:g}; --start-time is {cfg.start_time:g}"
            )
    states = np.zeros((n, len(times), ir.n_state))
    if n:
        states[:, 0] = x
    for k in range(1, len(times)):
        dt = times[k] - times[k - 1]
        x = simulate.step_transition(
            ir, thetas, x, inputs, times[k - 1], dt, rng.child(2, k), check_finite=check
        )
        states[:, k] = x
    records = []
    for j, rec in enumerate(init.records):
        records.append(
            SampleRecord(
                index=rec.index,
                weight=rec.weight,
                loglik=rec.loglik,
                theta=rec.theta,
                times=times,
                states=states[j],
            )
        )
    return records


def run_sample(cfg: RunConfig) -> RunOutput:
    """Execute the configured run and write the output file."""
    ir, inputs = _load(cfg)
    rng = RngStream(cfg.seed)
    if cfg.target in ("prior", "joint"):
        records = _forward_records(cfg, ir, inputs, rng, with_obs=cfg.target == "joint")
    elif cfg.target == "posterior":
        records = _posterior_records(cfg, ir, inputs, rng)
    elif cfg.target == "prediction":
        records = _prediction_records(cfg, ir, inputs, rng)
    else:
        raise ConfigError(f"unknown target {cfg.target!r}")
    out = RunOutput(
        metadata=_metadata(cfg, ir),
        param_labels=ir.slot_labels("param"),
        state_labels=ir.slot_labels("state"),
        obs_labels=ir.slot_labels("obs"),
        records=records,
    )
    if cfg.output_file is not None:
        write_run_output(cfg.output_file, out)
    return out
