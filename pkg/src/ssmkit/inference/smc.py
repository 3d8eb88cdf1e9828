"""SMC over parameters with MH rejuvenation (SMC^2 with the particle
filter inside; with the Kalman filter inside, weights are exact).

Each theta-particle carries an attached, resumable filter synchronized to
the current observation time. Per observation step: resample
theta-ancestors by weight, rejuvenate each particle with one marginal MH
move whose inner filter replays the window so far from scratch for the
proposed theta (accepted moves adopt the replayed filter state), then
advance every attached filter to the next observation, the increment
becoming the new theta-weight. Resampling every step keeps the weight
equal to the bare increment.

Rejuvenation and propagation are data-parallel across theta-particles;
per-particle streams keyed by (step, phase, particle) make results
identical for any worker count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from ..core import simulate
from ..errors import DegenerateEnsembleError
from .mcmc import MhChainState, marginal_mh_step, _chain_log_prior
from .resampling import resample


@dataclass
class ThetaParticle:
    theta: np.ndarray
    log_prior: float
    loglik: float = 0.0  # accumulated l^j over observations so far
    trajectory: np.ndarray = None
    init_state: np.ndarray = None
    run: object = None  # attached resumable filter

    def clone(self):
        return ThetaParticle(
            theta=self.theta,
            log_prior=self.log_prior,
            loglik=self.loglik,
            trajectory=self.trajectory,
            init_state=self.init_state,
            run=self.run.clone() if self.run is not None else None,
        )


@dataclass
class SmcResult:
    thetas: np.ndarray  # (P_theta, n_param)
    log_v: np.ndarray  # final log theta-weights, normalized
    logliks: np.ndarray  # accumulated likelihood per particle
    trajectories: np.ndarray  # (P_theta, S+1, n_state)
    particles: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)  # per step: dict


def _map(fn, items, nthreads):
    if nthreads and nthreads > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            return list(pool.map(fn, items))
    return [fn(j) for j in items]


def smc_sampler(ir, runner, n_theta, rng, theta_resampler="multinomial", nthreads=1):
    """Run the theta-SMC sampler over `runner`'s grid; returns SmcResult.

    The final ensemble is weighted by log_v; resample or weight accordingly
    when summarizing.
    """
    if n_theta < 2:
        raise ValueError("smc sampler needs n_theta >= 2")
    grid = runner.grid
    use_init_state = ir.block("proposal_initial") is not None

    thetas = simulate.sample_parameter(ir, rng.child(0), size=n_theta)
    init_states = None
    if use_init_state:
        init_states = simulate.sample_initial(ir, thetas, rng.child(1), size=n_theta)
    particles = []
    for j in range(n_theta):
        ist = init_states[j] if use_init_state else None
        particles.append(
            ThetaParticle(theta=thetas[j], log_prior=_chain_log_prior(ir, thetas[j], ist), init_state=ist)
        )
    log_v = np.full(n_theta, -np.log(n_theta))
    diagnostics = []

    obs_steps = grid.obs_steps
    for i, grid_idx in enumerate(obs_steps, start=1):
        step_rng = rng.child(2, i)
        prev_idx = obs_steps[i - 2] if i > 1 else 0

        # resample theta-ancestors from v(t_{i-1})
        ancestors = resample(np.exp(log_v - logsumexp(log_v)), theta_resampler, step_rng.child(0))
        particles = [particles[a].clone() for a in ancestors]

        # rejuvenate: one marginal MH move per theta-particle over t_{0:i-1}
        def rejuvenate(j):
            p = particles[j]
            chain = MhChainState(
                theta=p.theta,
                trajectory=p.trajectory,
                loglik=p.loglik,
                log_prior=p.log_prior,
                init_state=p.init_state,
            )
            new, accepted, run = marginal_mh_step(
                ir, chain, runner, step_rng.child(1, j), upto=prev_idx
            )
            if accepted:
                p.theta = new.theta
                p.log_prior = new.log_prior
                p.loglik = new.loglik
                p.trajectory = new.trajectory
                p.init_state = new.init_state
                p.run = run
            return accepted

        accepted = _map(rejuvenate, range(n_theta), nthreads)

        # propagate the attached filters over (t_{i-1}, t_i] and weight
        def propagate(j):
            p = particles[j]
            if p.run is None:
                p.run = runner.new_run(p.theta, p.init_state, step_rng.child(2, j, 0))
            incr = p.run.advance_to(grid_idx, step_rng.child(2, j, 1))
            p.loglik += incr
            p.trajectory = p.run.sample_trajectory(step_rng.child(3, j))
            return incr

        log_v = np.array(_map(propagate, range(n_theta), nthreads))
        if not np.isfinite(logsumexp(log_v)):
            raise DegenerateEnsembleError(
                f"all theta-weights vanished at t={grid.times[grid_idx]:g}",
                time=grid.times[grid_idx],
            )
        norm = np.exp(log_v - logsumexp(log_v))
        diagnostics.append(
            {
                "time": float(grid.times[grid_idx]),
                "ess": float(1.0 / np.sum(norm**2)),
                "acceptance": float(np.mean(accepted)),
            }
        )

    # advance through any trailing output-only steps and refresh trajectories
    def finalize(j):
        p = particles[j]
        if p.run is None:
            p.run = runner.new_run(p.theta, p.init_state, rng.child(3, j, 0))
        if p.run.pos < grid.last:
            p.run.advance_to(grid.last, rng.child(3, j, 1))
            p.trajectory = p.run.sample_trajectory(rng.child(3, j, 2))
        elif p.trajectory is None:
            p.trajectory = p.run.sample_trajectory(rng.child(3, j, 2))
        return None

    _map(finalize, range(n_theta), nthreads)

    log_v = log_v - logsumexp(log_v)
    return SmcResult(
        thetas=np.stack([p.theta for p in particles]),
        log_v=log_v,
        logliks=np.array([p.loglik for p in particles]),
        trajectories=np.stack([p.trajectory for p in particles]),
        particles=particles,
        diagnostics=diagnostics,
    )
