"""Marginal Metropolis-Hastings over parameters.

The marginal likelihood in the acceptance ratio comes from a full-window
filter run: exact from the Kalman filter, or estimated by the particle
filter (the pseudo-marginal construction keeps the chain exact). Models
that declare a proposal_initial block take joint moves on (theta, x0): the
initial state is proposed alongside theta, the inner filter conditions on
it, and the acceptance ratio carries the matching initial-density and
proposal-density terms.

Proposals falling outside the prior support are auto-rejected without
running the filter.
"""

from dataclasses import dataclass

import numpy as np

from ..core import simulate
from ..lineargauss import extract_linear_gaussian
from ..linalg import GaussianState
from .kalman import KalmanRun
from .particle import ParticleRun

_FILTER_KEY = 7


def metropolis_accept(log_ratio, rng):
    """Accept iff u <= exp(log_ratio), u ~ U(0,1)."""
    if np.isnan(log_ratio) or log_ratio == -np.inf:
        return False
    u = rng.uniform()
    return bool(u <= np.exp(min(log_ratio, 0.0)))


def mh_kernel_step(state, propose, rng):
    """Generic MH transition: propose(state, rng) -> (candidate, log_ratio),
    where log_ratio carries the full target and proposal terms."""
    candidate, log_ratio = propose(state, rng)
    if metropolis_accept(log_ratio, rng):
        return candidate, True
    return state, False


@dataclass
class MhChainState:
    theta: np.ndarray
    trajectory: np.ndarray  # (S+1, n_state)
    loglik: float  # log-domain marginal likelihood of the stored theta
    log_prior: float  # parameter prior (+ initial density for joint moves)
    init_state: np.ndarray = None  # set when proposal_initial is in play


class FilterRunner:
    """Builds and runs the configured inner filter for a given theta."""

    def __init__(
        self,
        ir,
        grid,
        inputs=None,
        filter_kind="bootstrap",
        n_particles=1024,
        resampler="multinomial",
        ess_rel=None,
        check_finite=True,
    ):
        if filter_kind not in ("kalman", "bootstrap"):
            raise ValueError(f"unknown filter {filter_kind!r}")
        self.ir = ir
        self.grid = grid
        self.inputs = inputs
        self.filter_kind = filter_kind
        self.n_particles = n_particles
        self.resampler = resampler
        self.ess_rel = ess_rel
        self.check_finite = check_finite

    def new_run(self, theta, init_state, rng):
        """Fresh, initialized (not yet advanced) filter run."""
        if self.filter_kind == "kalman":
            system = extract_linear_gaussian(self.ir, theta, self.grid.times, self.inputs)
            if init_state is not None:
                nx = len(init_state)
                system.initial = GaussianState(
                    np.asarray(init_state, dtype=float).copy(), np.zeros((nx, nx))
                )
            return KalmanRun(system, self.grid)
        run = ParticleRun(
            self.ir,
            theta,
            self.grid,
            inputs=self.inputs,
            n_particles=self.n_particles,
            resampler=self.resampler,
            ess_rel=self.ess_rel,
            initial_state=init_state,
            check_finite=self.check_finite,
        )
        return run.init(rng.child(0))

    def run(self, theta, init_state, rng, upto=None):
        """(loglik, trajectory, run) over grid steps 1..upto."""
        upto = self.grid.last if upto is None else upto
        run = self.new_run(theta, init_state, rng)
        run.advance_to(upto, rng.child(1))
        trajectory = run.sample_trajectory(rng.child(2))
        return run.loglik, trajectory, run


def _chain_log_prior(ir, theta, init_state):
    lp = simulate.parameter_logpdf(ir, theta)
    if init_state is not None:
        lp += simulate.initial_logpdf(ir, theta, init_state)
    return lp


def init_chain(ir, runner, rng, upto=None):
    """Draw theta (and x0, when proposed jointly) from the prior and run
    the filter once to anchor the chain."""
    theta = simulate.sample_parameter(ir, rng, size=1)[0]
    init_state = None
    if ir.block("proposal_initial") is not None:
        init_state = simulate.sample_initial(ir, theta, rng, size=1)[0]
    loglik, trajectory, _ = runner.run(theta, init_state, rng.child(_FILTER_KEY), upto=upto)
    return MhChainState(
        theta=theta,
        trajectory=trajectory,
        loglik=loglik,
        log_prior=_chain_log_prior(ir, theta, init_state),
        init_state=init_state,
    )


def marginal_mh_step(ir, chain, runner, rng, upto=None, reference=None):
    """One marginal MH transition; returns (new chain state, accepted, run).

    `reference` optionally overrides the current-state likelihood (used by
    the SMC rejuvenation step, whose reference spans the same window).
    On rejection the input state is returned unchanged.
    """
    theta_new, logq_fwd = simulate.propose_parameters(ir, chain.theta, rng)
    logq_rev = simulate.proposal_parameter_logpdf(ir, theta_new, chain.theta)
    init_new = None
    if chain.init_state is not None:
        init_new, lq = simulate.propose_initial(ir, theta_new, chain.init_state, rng)
        logq_fwd += lq
        logq_rev += simulate.proposal_initial_logpdf(ir, chain.theta, init_new, chain.init_state)
    log_prior_new = _chain_log_prior(ir, theta_new, init_new)
    if log_prior_new == -np.inf:
        return chain, False, None  # outside the prior support: auto-reject
    current_loglik = chain.loglik if reference is None else reference
    loglik_new, trajectory_new, run = runner.run(theta_new, init_new, rng.child(_FILTER_KEY), upto=upto)
    log_ratio = (loglik_new + log_prior_new + logq_rev) - (
        current_loglik + chain.log_prior + logq_fwd
    )
    if metropolis_accept(log_ratio, rng):
        new = MhChainState(
            theta=theta_new,
            trajectory=trajectory_new,
            loglik=loglik_new,
            log_prior=log_prior_new,
            init_state=init_new,
        )
        return new, True, run
    return chain, False, None


def mh_sample(ir, runner, n_samples, rng):
    """Drive marginal MH for n_samples steps from a prior initialization,
    recording every state (burn-in and thinning are post-processing).
    Returns (list of MhChainState, acceptance count)."""
    chains = []
    accepted = 0
    chain = init_chain(ir, runner, rng.child(0))
    for step in range(1, n_samples + 1):
        chain, ok, _ = marginal_mh_step(ir, chain, runner, rng.child(step))
        accepted += int(ok)
        chains.append(chain)
    return chains, accepted
