"""Bootstrap particle filter.

Particles are propagated through the transition prior and weighted by the
observation density; the likelihood estimate accumulates the per-step
log-mean-weight via log-sum-exp. Resampling happens on leaving a weighted
step (i.e. once per observation, matching the unconditional-resampling
pseudocode), unless an effective-sample-size threshold is configured. A
single state sample is extracted by drawing a final particle by weight and
tracing its ancestry backward.

Propagation is vectorized across particles; each grid step consumes draws
from a stream keyed by the step index, in a fixed order, so results are
identical for any worker count.
"""

import numpy as np
from scipy.special import logsumexp

from ..core import simulate
from ..errors import DegenerateEnsembleError
from .resampling import resample
from .types import FilterOutcome

_RESAMPLE_KEY = 0
_PROPAGATE_KEY = 1


class ParticleRun:
    """Resumable bootstrap particle filter along a FilterGrid."""

    def __init__(
        self,
        ir,
        theta,
        grid,
        inputs=None,
        n_particles=1024,
        resampler="multinomial",
        ess_rel=None,
        initial_state=None,
        check_finite=True,
    ):
        if n_particles < 2:
            raise ValueError("particle filter needs n_particles >= 2")
        self.ir = ir
        self.theta = np.asarray(theta, dtype=float).reshape(1, -1)
        self.grid = grid
        self.inputs = inputs
        self.n_particles = int(n_particles)
        self.resampler = resampler
        self.ess_rel = ess_rel
        self.initial_state = initial_state
        self.check_finite = check_finite
        self.loglik = 0.0
        self.pos = 0
        self.x = None  # (P, n_state)
        self.logw = None  # normalized: logsumexp(logw) == 0
        self.weights_uniform = True
        self.history = []  # per grid index: (positions, ancestors)

    def init(self, rng):
        P = self.n_particles
        if self.initial_state is not None:
            # conditioning on a fixed initial state (joint initial-state moves)
            self.x = np.tile(np.asarray(self.initial_state, dtype=float), (P, 1))
        else:
            self.x = simulate.sample_initial(self.ir, self.theta, rng, size=P)
        self.logw = np.full(P, -np.log(P))
        self.weights_uniform = True
        self.history = [(self.x, None)]
        return self

    def clone(self):
        other = ParticleRun.__new__(ParticleRun)
        other.__dict__ = dict(self.__dict__)
        other.history = list(self.history)
        return other

    @property
    def initialized(self):
        return self.x is not None

    def ess(self):
        w = np.exp(self.logw - logsumexp(self.logw))
        return 1.0 / float(np.sum(w * w))

    def advance_to(self, upto, rng):
        """Advance through grid index `upto`, deriving per-step streams from
        `rng`; returns the log-likelihood increment."""
        start_ll = self.loglik
        for i in range(self.pos + 1, upto + 1):
            self._step(i, rng.child(i))
        self.pos = max(self.pos, upto)
        return self.loglik - start_ll

    def _maybe_resample(self, rng):
        if self.weights_uniform:
            return np.arange(self.n_particles)
        if self.ess_rel is not None and self.ess() >= self.ess_rel * self.n_particles:
            return np.arange(self.n_particles)
        ancestors = resample(np.exp(self.logw), self.resampler, rng)
        self.x = self.x[ancestors]
        self.logw = np.full(self.n_particles, -np.log(self.n_particles))
        self.weights_uniform = True
        return ancestors

    def _step(self, i, rng_i):
        grid = self.grid
        ancestors = self._maybe_resample(rng_i.child(_RESAMPLE_KEY))
        t_prev, t_cur = grid.times[i - 1], grid.times[i]
        self.x = simulate.step_transition(
            self.ir,
            self.theta,
            self.x,
            self.inputs,
            t_prev,
            t_cur - t_prev,
            rng_i.child(_PROPAGATE_KEY),
            check_finite=self.check_finite,
        )
        obs = grid.obs_at(i)
        if obs is not None:
            y, mask = obs
            inputs_now = self.inputs.at(t_cur) if hasattr(self.inputs, "at") else self.inputs
            g = simulate.observe_logpdf(self.ir, self.theta, self.x, inputs_now, y, mask)
            logw_new = self.logw + g
            incr = float(logsumexp(logw_new))
            if not np.isfinite(incr):
                raise DegenerateEnsembleError(
                    f"all particle weights vanished at t={t_cur:g}", time=t_cur
                )
            self.loglik += incr
            self.logw = logw_new - incr
            self.weights_uniform = False
        self.history.append((self.x, ancestors))

    def sample_trajectory(self, rng):
        """Draw one particle by final weight and trace its ancestry back;
        reaches grid index 0 in exactly `pos` hops."""
        j = int(resample(np.exp(self.logw), "multinomial", rng, size=1)[0])
        s = self.pos
        nx = self.x.shape[1]
        out = np.empty((s + 1, nx))
        for i in range(s, 0, -1):
            positions, ancestors = self.history[i]
            out[i] = positions[j]
            j = int(ancestors[j])
        out[0] = self.history[0][0][j]
        return out

    def weighted_mean(self):
        w = np.exp(self.logw - logsumexp(self.logw))
        return w @ self.x


def particle_filter(
    ir,
    theta,
    grid,
    rng,
    inputs=None,
    n_particles=1024,
    resampler="multinomial",
    ess_rel=None,
    initial_state=None,
    check_finite=True,
    upto=None,
):
    """Run the bootstrap filter over the grid and draw one ancestry-traced
    state sample; returns a FilterOutcome with per-time weighted means."""
    run = ParticleRun(
        ir,
        theta,
        grid,
        inputs=inputs,
        n_particles=n_particles,
        resampler=resampler,
        ess_rel=ess_rel,
        initial_state=initial_state,
        check_finite=check_finite,
    )
    run.init(rng.child(0))
    run.advance_to(grid.last if upto is None else upto, rng.child(1))
    trajectory = run.sample_trajectory(rng.child(2))
    return FilterOutcome(loglik=run.loglik, trajectory=trajectory, summaries=[], run=run)
