"""Square-root Kalman filter with marginal likelihood and backward sampling.

Prediction and correction follow the classic factored recursions on the
upper-triangular factor U (Sigma = U^T U): the predicted covariance and the
observation-prediction covariance are formed explicitly and re-factorized,
the correction is a Cholesky downdate by the gain, and the marginal
likelihood accumulates the per-step Gaussian terms in log domain. A
backward pass draws a single smoothing trajectory using the stored
cross-covariance factors.

Missing observation slots are handled by dropping the corresponding
columns of G (and entries of c, R) at that step; a step with no present
slots is pure prediction and contributes nothing to the likelihood.
"""

import math

import numpy as np

from ..linalg import GaussianState, cholesky_downdate, cholesky_factorize, triangular_solve
from .types import FilterOutcome

_LOG_2PI = math.log(2.0 * math.pi)


class KalmanRun:
    """Resumable square-root Kalman filter along a FilterGrid."""

    def __init__(self, system, grid):
        if len(system.times) != len(grid.times) or not np.allclose(system.times, grid.times):
            raise ValueError("system and grid time axes differ")
        self.system = system
        self.grid = grid
        self.loglik = 0.0
        self.pos = 0
        init = system.initial
        # per grid index: (mu, U, mu_hat, U_hat, C); predictions are None at 0
        self.records = [(init.mean.copy(), init.sqrt_cov.copy(), None, None, None)]

    def clone(self):
        other = KalmanRun.__new__(KalmanRun)
        other.system = self.system
        other.grid = self.grid
        other.loglik = self.loglik
        other.pos = self.pos
        other.records = list(self.records)
        return other

    def advance_to(self, upto, rng=None):
        """Run prediction/correction through grid index `upto`; returns the
        log-likelihood increment over the advanced steps."""
        start_ll = self.loglik
        for i in range(self.pos + 1, upto + 1):
            self._step(i)
        self.pos = max(self.pos, upto)
        return self.loglik - start_ll

    def _step(self, i):
        st = self.system.steps[i - 1]
        mu, U = self.records[i - 1][0], self.records[i - 1][1]
        # state prediction
        mu_hat = st.F.T @ mu + st.b
        UF = U @ st.F
        sigma_hat = UF.T @ UF + st.Qu.T @ st.Qu
        C = (U.T @ U) @ st.F
        U_hat = cholesky_factorize(sigma_hat)

        obs = self.grid.obs_at(i)
        if obs is None:
            self.records.append((mu_hat, U_hat, mu_hat, U_hat, C))
            return
        y_all, mask = obs
        present = np.flatnonzero(mask)
        G = st.G[:, present]
        c = st.c[present]
        r_sd = st.r_sd[present]
        y = y_all[present]
        # observation prediction
        nu = G.T @ mu_hat + c
        sigma_hh = U_hat.T @ U_hat
        D = sigma_hh @ G
        T = G.T @ sigma_hh @ G + np.diag(r_sd**2)
        V = cholesky_factorize(T)
        # correction
        K = triangular_solve(V, D.T, side="right")  # D V^{-1}
        resid = triangular_solve(V, y - nu, trans=True)  # V^{-T} (y - nu)
        mu_new = mu_hat + K @ resid
        U_new = cholesky_downdate(U_hat, K.T)
        self.loglik += -0.5 * _LOG_2PI * len(present) - float(
            np.sum(np.log(np.diag(V)))
        ) - 0.5 * float(resid @ resid)
        self.records.append((mu_new, U_new, mu_hat, U_hat, C))

    def filtered(self, i):
        mu, U = self.records[i][0], self.records[i][1]
        return GaussianState(mu, U)

    def sample_trajectory(self, rng):
        """Backward smoothing sample x'(t_{0:pos})."""
        s = self.pos
        nx = self.records[0][0].shape[0]
        out = np.empty((s + 1, nx))
        mu_s, U_s = self.records[s][0], self.records[s][1]
        out[s] = mu_s + U_s.T @ rng.standard_normal(nx)
        for i in range(s - 1, -1, -1):
            mu_i, U_i = self.records[i][0], self.records[i][1]
            _, _, mu_hat, U_hat, C = self.records[i + 1]
            K = triangular_solve(U_hat, C, side="right")  # C U_hat^{-1}
            omega = mu_i + K @ triangular_solve(U_hat, out[i + 1] - mu_hat, trans=True)
            W = cholesky_factorize(U_i.T @ U_i - K @ K.T)
            out[i] = omega + W.T @ rng.standard_normal(nx)
        return out


def kalman_filter(system, grid, rng, upto=None):
    """Filter over the whole grid (or through `upto`) and draw one
    smoothing trajectory; returns a FilterOutcome."""
    run = KalmanRun(system, grid)
    run.advance_to(grid.last if upto is None else upto)
    trajectory = run.sample_trajectory(rng)
    summaries = [run.filtered(i) for i in range(run.pos + 1)]
    return FilterOutcome(loglik=run.loglik, trajectory=trajectory, summaries=summaries, run=run)
