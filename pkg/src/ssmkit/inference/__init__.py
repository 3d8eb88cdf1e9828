from .kalman import KalmanRun, kalman_filter
from .mcmc import FilterRunner, MhChainState, marginal_mh_step, mh_sample
from .particle import ParticleRun, particle_filter
from .resampling import SCHEMES, resample
from .smc import SmcResult, smc_sampler
from .timegrid import FilterGrid, build_filter_grid, output_times
from .types import FilterOutcome

__all__ = [
    "KalmanRun",
    "kalman_filter",
    "FilterRunner",
    "MhChainState",
    "marginal_mh_step",
    "mh_sample",
    "ParticleRun",
    "particle_filter",
    "SCHEMES",
    "resample",
    "SmcResult",
    "smc_sampler",
    "FilterGrid",
    "build_filter_grid",
    "output_times",
    "FilterOutcome",
]
