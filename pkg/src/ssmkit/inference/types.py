"""Shared result types for the filters."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FilterOutcome:
    """Result of one filter pass over a window.

    loglik is log p(y | theta) over the window's observations (exact for
    the Kalman filter, an unbiased estimate for the particle filter);
    trajectory is one posterior state sample at every grid time; summaries
    holds per-time filtered moments.
    """

    loglik: float
    trajectory: np.ndarray  # (S+1, n_state)
    summaries: list = field(default_factory=list)
    run: object = None  # the resumable filter state that produced this
