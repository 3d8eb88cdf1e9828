"""Multinomial, stratified and systematic resampling.

All three produce ancestor indices with E[#copies of k] = P * w_k / sum(w):
multinomial draws P independent uniforms, stratified one uniform per
stratum, systematic a single uniform shared by all strata.
"""

import numpy as np

from ..errors import DegenerateEnsembleError

SCHEMES = ("multinomial", "stratified", "systematic")


def resample(weights, scheme, rng, size=None):
    """Draw ancestor indices proportional to `weights` (>= 0, sum > 0)."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty vector")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    total = w.sum()
    if total <= 0:
        raise DegenerateEnsembleError("all resampling weights are zero")
    P = w.size if size is None else int(size)
    cum = np.cumsum(w / total)
    cum[-1] = 1.0
    if scheme == "multinomial":
        u = rng.uniform(size=P)
    elif scheme == "stratified":
        u = (np.arange(P) + rng.uniform(size=P)) / P
    elif scheme == "systematic":
        u = (np.arange(P) + rng.uniform()) / P
    else:
        raise ValueError(f"unknown resampling scheme {scheme!r}")
    return np.searchsorted(cum, u, side="right").clip(0, w.size - 1)
