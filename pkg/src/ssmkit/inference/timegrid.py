"""Filter time grids.

A run's grid is the sorted union of the output times (noutputs equispaced
intervals over [start, end], plus the initial time) and the observation
times falling in (start, end]. Filters weight/correct only at steps that
carry at least one present observation slot; other steps are pure
propagation. Times closer than a relative tolerance are merged.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataFormatError

_TIME_RTOL = 1e-9


def output_times(start, end, n_outputs):
    if end <= start:
        raise DataFormatError(f"end time {end} must be after start time {start}")
    if n_outputs < 1:
        raise DataFormatError("noutputs must be >= 1")
    return np.linspace(start, end, n_outputs + 1)


def _same_time(a, b):
    return abs(a - b) <= _TIME_RTOL * max(1.0, abs(a), abs(b))


@dataclass
class FilterGrid:
    times: np.ndarray  # t_0 .. t_S, strictly increasing
    is_output: np.ndarray  # bool per grid index
    obs_row: np.ndarray  # int per grid index; -1 when no observation
    obs_values: np.ndarray  # (n_rows, n_obs)
    obs_mask: np.ndarray  # (n_rows, n_obs) bool
    obs_steps: list = field(default_factory=list)  # grid indices with >=1 present slot

    @property
    def last(self):
        return len(self.times) - 1

    def obs_at(self, i):
        """(values, mask) at grid index i, or None if nothing is observed."""
        row = self.obs_row[i]
        if row < 0 or not self.obs_mask[row].any():
            return None
        return self.obs_values[row], self.obs_mask[row]


def build_filter_grid(start, end, n_outputs, obs_times=None, obs_values=None, obs_mask=None, n_obs=0):
    """Merge the output grid with observation times into a FilterGrid.

    Observation rows outside (start, end] are dropped (e.g. data held back
    for later prediction windows).
    """
    out = output_times(start, end, n_outputs)
    if obs_times is None:
        obs_times = np.zeros(0)
        obs_values = np.zeros((0, n_obs))
        obs_mask = np.zeros((0, n_obs), dtype=bool)
    obs_times = np.asarray(obs_times, dtype=float)
    keep = [
        k
        for k, t in enumerate(obs_times)
        if (t > start and not _same_time(t, start)) and (t < end or _same_time(t, end))
    ]
    obs_times = obs_times[keep]
    obs_values = np.asarray(obs_values, dtype=float)[keep]
    obs_mask = np.asarray(obs_mask, dtype=bool)[keep]
    if len(obs_times) > 1 and np.any(np.diff(obs_times) <= 0):
        raise DataFormatError("observation times must be strictly increasing")

    events = [(t, True, -1) for t in out] + [
        (t, False, k) for k, t in enumerate(obs_times)
    ]
    events.sort(key=lambda e: e[0])
    times, is_output, obs_row = [], [], []
    for t, is_out, row in events:
        if times and _same_time(times[-1], t):
            is_output[-1] = is_output[-1] or is_out
            if row >= 0:
                obs_row[-1] = row
            continue
        times.append(t)
        is_output.append(is_out)
        obs_row.append(row)
    grid = FilterGrid(
        times=np.array(times),
        is_output=np.array(is_output, dtype=bool),
        obs_row=np.array(obs_row, dtype=int),
        obs_values=obs_values,
        obs_mask=obs_mask,
    )
    grid.obs_steps = [i for i in range(1, len(grid.times)) if grid.obs_at(i) is not None]
    return grid
