"""Run-output files: per-sample parameters, weights and log-likelihoods, a
trajectory table on the output time grid, and (for joint runs) simulated
observations, preceded by `# key: value` metadata lines. Deterministic
formatting keeps equal-seed runs byte-identical; posterior outputs are
re-read as the init file of prediction runs.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError


def _fmt(value):
    return repr(float(value))


@dataclass
class SampleRecord:
    index: int
    weight: float
    loglik: float  # nan when not applicable (prior/joint)
    theta: np.ndarray  # (n_param,)
    times: np.ndarray  # output times
    states: np.ndarray  # (len(times), n_state)
    obs: np.ndarray = None  # (len(times), n_obs) for joint runs


@dataclass
class RunOutput:
    metadata: dict
    param_labels: list
    state_labels: list
    obs_labels: list = field(default_factory=list)
    records: list = field(default_factory=list)


def write_run_output(path, out: RunOutput):
    lines = ["# ssmkit samples v1"]
    for key, value in out.metadata.items():
        lines.append(f"# {key}: {value}")
    lines.append("[parameters]")
    lines.append(",".join(["sample", "weight", "loglik"] + out.param_labels))
    for rec in out.records:
        ll = "" if np.isnan(rec.loglik) else _fmt(rec.loglik)
        lines.append(
            ",".join([str(rec.index), _fmt(rec.weight), ll] + [_fmt(v) for v in rec.theta])
        )
    lines.append("[trajectories]")
    lines.append(",".join(["sample", "time"] + out.state_labels))
    for rec in out.records:
        for r, t in enumerate(rec.times):
            lines.append(
                ",".join([str(rec.index), _fmt(t)] + [_fmt(v) for v in rec.states[r]])
            )
    if any(rec.obs is not None for rec in out.records):
        lines.append("[observations]")
        lines.append(",".join(["sample", "time"] + out.obs_labels))
        for rec in out.records:
            if rec.obs is None:
                continue
            for r, t in enumerate(rec.times):
                row = [str(rec.index), _fmt(t)]
                row += ["" if not np.isfinite(v) else _fmt(v) for v in rec.obs[r]]
                lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_run_output(path):
    metadata = {}
    sections = {}
    current = None
    with open(path, "r", encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.rstrip("\n")
            if not ln.strip():
                continue
            if ln.startswith("#"):
                body = ln[1:].strip()
                if ":" in body:
                    key, _, value = body.partition(":")
                    metadata[key.strip()] = value.strip()
                continue
            if ln.startswith("[") and ln.endswith("]"):
                current = ln[1:-1]
                sections[current] = []
                continue
            if current is None:
                raise DataFormatError(f"{path}: data before any section header")
            sections[current].append(ln.split(","))
    if "parameters" not in sections or "trajectories" not in sections:
        raise DataFormatError(f"{path}: not a samples file (missing sections)")

    prows = sections["parameters"]
    param_labels = prows[0][3:]
    by_index = {}
    order = []
    for row in prows[1:]:
        idx = int(row[0])
        weight = float(row[1])
        loglik = float(row[2]) if row[2] != "" else float("nan")
        theta = np.array([float(v) for v in row[3:]])
        by_index[idx] = SampleRecord(
            index=idx, weight=weight, loglik=loglik, theta=theta,
            times=None, states=None,
        )
        order.append(idx)

    trows = sections["trajectories"]
    state_labels = trows[0][2:]
    traj = {idx: ([], []) for idx in by_index}
    for row in trows[1:]:
        idx = int(row[0])
        if idx not in traj:
            raise DataFormatError(f"{path}: trajectory row for unknown sample {idx}")
        traj[idx][0].append(float(row[1]))
        traj[idx][1].append([float(v) for v in row[2:]])
    for idx, (times, states) in traj.items():
        rec = by_index[idx]
        rec.times = np.array(times)
        rec.states = np.array(states) if states else np.zeros((0, len(state_labels)))

    obs_labels = []
    if "observations" in sections:
        orows = sections["observations"]
        obs_labels = orows[0][2:]
        obs = {idx: [] for idx in by_index}
        for row in orows[1:]:
            idx = int(row[0])
            obs[idx].append([float(v) if v != "" else float("nan") for v in row[2:]])
        for idx, rows in obs.items():
            if rows:
                by_index[idx].obs = np.array(rows)

    return RunOutput(
        metadata=metadata,
        param_labels=param_labels,
        state_labels=state_labels,
        obs_labels=obs_labels,
        records=[by_index[i] for i in order],
    )
