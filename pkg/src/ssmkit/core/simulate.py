"""Execution of model blocks: prior/initial sampling, the transition step
(including fixed-step RK4 ode integration), observation densities and
simulated observations, plus proposal-block machinery for MH moves.

All evaluation is vectorized over a batch of particles. Within a single
statement the implicit dim loop is simultaneous (argument expressions see
the pre-statement environment); across statements execution is sequential.
"""

import math

import numpy as np

from ..errors import NonFiniteStateError
from . import distributions as dist
from .distributions import DistKind
from .ir import AssignStmtOp, ModelIr, OdeOp, SampleStmtOp


def _inputs_at(inputs, t, n_input):
    if inputs is None:
        return np.zeros(n_input)
    if hasattr(inputs, "at"):
        return inputs.at(t)
    return np.asarray(inputs, dtype=float)


def substep_schedule(t, dt, delta):
    """Sub-step start times and durations covering (t, t+dt].

    ceil(dt/delta) sub-steps of length delta, the last one shortened; a
    relative tolerance absorbs float noise in grid spacings.
    """
    if delta is None:
        return [(t, dt)]
    n_sub = max(1, int(np.ceil(dt / delta - 1e-9)))
    t_end = t + dt
    return [(t + k * delta, min(delta, t_end - (t + k * delta))) for k in range(n_sub)]


def _as_batch(theta):
    theta = np.asarray(theta, dtype=float)
    return theta[None, :] if theta.ndim == 1 else theta


def _write(array, slot, value):
    array[:, slot] = value


def _exec_sample(op: SampleStmtOp, arrays, U, rng, size, delta_sub=None):
    T, X, W = arrays["param"], arrays["state"], arrays["noise"]
    target = arrays[op.role]
    if op.kind is DistKind.WIENER:
        sd = math.sqrt(delta_sub)
        for slot in op.slots:
            _write(target, slot, rng.normal(0.0, sd, size=size))
        return
    args_all = [tuple(f(T, X, W, U) for f in fns) for fns in op.arg_fns]
    for slot, args in zip(op.slots, args_all):
        _write(target, slot, dist.sample(op.kind, args, size, rng))


def _exec_assign(op: AssignStmtOp, arrays, U):
    T, X, W = arrays["param"], arrays["state"], arrays["noise"]
    values = [f(T, X, W, U) for f in op.fns]
    target = arrays[op.role]
    for slot, value in zip(op.slots, values):
        _write(target, slot, value)


def _exec_ode(op: OdeOp, arrays, U, duration):
    T, X, W = arrays["param"], arrays["state"], arrays["noise"]
    slots = list(op.slots)
    m = len(slots)
    P = X.shape[0]

    def deriv(stage):
        Xs = X.copy()
        Xs[:, slots] = stage
        out = np.empty((P, m))
        for j, f in enumerate(op.fns):
            out[:, j] = f(T, Xs, W, U)
        return out

    n_steps = max(1, int(np.ceil(duration / op.h - 1e-9)))
    for k in range(n_steps):
        s = min(op.h, duration - k * op.h)
        y0 = X[:, slots].copy()
        k1 = deriv(y0)
        k2 = deriv(y0 + 0.5 * s * k1)
        k3 = deriv(y0 + 0.5 * s * k2)
        k4 = deriv(y0 + s * k3)
        X[:, slots] = y0 + (s / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def sample_parameter(ir: ModelIr, rng, size=1):
    """Draw `size` parameter vectors from the prior; shape (size, n_param)."""
    arrays = {
        "param": np.zeros((size, ir.n_param)),
        "state": np.zeros((size, 0)),
        "noise": np.zeros((size, 0)),
    }
    U = np.zeros(ir.n_input)
    block = ir.block("parameter")
    if block is not None:
        for op in block.ops:
            _exec_sample(op, arrays, U, rng, size)
    return arrays["param"]


def sample_initial(ir: ModelIr, theta, rng, size=None):
    """Draw initial state vectors given theta; shape (size, n_state)."""
    T = _as_batch(theta)
    if size is None:
        size = T.shape[0]
    arrays = {
        "param": T,
        "state": np.zeros((size, ir.n_state)),
        "noise": np.zeros((size, 0)),
    }
    U = np.zeros(ir.n_input)
    block = ir.block("initial")
    if block is not None:
        for op in block.ops:
            if isinstance(op, SampleStmtOp):
                _exec_sample(op, arrays, U, rng, size)
            else:
                _exec_assign(op, arrays, U)
    return arrays["state"]


def step_transition(ir: ModelIr, theta, x, inputs, t, dt, rng, check_finite=True):
    """Advance the state over (t, t+dt], sub-stepping at the block's delta.

    Noise variables are re-sampled once per sub-step; a wiener() increment
    has sd sqrt(sub-step duration). Returns the new state batch.
    """
    if dt <= 0:
        raise ValueError("step_transition requires dt > 0")
    X = np.array(x, dtype=float, copy=True)
    if X.ndim == 1:
        X = X[None, :]
    P = X.shape[0]
    T = _as_batch(theta)
    block = ir.block("transition")
    if block is None:
        return X
    arrays = {"param": T, "state": X, "noise": np.zeros((P, ir.n_noise))}
    for t_k, d in substep_schedule(t, dt, ir.delta):
        U = _inputs_at(inputs, t_k, ir.n_input)
        for op in block.ops:
            if isinstance(op, SampleStmtOp):
                _exec_sample(op, arrays, U, rng, P, delta_sub=d)
            elif isinstance(op, AssignStmtOp):
                _exec_assign(op, arrays, U)
            else:
                _exec_ode(op, arrays, U, d)
        if check_finite and not np.all(np.isfinite(X)):
            raise NonFiniteStateError(
                f"non-finite state after transition sub-step ending at t={t_k + d:g}",
                time=t_k + d,
            )
    return X


def observe_logpdf(ir: ModelIr, theta, x, inputs, y, mask):
    """Sum of observation log-densities over the present slots.

    `y` holds a value per obs slot; `mask` marks which slots are present.
    Masked slots contribute 0. Returns shape (batch,).
    """
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    P = X.shape[0]
    T = _as_batch(theta)
    arrays = {"param": T, "state": X, "noise": np.zeros((P, ir.n_noise))}
    if hasattr(inputs, "at"):
        raise TypeError("observe_logpdf needs input values at the observation time, not a provider")
    U = _inputs_at(inputs, None, ir.n_input)
    total = np.zeros(P)
    block = ir.block("observation")
    if block is None:
        return total
    y = np.asarray(y, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    for op in block.ops:
        for slot, fns in zip(op.slots, op.arg_fns):
            if not mask[slot]:
                continue
            args = tuple(f(arrays["param"], arrays["state"], arrays["noise"], U) for f in fns)
            total = total + dist.logpdf(op.kind, args, y[slot])
    return total


def simulate_obs(ir: ModelIr, theta, x, inputs, rng):
    """Sampling counterpart of observe_logpdf; returns (batch, n_obs)."""
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    P = X.shape[0]
    T = _as_batch(theta)
    arrays = {
        "param": T,
        "state": X,
        "noise": np.zeros((P, ir.n_noise)),
        "obs": np.zeros((P, ir.n_obs)),
    }
    U = _inputs_at(inputs, None, ir.n_input)
    block = ir.block("observation")
    if block is not None:
        for op in block.ops:
            _exec_sample(op, arrays, U, rng, P)
    return arrays["obs"]


# --- log-densities of the parameter / initial factors -------------------------


def parameter_logpdf(ir: ModelIr, theta):
    """log p(theta): sum of parameter-block densities at theta."""
    theta = np.asarray(theta, dtype=float)
    arrays = {"param": theta[None, :], "state": np.zeros((1, 0)), "noise": np.zeros((1, 0))}
    U = np.zeros(ir.n_input)
    total = 0.0
    block = ir.block("parameter")
    if block is None:
        return total
    for op in block.ops:
        for slot, fns in zip(op.slots, op.arg_fns):
            args = tuple(f(arrays["param"], arrays["state"], arrays["noise"], U) for f in fns)
            total += float(np.sum(dist.logpdf(op.kind, args, theta[slot])))
    return total


def initial_logpdf(ir: ModelIr, theta, x0):
    """log p(x0 | theta) over the sampled slots of the initial block."""
    theta = np.asarray(theta, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    arrays = {"param": theta[None, :], "state": x0[None, :], "noise": np.zeros((1, 0))}
    U = np.zeros(ir.n_input)
    total = 0.0
    block = ir.block("initial")
    if block is None:
        return total
    for op in block.ops:
        if not isinstance(op, SampleStmtOp):
            continue
        for slot, fns in zip(op.slots, op.arg_fns):
            args = tuple(f(arrays["param"], arrays["state"], arrays["noise"], U) for f in fns)
            total += float(np.sum(dist.logpdf(op.kind, args, x0[slot])))
    return total


def apply_initial_assigns(ir: ModelIr, theta, x0):
    """Recompute the deterministic (assigned) initial slots for theta."""
    block = ir.block("initial")
    x = np.array(x0, dtype=float, copy=True)[None, :]
    if block is None:
        return x[0]
    arrays = {"param": _as_batch(theta), "state": x, "noise": np.zeros((1, 0))}
    U = np.zeros(ir.n_input)
    for op in block.ops:
        if isinstance(op, AssignStmtOp):
            _exec_assign(op, arrays, U)
    return x[0]


# --- proposal blocks --------------------------------------------------------


def _walk_proposal(ir, block_name, fallback, arrays, role, values_from, values_to, rng):
    """Shared walk for proposal sampling/density.

    Statements execute sequentially with overwrite: statement k's arguments
    see proposed values for earlier statements and current values for later
    ones. If values_to is None, values are sampled (and returned); otherwise
    the density of values_to given the walk is accumulated.
    """
    block = ir.block(block_name) or ir.block(fallback)
    env = arrays[role]
    U = np.zeros(ir.n_input)
    logq = 0.0
    out = np.array(values_from, dtype=float, copy=True)
    for op in block.ops:
        if not isinstance(op, SampleStmtOp):
            continue
        args_all = [
            tuple(f(arrays["param"], arrays["state"], arrays["noise"], U) for f in fns)
            for fns in op.arg_fns
        ]
        for slot, args in zip(op.slots, args_all):
            if values_to is None:
                value = float(dist.sample(op.kind, args, 1, rng)[0])
            else:
                value = float(values_to[slot])
            logq += float(np.sum(dist.logpdf(op.kind, args, value)))
            out[slot] = value
            env[0, slot] = value
    return out, logq


def propose_parameters(ir: ModelIr, theta, rng):
    """Draw theta' ~ q(.|theta) from proposal_parameter, or from the prior
    as an automatic independence proposal when no proposal block exists.
    Returns (theta', log q(theta'|theta))."""
    theta = np.asarray(theta, dtype=float)
    arrays = {
        "param": theta[None, :].copy(),
        "state": np.zeros((1, ir.n_state)),
        "noise": np.zeros((1, 0)),
    }
    return _walk_proposal(ir, "proposal_parameter", "parameter", arrays, "param", theta, None, rng)


def proposal_parameter_logpdf(ir: ModelIr, theta_from, theta_to):
    """log q(theta_to | theta_from) under the same sequential semantics."""
    theta_from = np.asarray(theta_from, dtype=float)
    arrays = {
        "param": theta_from[None, :].copy(),
        "state": np.zeros((1, ir.n_state)),
        "noise": np.zeros((1, 0)),
    }
    _, logq = _walk_proposal(
        ir, "proposal_parameter", "parameter", arrays, "param", theta_from, theta_to, None
    )
    return logq


def propose_initial(ir: ModelIr, theta, x0, rng):
    """Draw x0' ~ q(.|x0) from proposal_initial (assumes the block exists);
    deterministic initial slots are recomputed for theta."""
    x0 = np.asarray(x0, dtype=float)
    arrays = {
        "param": _as_batch(theta).copy(),
        "state": x0[None, :].copy(),
        "noise": np.zeros((1, 0)),
    }
    out, logq = _walk_proposal(ir, "proposal_initial", "initial", arrays, "state", x0, None, rng)
    out = apply_initial_assigns(ir, theta, out)
    return out, logq


def proposal_initial_logpdf(ir: ModelIr, theta, x_from, x_to):
    x_from = np.asarray(x_from, dtype=float)
    arrays = {
        "param": _as_batch(theta).copy(),
        "state": x_from[None, :].copy(),
        "noise": np.zeros((1, 0)),
    }
    _, logq = _walk_proposal(ir, "proposal_initial", "initial", arrays, "state", x_from, x_to, None)
    return logq
