"""Affine extraction of linear-Gaussian structure from a model IR.

The transition and observation blocks are executed symbolically with each
quantity carried as an affine form c + a.x + b.z over the current state
slots x and the standard-normal draws z behind every Gaussian/wiener noise
sample. Any operation that would leave the affine family (a product of two
state-dependent terms, a nonlinear function of a state-dependent argument,
a state-dependent standard deviation, a non-Gaussian sample) raises
NonlinearModelError, which is exactly the verification that all second
derivatives with respect to the state vanish structurally.

Sub-stepping and input look-up mirror simulate.step_transition, so the
extracted one-step system is the exact affine map the simulator applies.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core.distributions import DistKind
from .core.ir import AssignStmtOp, OdeOp, SampleStmtOp, canonical_dist_args, resolve_slot
from .core.simulate import _inputs_at, substep_schedule
from .errors import NonlinearModelError
from .lang import ast as A
from .linalg import GaussianState, cholesky_factorize


class _Aff:
    """Affine form: c + ax . x + sum_j az[j] . z_j."""

    __slots__ = ("c", "ax", "az")

    def __init__(self, c=0.0, ax=None, az=None, nx=0):
        self.c = float(c)
        self.ax = np.zeros(nx) if ax is None else ax
        self.az = {} if az is None else az

    def is_const(self):
        return not self.az and not np.any(self.ax)

    def copy(self):
        return _Aff(self.c, self.ax.copy(), dict(self.az))


class _Extractor:
    def __init__(self, ir, theta, inputs):
        self.ir = ir
        self.theta = np.asarray(theta, dtype=float).reshape(-1)
        self.inputs = inputs
        self.nx = ir.n_state
        self.n_z = 0
        self.U = np.zeros(ir.n_input)

    # -- affine arithmetic -------------------------------------------------

    def const(self, value):
        return _Aff(value, nx=self.nx)

    def fresh_z(self, coef):
        a = _Aff(nx=self.nx)
        a.az[self.n_z] = float(coef)
        self.n_z += 1
        return a

    def add(self, a, b):
        out = a.copy()
        out.c += b.c
        out.ax = out.ax + b.ax
        for k, v in b.az.items():
            out.az[k] = out.az.get(k, 0.0) + v
        return out

    def scale(self, a, s):
        out = _Aff(a.c * s, a.ax * s, {k: v * s for k, v in a.az.items()}, nx=self.nx)
        return out

    def neg(self, a):
        return self.scale(a, -1.0)

    def mul(self, a, b, where):
        if a.is_const():
            return self.scale(b, a.c)
        if b.is_const():
            return self.scale(a, b.c)
        raise NonlinearModelError(f"product of state-dependent terms in {where}")

    def div(self, a, b, where):
        if not b.is_const():
            raise NonlinearModelError(f"state-dependent divisor in {where}")
        return self.scale(a, 1.0 / b.c)

    # -- expression walk -----------------------------------------------------

    def eval(self, expr, binding, state, noise, where):
        ir = self.ir
        if isinstance(expr, A.Num):
            return self.const(expr.value)
        if isinstance(expr, A.Unary):
            return self.neg(self.eval(expr.operand, binding, state, noise, where))
        if isinstance(expr, A.Binary):
            left = self.eval(expr.left, binding, state, noise, where)
            right = self.eval(expr.right, binding, state, noise, where)
            if expr.op == "+":
                return self.add(left, right)
            if expr.op == "-":
                return self.add(left, self.neg(right))
            if expr.op == "*":
                return self.mul(left, right, where)
            return self.div(left, right, where)
        if isinstance(expr, A.Call):
            args = [self.eval(a, binding, state, noise, where) for a in expr.args]
            if any(not a.is_const() for a in args):
                raise NonlinearModelError(
                    f"nonlinear function {expr.name} of a state-dependent argument in {where}"
                )
            fn = {"exp": math.exp, "sqrt": math.sqrt, "sin": math.sin, "pow": math.pow, "mod": math.fmod}[
                expr.name
            ]
            vals = [a.c for a in args]
            if expr.name == "mod":
                return self.const(vals[0] - vals[1] * math.floor(vals[0] / vals[1]))
            return self.const(fn(*vals))
        if isinstance(expr, A.VarRef):
            if expr.name in ir.consts:
                return self.const(ir.consts[expr.name])
            var = ir.vars[expr.name]
            slot = resolve_slot(var, expr.indices, binding)
            if var.role == "param":
                return self.const(self.theta[slot])
            if var.role == "input":
                return self.const(self.U[slot])
            if var.role == "state":
                return state[slot].copy()
            if var.role == "noise":
                return noise[slot].copy()
            raise NonlinearModelError(f"{var.role} {var.name} read in {where}")
        raise TypeError(f"not an expression node: {expr!r}")

    # -- block walks -----------------------------------------------------------

    def _sample_aff(self, op: SampleStmtOp, binding_index, state, noise, where, wiener_sd=None):
        """Affine form of one sampled slot: mean + sd * fresh z."""
        stmt = op.stmt
        binding = op.bindings[binding_index]
        if op.kind is DistKind.WIENER:
            return self.fresh_z(wiener_sd)
        if op.kind is not DistKind.GAUSSIAN:
            raise NonlinearModelError(f"non-Gaussian sample of {op.labels[binding_index]} in {where}")
        _, arg_exprs = canonical_dist_args(stmt.dist)
        mean = self.eval(arg_exprs[0], binding, state, noise, where)
        sd = self.eval(arg_exprs[1], binding, state, noise, where)
        if not sd.is_const():
            raise NonlinearModelError(f"state-dependent sd of {op.labels[binding_index]} in {where}")
        return self.add(mean, self.fresh_z(sd.c))

    def run_initial(self):
        """Gaussian initial state (mu0, U0) from the initial block."""
        ir = self.ir
        state = [self.const(0.0) for _ in range(self.nx)]
        block = ir.block("initial")
        for op in block.ops if block else ():
            if isinstance(op, SampleStmtOp):
                for i, slot in enumerate(op.slots):
                    state[slot] = self._sample_aff(op, i, state, None, "initial")
            elif isinstance(op, AssignStmtOp):
                values = [
                    self.eval(op.stmt.expr, op.bindings[i], state, None, "initial")
                    for i in range(len(op.slots))
                ]
                for slot, v in zip(op.slots, values):
                    state[slot] = v
            else:
                raise NonlinearModelError("ode in initial block")
        return state

    def run_transition_interval(self, t, dt, state):
        """Advance affine state over (t, t+dt], sub-stepping like the simulator."""
        ir = self.ir
        block = ir.block("transition")
        noise = [self.const(0.0) for _ in range(ir.n_noise)]
        for t_k, d in substep_schedule(t, dt, ir.delta):
            self.U = _inputs_at(self.inputs, t_k, ir.n_input)
            for op in block.ops:
                if isinstance(op, SampleStmtOp):
                    for i, slot in enumerate(op.slots):
                        noise[slot] = self._sample_aff(
                            op, i, state, noise, "transition", wiener_sd=math.sqrt(d)
                        )
                elif isinstance(op, AssignStmtOp):
                    values = [
                        self.eval(op.stmt.expr, op.bindings[i], state, noise, "transition")
                        for i in range(len(op.slots))
                    ]
                    for slot, v in zip(op.slots, values):
                        state[slot] = v
                else:
                    self._rk4(op, state, noise, d)
        return state

    def _rk4(self, op: OdeOp, state, noise, duration):
        slots = list(op.slots)

        def deriv(stage):
            full = [s.copy() for s in state]
            for slot, v in zip(slots, stage):
                full[slot] = v
            return [
                self.eval(eq.expr, binding, full, noise, "transition")
                for (eq, binding) in op.items
            ]

        n_steps = max(1, int(np.ceil(duration / op.h - 1e-9)))
        for k in range(n_steps):
            s = min(op.h, duration - k * op.h)
            y0 = [state[slot].copy() for slot in slots]
            k1 = deriv(y0)
            k2 = deriv([self.add(y, self.scale(d_, 0.5 * s)) for y, d_ in zip(y0, k1)])
            k3 = deriv([self.add(y, self.scale(d_, 0.5 * s)) for y, d_ in zip(y0, k2)])
            k4 = deriv([self.add(y, self.scale(d_, s)) for y, d_ in zip(y0, k3)])
            for i, slot in enumerate(slots):
                incr = self.add(
                    self.add(k1[i], self.scale(k2[i], 2.0)),
                    self.add(self.scale(k3[i], 2.0), k4[i]),
                )
                state[slot] = self.add(y0[i], self.scale(incr, s / 6.0))

    def run_observation(self, t):
        """Observation affine map at time t: (G, c, r_sd) over all obs slots."""
        ir = self.ir
        self.U = _inputs_at(self.inputs, t, ir.n_input)
        nx, ny = self.nx, ir.n_obs
        G = np.zeros((nx, ny))
        c = np.zeros(ny)
        r_sd = np.zeros(ny)
        state = [
            _Aff(0.0, np.eye(nx)[k].copy(), nx=nx) for k in range(nx)
        ]
        block = ir.block("observation")
        for op in block.ops if block else ():
            if not isinstance(op, SampleStmtOp):
                raise NonlinearModelError("observation block must sample obs variables")
            if op.kind is not DistKind.GAUSSIAN:
                raise NonlinearModelError(
                    f"non-Gaussian observation of {op.labels[0]}"
                )
            _, arg_exprs = canonical_dist_args(op.stmt.dist)
            for i, slot in enumerate(op.slots):
                binding = op.bindings[i]
                mean = self.eval(arg_exprs[0], binding, state, None, "observation")
                sd = self.eval(arg_exprs[1], binding, state, None, "observation")
                if not sd.is_const():
                    raise NonlinearModelError(f"state-dependent sd of {op.labels[i]} in observation")
                if mean.az:
                    raise NonlinearModelError("observation mean depends on noise")
                G[:, slot] = mean.ax
                c[slot] = mean.c
                r_sd[slot] = sd.c
        return G, c, r_sd


@dataclass
class TransitionStep:
    F: np.ndarray  # (nx, nx); mean_next = F^T x_prev + b
    b: np.ndarray
    Qu: np.ndarray  # upper-triangular, Q^T Q = process noise covariance
    G: np.ndarray  # (nx, ny); obs mean = G^T x + c
    c: np.ndarray
    r_sd: np.ndarray  # per-slot observation noise sd (diagonal R)


@dataclass
class LinearGaussianSystem:
    """Per-step affine-Gaussian form of a model along a time grid."""

    times: np.ndarray
    initial: GaussianState
    steps: list  # TransitionStep for each interval (times[i-1], times[i]]


def _affs_to_gaussian(state, n_z):
    nx = len(state)
    mu = np.array([a.c for a in state])
    Amat = np.stack([a.ax for a in state], axis=0)  # rows: coef over previous x
    B = np.zeros((nx, n_z))
    for k, a in enumerate(state):
        for j, v in a.az.items():
            B[k, j] = v
    return mu, Amat, B


def extract_linear_gaussian(ir, theta, times, inputs=None):
    """Derive the LinearGaussianSystem of `ir` at parameters `theta` along
    the grid `times` (times[0] is the initial time). Raises
    NonlinearModelError when the model is not linear-Gaussian."""
    times = np.asarray(times, dtype=float)
    ex = _Extractor(ir, theta, inputs)
    nx = ir.n_state

    state0 = ex.run_initial()
    mu0, A0, B0 = _affs_to_gaussian(state0, ex.n_z)
    if np.any(A0):
        raise NonlinearModelError("initial state mean must not depend on the state")
    U0 = cholesky_factorize(B0 @ B0.T)
    initial = GaussianState(mu0, U0)

    steps = []
    for i in range(1, len(times)):
        ex.n_z = 0
        state = [_Aff(0.0, np.eye(nx)[k].copy(), nx=nx) for k in range(nx)]
        state = ex.run_transition_interval(times[i - 1], times[i] - times[i - 1], state)
        b, Amat, B = _affs_to_gaussian(state, ex.n_z)
        Qu = cholesky_factorize(B @ B.T)
        G, c, r_sd = ex.run_observation(times[i])
        steps.append(TransitionStep(F=Amat.T.copy(), b=b, Qu=Qu, G=G, c=c, r_sd=r_sd))
    return LinearGaussianSystem(times=times, initial=initial, steps=steps)
