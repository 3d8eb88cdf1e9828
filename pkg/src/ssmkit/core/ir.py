"""Lowering of a validated model AST to an executable IR.

Every vector variable element gets a dense, role-contiguous slot. Each
block statement is unrolled over its implicit dim loops into per-slot
compiled expressions (plain python functions over role arrays), so block
evaluation is vectorized across a batch of particles: `T` holds parameter
slots, `X` state slots, `W` noise slots (all shaped (batch, slots)) and
`U` input slots shaped (slots,).
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import SsmError
from ..lang import ast as A
from .distributions import REGISTRY, DistKind

ROLE_ARRAY = {"param": "T", "state": "X", "noise": "W", "input": "U"}


class IndexError_(SsmError):
    """Index resolution failure (reported as a validation diagnostic)."""


@dataclass
class SlotVar:
    name: str
    role: str
    dims: tuple  # DimDecl, in the variable's declaration order
    offset: int
    size: int

    def labels(self):
        if not self.dims:
            return [self.name]
        ranges = [range(d.size) for d in self.dims]
        return [f"{self.name}[{','.join(map(str, ix))}]" for ix in itertools.product(*ranges)]


@dataclass
class SampleStmtOp:
    """One distribution statement, unrolled over its dim loop."""

    role: str
    slots: tuple
    kind: DistKind
    arg_fns: tuple  # per slot: tuple of canonical-arg functions
    labels: tuple
    stmt: A.Sample
    bindings: tuple


@dataclass
class AssignStmtOp:
    role: str
    slots: tuple
    fns: tuple
    labels: tuple
    stmt: A.Assign
    bindings: tuple


@dataclass
class OdeOp:
    """A coupled ODE system integrated with classic fixed-step RK4."""

    slots: tuple  # state slots carrying an equation
    fns: tuple  # derivative of each slot, evaluated on the stage state
    h: float
    alg: str
    items: tuple  # per slot: (OdeEquation, binding)


@dataclass
class CompiledBlock:
    name: str
    ops: tuple


@dataclass
class ModelIr:
    name: str
    consts: dict
    vars: dict  # name -> SlotVar
    roles: dict  # role -> list[SlotVar]
    counts: dict  # role -> slot count
    delta: float | None  # transition sub-step size, if declared
    blocks: dict  # block name -> CompiledBlock
    ast: A.ModelAst = field(repr=False)

    @property
    def n_param(self):
        return self.counts["param"]

    @property
    def n_state(self):
        return self.counts["state"]

    @property
    def n_noise(self):
        return self.counts["noise"]

    @property
    def n_input(self):
        return self.counts["input"]

    @property
    def n_obs(self):
        return self.counts["obs"]

    def slot_labels(self, role):
        labels = []
        for v in self.roles[role]:
            labels.extend(v.labels())
        return labels

    def block(self, name):
        return self.blocks.get(name)


# --- index / slot resolution (shared with validation) ----------------------


def resolve_index(dim, ix: A.IndexExpr, binding):
    """Resolve one index expression to a concrete position along `dim`."""
    if ix.var is None:
        value = ix.offset
    else:
        if ix.var not in binding:
            raise IndexError_(f"unknown index variable {ix.var!r}")
        value = binding[ix.var] + ix.offset
    if dim.boundary == "cyclic":
        return value % dim.size
    if not 0 <= value < dim.size:
        raise IndexError_(f"index {value} out of range for dim {dim.name} of size {dim.size}")
    return value


def resolve_slot(var: SlotVar, indices, binding):
    if len(indices) != len(var.dims):
        raise IndexError_(
            f"variable {var.name} has {len(var.dims)} dim(s), got {len(indices)} index(es)"
        )
    flat = 0
    for dim, ix in zip(var.dims, indices):
        flat = flat * dim.size + resolve_index(dim, ix, binding)
    return var.offset + flat


def statement_binders(lhs: A.VarRef, var: SlotVar):
    """Map each lhs index variable to the dim it ranges over."""
    binders = {}
    for dim, ix in zip(var.dims, lhs.indices):
        if ix.var is None:
            continue
        if ix.var in binders and binders[ix.var] is not dim:
            raise IndexError_(f"index variable {ix.var!r} bound to two different dims")
        binders[ix.var] = dim
    return binders


def enumerate_bindings(binders, model_dims):
    """Cross product over distinct binder dims, nested in dim declaration order."""
    if not binders:
        return [{}]
    order = {d.name: i for i, d in enumerate(model_dims)}
    names = sorted(binders, key=lambda b: order[binders[b].name])
    bindings = []
    for values in itertools.product(*(range(binders[n].size) for n in names)):
        bindings.append(dict(zip(names, values)))
    return bindings


# --- expression compilation -------------------------------------------------

_FN_SOURCE = {
    "exp": "np.exp",
    "sqrt": "np.sqrt",
    "sin": "np.sin",
    "pow": "np.power",
    "mod": "np.mod",
}


def expr_source(expr, tables, binding):
    consts, vars_ = tables
    if isinstance(expr, A.Num):
        return repr(expr.value)
    if isinstance(expr, A.VarRef):
        if expr.name in consts:
            return repr(float(consts[expr.name]))
        var = vars_[expr.name]
        slot = resolve_slot(var, expr.indices, binding)
        if var.role == "input":
            return f"U[{slot}]"
        return f"{ROLE_ARRAY[var.role]}[:, {slot}]"
    if isinstance(expr, A.Unary):
        return f"(-{expr_source(expr.operand, tables, binding)})"
    if isinstance(expr, A.Binary):
        left = expr_source(expr.left, tables, binding)
        right = expr_source(expr.right, tables, binding)
        return f"({left} {expr.op} {right})"
    if isinstance(expr, A.Call):
        args = ", ".join(expr_source(a, tables, binding) for a in expr.args)
        return f"{_FN_SOURCE[expr.name]}({args})"
    raise TypeError(f"not an expression node: {expr!r}")


def compile_expr(expr, tables, binding):
    src = expr_source(expr, tables, binding)
    return eval(f"lambda T, X, W, U: {src}", {"np": np, "__builtins__": {}})


def eval_const_expr(expr, consts):
    """Evaluate an expression over constants only (block/ode arguments)."""
    if isinstance(expr, A.Num):
        return float(expr.value)
    if isinstance(expr, A.VarRef):
        if expr.name in consts and not expr.indices:
            return float(consts[expr.name])
        raise IndexError_(f"{expr.name!r} is not a constant")
    if isinstance(expr, A.Unary):
        return -eval_const_expr(expr.operand, consts)
    if isinstance(expr, A.Binary):
        left = eval_const_expr(expr.left, consts)
        right = eval_const_expr(expr.right, consts)
        return {"+": left + right, "-": left - right, "*": left * right, "/": left / right}[expr.op]
    if isinstance(expr, A.Call):
        args = [eval_const_expr(a, consts) for a in expr.args]
        return float({"exp": np.exp, "sqrt": np.sqrt, "sin": np.sin, "pow": np.power, "mod": np.mod}[expr.name](*args))
    raise IndexError_("not a constant expression")


def canonical_dist_args(dist: A.DistCall):
    """Return (kind, canonical arg expression list) with defaults filled in."""
    info = REGISTRY[dist.name]
    by_name = {}
    for name, expr in zip(info.params, dist.args):
        by_name[name] = expr
    for name, expr in dist.named:
        by_name[name] = expr
    exprs = []
    for name in info.params:
        if name in by_name:
            exprs.append(by_name[name])
        elif name in info.defaults:
            exprs.append(A.Num(value=float(info.defaults[name])))
        else:  # unreachable after validation
            raise SsmError(f"missing argument {name} for {dist.name}")
    return info.kind, exprs


# --- block compilation --------------------------------------------------------


def _compile_statement(stmt, tables, vars_, model_dims):
    if isinstance(stmt, (A.Sample, A.Assign)):
        var = vars_[stmt.lhs.name]
        binders = statement_binders(stmt.lhs, var)
        bindings = enumerate_bindings(binders, model_dims)
        slots, labels = [], []
        for b in bindings:
            slot = resolve_slot(var, stmt.lhs.indices, b)
            slots.append(slot)
            labels.append(var.labels()[slot - var.offset])
        if isinstance(stmt, A.Sample):
            kind, arg_exprs = canonical_dist_args(stmt.dist)
            arg_fns = tuple(
                tuple(compile_expr(e, tables, b) for e in arg_exprs) for b in bindings
            )
            return SampleStmtOp(
                role=var.role,
                slots=tuple(slots),
                kind=kind,
                arg_fns=arg_fns,
                labels=tuple(labels),
                stmt=stmt,
                bindings=tuple(bindings),
            )
        fns = tuple(compile_expr(stmt.expr, tables, b) for b in bindings)
        return AssignStmtOp(
            role=var.role,
            slots=tuple(slots),
            fns=fns,
            labels=tuple(labels),
            stmt=stmt,
            bindings=tuple(bindings),
        )
    if isinstance(stmt, A.OdeBlock):
        args = dict(stmt.args)
        consts = tables[0]
        h = eval_const_expr(args["h"], consts)
        alg = args.get("alg", "RK4")
        slots, fns, items = [], [], []
        for eq in stmt.equations:
            var = vars_[eq.lhs.name]
            binders = statement_binders(eq.lhs, var)
            for b in enumerate_bindings(binders, model_dims):
                slots.append(resolve_slot(var, eq.lhs.indices, b))
                fns.append(compile_expr(eq.expr, tables, b))
                items.append((eq, b))
        return OdeOp(slots=tuple(slots), fns=tuple(fns), h=h, alg=alg, items=tuple(items))
    raise TypeError(f"not a statement node: {stmt!r}")


def build_ir(ast: A.ModelAst) -> ModelIr:
    """Lower a validated AST. Assumes validate_model checks have passed."""
    consts = {name: float(value) for name, value in ast.consts}
    vars_ = {}
    roles = {role: [] for role in A.ROLES}
    counts = {}
    for role in A.ROLES:
        offset = 0
        for decl in ast.vars_by_role(role):
            dims = tuple(ast.dim(d) for d in decl.dims)
            size = math.prod(d.size for d in dims) if dims else 1
            sv = SlotVar(name=decl.name, role=role, dims=dims, offset=offset, size=size)
            vars_[decl.name] = sv
            roles[role].append(sv)
            offset += size
        counts[role] = offset

    delta = None
    transition = ast.blocks.get("transition")
    if transition is not None:
        args = dict(transition.args)
        if "delta" in args:
            delta = eval_const_expr(args["delta"], consts)

    tables = (consts, vars_)
    blocks = {}
    for name, block in ast.blocks.items():
        ops = tuple(_compile_statement(s, tables, vars_, ast.dims) for s in block.statements)
        blocks[name] = CompiledBlock(name=name, ops=ops)

    return ModelIr(
        name=ast.name,
        consts=consts,
        vars=vars_,
        roles=roles,
        counts=counts,
        delta=delta,
        blocks=blocks,
        ast=ast,
    )
