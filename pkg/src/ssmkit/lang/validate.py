"""Semantic validation of a parsed model, producing an executable ModelIr.

Checks the role contract: every param is sampled exactly once in
`parameter`; every state is defined in `initial` and in `transition`
(there via assignment or ode); every obs is sampled in `observation`;
inputs never appear on a left-hand side; noise is sampled only inside
`transition`; proposal blocks sample exactly what their target blocks
sample; all distribution names and arities are known; all identifiers and
index expressions resolve. Violations are collected one diagnostic each
and raised together as ModelValidationError.
"""

from __future__ import annotations

import math

from ..core import ir as irmod
from ..core.distributions import REGISTRY, DistKind
from ..errors import Diagnostic, ModelValidationError
from . import ast as A

# Roles an expression may read, per block (consts are readable everywhere).
READABLE = {
    "parameter": {"param"},
    "initial": {"param", "state"},
    "transition": {"param", "state", "noise", "input"},
    "observation": {"param", "state", "input"},
    "proposal_parameter": {"param"},
    "proposal_initial": {"param", "state"},
}

_BLOCK_ARGS = {"transition": {"delta"}}
_ODE_ARGS = {"h", "alg"}


class _Checker:
    def __init__(self, ast: A.ModelAst):
        self.ast = ast
        self.diags = []
        self.consts = {name: float(v) for name, v in ast.consts}
        self.vars = {}
        for decl in ast.vars:
            dims = []
            for dname in decl.dims:
                dim = ast.dim(dname)
                if dim is None:
                    self.error(f"unknown dim {dname!r} on variable {decl.name}", var=decl.name)
                    dim = A.DimDecl(name=dname, size=1)
                dims.append(dim)
            size = math.prod(d.size for d in dims) if dims else 1
            self.vars[decl.name] = irmod.SlotVar(
                name=decl.name, role=decl.role, dims=tuple(dims), offset=0, size=size
            )
        # per block: set of var names written by Sample / by Assign-or-Ode
        self.sampled = {name: [] for name in ast.blocks}
        self.defined = {name: [] for name in ast.blocks}

    def error(self, message, var=None, block=None):
        self.diags.append(Diagnostic(message, var=var, block=block))

    # -- expressions ----------------------------------------------------

    def check_expr(self, expr, block, binders):
        if isinstance(expr, A.Num):
            return
        if isinstance(expr, A.Unary):
            self.check_expr(expr.operand, block, binders)
            return
        if isinstance(expr, A.Binary):
            self.check_expr(expr.left, block, binders)
            self.check_expr(expr.right, block, binders)
            return
        if isinstance(expr, A.Call):
            if expr.name not in A.BUILTIN_FUNCTIONS:
                self.error(f"unknown function {expr.name!r} in {block}", block=block)
                return
            arity = 2 if expr.name in ("pow", "mod") else 1
            if len(expr.args) != arity:
                self.error(f"function {expr.name} expects {arity} argument(s)", block=block)
            for a in expr.args:
                self.check_expr(a, block, binders)
            return
        if isinstance(expr, A.VarRef):
            self.check_ref(expr, block, binders)
            return
        self.error(f"unsupported construct in expression: {type(expr).__name__}", block=block)

    def check_ref(self, ref: A.VarRef, block, binders):
        if ref.name in self.consts:
            if ref.indices:
                self.error(f"const {ref.name} indexed", var=ref.name, block=block)
            return
        if ref.name in binders and not ref.indices:
            self.error(
                f"index variable {ref.name!r} used as a value in {block}",
                var=ref.name,
                block=block,
            )
            return
        var = self.vars.get(ref.name)
        if var is None:
            self.error(f"unknown identifier {ref.name!r} in {block}", var=ref.name, block=block)
            return
        if var.role == "obs":
            self.error(f"obs {ref.name} read in expression in {block}", var=ref.name, block=block)
            return
        if var.role not in READABLE[block]:
            self.error(f"{var.role} {ref.name} read in {block}", var=ref.name, block=block)
        if var.dims and not ref.indices:
            self.error(f"vector variable {ref.name} referenced without index", var=ref.name, block=block)
            return
        if not var.dims and ref.indices:
            self.error(f"scalar variable {ref.name} indexed", var=ref.name, block=block)
            return
        if len(ref.indices) != len(var.dims):
            self.error(
                f"variable {ref.name} has {len(var.dims)} dim(s), got {len(ref.indices)} index(es)",
                var=ref.name,
                block=block,
            )
            return
        for dim, ix in zip(var.dims, ref.indices):
            if ix.var is not None:
                bound = binders.get(ix.var)
                if bound is None:
                    self.error(f"unknown index variable {ix.var!r} in {block}", block=block)
                elif bound.name != dim.name:
                    self.error(
                        f"index variable {ix.var!r} ranges over dim {bound.name}, not {dim.name}",
                        var=ref.name,
                        block=block,
                    )
            else:
                if dim.boundary != "cyclic" and not 0 <= ix.offset < dim.size:
                    self.error(
                        f"index {ix.offset} out of range for dim {dim.name} of size {dim.size}",
                        var=ref.name,
                        block=block,
                    )

    # -- statements -----------------------------------------------------

    def lhs_binders(self, lhs: A.VarRef, block):
        var = self.vars.get(lhs.name)
        if var is None:
            self.error(f"unknown variable {lhs.name!r} on left-hand side in {block}", var=lhs.name, block=block)
            return None, {}
        if len(lhs.indices) != len(var.dims):
            self.error(
                f"variable {lhs.name} has {len(var.dims)} dim(s), got {len(lhs.indices)} index(es)",
                var=lhs.name,
                block=block,
            )
            return var, {}
        binders = {}
        for dim, ix in zip(var.dims, lhs.indices):
            if ix.var is None:
                if not 0 <= ix.offset < dim.size:
                    self.error(
                        f"index {ix.offset} out of range for dim {dim.name} of size {dim.size}",
                        var=lhs.name,
                        block=block,
                    )
                continue
            if ix.offset != 0:
                self.error(
                    f"unsupported construct: offset index on left-hand side of {lhs.name}",
                    var=lhs.name,
                    block=block,
                )
            if ix.var in binders and binders[ix.var].name != dim.name:
                self.error(
                    f"index variable {ix.var!r} bound to two different dims", var=lhs.name, block=block
                )
            binders[ix.var] = dim
        return var, binders

    def check_write(self, var, kind, block):
        """kind is 'sample', 'assign' or 'ode'."""
        role = var.role
        name = var.name
        if role == "input":
            self.error(f"input {name} appears on a left-hand side in {block}", var=name, block=block)
            return
        if role == "obs":
            if block != "observation" or kind != "sample":
                self.error(f"obs {name} sampled outside observation", var=name, block=block)
                return
        elif role == "noise":
            if kind != "sample":
                self.error(f"noise {name} must be sampled, not assigned", var=name, block=block)
                return
            if block != "transition":
                self.error(f"noise {name} sampled outside transition", var=name, block=block)
                return
        elif role == "param":
            if block not in ("parameter", "proposal_parameter") or kind != "sample":
                self.error(f"param {name} may not be written in {block}", var=name, block=block)
                return
        elif role == "state":
            if block in ("initial", "proposal_initial"):
                if kind == "ode":
                    self.error(f"unsupported construct: ode in {block}", var=name, block=block)
                    return
                if block == "proposal_initial" and kind != "sample":
                    self.error(f"state {name} must be sampled in proposal_initial", var=name, block=block)
                    return
            elif block == "transition":
                if kind == "sample":
                    self.error(
                        f"state {name} sampled in transition (use an assignment or ode)",
                        var=name,
                        block=block,
                    )
                    return
            else:
                self.error(f"state {name} may not be written in {block}", var=name, block=block)
                return
        if kind == "sample":
            self.sampled[block].append(name)
        else:
            self.defined[block].append(name)

    def check_dist(self, dist: A.DistCall, block, binders):
        info = REGISTRY.get(dist.name)
        if info is None:
            self.error(f"unknown distribution {dist.name!r}", block=block)
            for a in dist.args:
                self.check_expr(a, block, binders)
            return
        if info.kind is DistKind.WIENER and block != "transition":
            self.error(f"wiener() may only be used in transition, not {block}", block=block)
        if len(dist.args) > len(info.params):
            self.error(
                f"distribution {dist.name} takes at most {len(info.params)} arguments",
                block=block,
            )
        seen = set(info.params[: len(dist.args)])
        for name, _ in dist.named:
            if name not in info.params:
                self.error(f"unknown argument {name!r} for distribution {dist.name}", block=block)
            elif name in seen:
                self.error(f"duplicate argument {name!r} for distribution {dist.name}", block=block)
            seen.add(name)
        for pname in info.params[: info.required]:
            if pname not in seen and pname not in info.defaults:
                self.error(f"distribution {dist.name} missing argument {pname!r}", block=block)
        for a in dist.args:
            self.check_expr(a, block, binders)
        for _, a in dist.named:
            self.check_expr(a, block, binders)

    def check_block(self, block: A.Block):
        allowed_args = _BLOCK_ARGS.get(block.name, set())
        for key, expr in block.args:
            if key not in allowed_args:
                self.error(f"unknown argument {key!r} on block {block.name}", block=block.name)
            else:
                self._const_expr(expr, block.name, key)
        for stmt in block.statements:
            self.check_statement(stmt, block.name)

    def _const_expr(self, expr, block, what):
        try:
            value = irmod.eval_const_expr(expr, self.consts)
        except irmod.IndexError_ as e:
            self.error(f"{what} of {block} must be a constant expression: {e}", block=block)
            return None
        return value

    def check_statement(self, stmt, block):
        if isinstance(stmt, A.OdeBlock):
            if block != "transition":
                self.error(f"unsupported construct: ode in {block}", block=block)
                return
            args = dict(stmt.args)
            for key in args:
                if key not in _ODE_ARGS:
                    self.error(f"unknown argument {key!r} on ode block", block=block)
            if "h" not in args:
                self.error("ode block requires an h argument", block=block)
            else:
                h = self._const_expr(args["h"], block, "h")
                if h is not None and h <= 0:
                    self.error("ode step size h must be > 0", block=block)
            alg = args.get("alg", "RK4")
            if not isinstance(alg, str):
                self.error("ode alg must be a string", block=block)
            elif alg != "RK4":
                self.error(f"unsupported construct: ode algorithm {alg!r}", block=block)
            seen_slots = set()
            for eq in stmt.equations:
                var, binders = self.lhs_binders(eq.lhs, block)
                if var is None:
                    continue
                if var.role != "state":
                    self.error(
                        f"ode equation target {var.name} is not a state variable",
                        var=var.name,
                        block=block,
                    )
                    continue
                if var.name in seen_slots:
                    self.error(f"duplicate ode equation for {var.name}", var=var.name, block=block)
                seen_slots.add(var.name)
                self.check_write(var, "ode", block)
                self.check_expr(eq.expr, block, binders)
            return
        if isinstance(stmt, A.Sample):
            var, binders = self.lhs_binders(stmt.lhs, block)
            if var is not None:
                self.check_write(var, "sample", block)
            self.check_dist(stmt.dist, block, binders)
            return
        if isinstance(stmt, A.Assign):
            var, binders = self.lhs_binders(stmt.lhs, block)
            if var is not None:
                self.check_write(var, "assign", block)
            self.check_expr(stmt.expr, block, binders)
            return
        self.error(f"unsupported construct: {type(stmt).__name__}", block=block)

    # -- whole-model coverage ---------------------------------------------

    def check_coverage(self):
        ast = self.ast
        sampled_param = self.sampled.get("parameter", [])
        for v in ast.vars_by_role("param"):
            n = sampled_param.count(v.name)
            if n == 0:
                self.error(f"param {v.name} not sampled in parameter", var=v.name, block="parameter")
            elif n > 1:
                self.error(
                    f"param {v.name} sampled more than once in parameter", var=v.name, block="parameter"
                )
        initial_writes = self.sampled.get("initial", []) + self.defined.get("initial", [])
        transition_writes = self.defined.get("transition", [])
        obs_sampled = self.sampled.get("observation", [])
        for v in ast.vars_by_role("state"):
            if v.name not in initial_writes:
                self.error(f"state {v.name} not defined in initial", var=v.name, block="initial")
            elif initial_writes.count(v.name) > 1:
                self.error(f"state {v.name} defined more than once in initial", var=v.name, block="initial")
            if v.name not in transition_writes:
                self.error(f"state {v.name} not defined in transition", var=v.name, block="transition")
        for v in ast.vars_by_role("obs"):
            n = obs_sampled.count(v.name)
            if n == 0:
                self.error(f"obs {v.name} not sampled in observation", var=v.name, block="observation")
            elif n > 1:
                self.error(
                    f"obs {v.name} sampled more than once in observation", var=v.name, block="observation"
                )
        self._check_proposal("proposal_parameter", "parameter")
        self._check_proposal("proposal_initial", "initial")

    def _check_proposal(self, proposal, target):
        if proposal not in self.ast.blocks:
            return
        want = set(self.sampled.get(target, []))
        got = set(self.sampled.get(proposal, []))
        for name in sorted(want - got):
            self.error(f"{proposal} does not sample {name}", var=name, block=proposal)
        for name in sorted(got - want):
            self.error(f"{proposal} samples {name}, which is not sampled in {target}", var=name, block=proposal)


def validate_model(ast: A.ModelAst) -> irmod.ModelIr:
    """Validate a parsed model; raises ModelValidationError on any violation."""
    checker = _Checker(ast)
    for block in ast.blocks.values():
        checker.check_block(block)
    checker.check_coverage()
    if checker.diags:
        raise ModelValidationError(checker.diags)
    ir = irmod.build_ir(ast)
    if ir.delta is not None and ir.delta <= 0:
        raise ModelValidationError([Diagnostic("transition delta must be > 0", block="transition")])
    return ir


def load_model(source) -> irmod.ModelIr:
    """Parse and validate model source text in one step."""
    from .parser import parse_model

    return validate_model(parse_model(source))
