"""Canonical pretty-printer: 2-space indentation, one statement per line.

pretty_print(parse_model(s)) reparses to a structurally equal AST; comments
and original whitespace are not preserved.
"""

from .ast import (
    Assign,
    Binary,
    Block,
    Call,
    DistCall,
    IndexExpr,
    Num,
    OdeBlock,
    Sample,
    Unary,
    VarRef,
)

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_UNARY = 3
_PREC_ATOM = 4

_BIN_PREC = {"+": _PREC_ADD, "-": _PREC_ADD, "*": _PREC_MUL, "/": _PREC_MUL}


def _fmt_num(value):
    if isinstance(value, float) and value.is_integer() and abs(value) < 1e16:
        return repr(value)
    return repr(value)


def _fmt_index(ix: IndexExpr):
    if ix.var is None:
        return str(ix.offset)
    if ix.offset == 0:
        return ix.var
    sign = "+" if ix.offset > 0 else "-"
    return f"{ix.var}{sign}{abs(ix.offset)}"


def _fmt_varref(ref: VarRef):
    if not ref.indices:
        return ref.name
    return f"{ref.name}[{','.join(_fmt_index(i) for i in ref.indices)}]"


def format_expr(expr, parent_prec=0):
    if isinstance(expr, Num):
        return _fmt_num(expr.value)
    if isinstance(expr, VarRef):
        return _fmt_varref(expr)
    if isinstance(expr, Call):
        return f"{expr.name}({', '.join(format_expr(a) for a in expr.args)})"
    if isinstance(expr, Unary):
        text = "-" + format_expr(expr.operand, _PREC_UNARY)
        return f"({text})" if parent_prec > _PREC_UNARY else text
    if isinstance(expr, Binary):
        prec = _BIN_PREC[expr.op]
        left = format_expr(expr.left, prec)
        # - and / are left-associative: the right operand binds tighter
        right = format_expr(expr.right, prec + (1 if expr.op in ("-", "/") else 0))
        text = f"{left} {expr.op} {right}"
        return f"({text})" if parent_prec > prec else text
    raise TypeError(f"not an expression node: {expr!r}")


def _fmt_distcall(dist: DistCall):
    parts = [format_expr(a) for a in dist.args]
    parts += [f"{k} = {format_expr(v)}" for k, v in dist.named]
    return f"{dist.name}({', '.join(parts)})"


def _fmt_ode_arg(value):
    if isinstance(value, str):
        return f"'{value}'"
    return format_expr(value)


def _emit_statement(lines, stmt, indent):
    pad = "  " * indent
    if isinstance(stmt, Sample):
        lines.append(f"{pad}{_fmt_varref(stmt.lhs)} ~ {_fmt_distcall(stmt.dist)}")
    elif isinstance(stmt, Assign):
        lines.append(f"{pad}{_fmt_varref(stmt.lhs)} <- {format_expr(stmt.expr)}")
    elif isinstance(stmt, OdeBlock):
        args = ", ".join(f"{k} = {_fmt_ode_arg(v)}" for k, v in stmt.args)
        lines.append(f"{pad}ode({args}) {{")
        for eq in stmt.equations:
            lines.append(f"{pad}  d{_fmt_varref(eq.lhs)}/dt = {format_expr(eq.expr)}")
        lines.append(f"{pad}}}")
    else:
        raise TypeError(f"not a statement node: {stmt!r}")


def _emit_block(lines, block: Block):
    args = ""
    if block.args:
        args = "(" + ", ".join(f"{k} = {format_expr(v)}" for k, v in block.args) + ")"
    lines.append(f"  sub {block.name}{args} {{")
    for stmt in block.statements:
        _emit_statement(lines, stmt, 2)
    lines.append("  }")


def pretty_print(ast):
    lines = [f"model {ast.name} {{"]
    for d in ast.dims:
        boundary = f", boundary = '{d.boundary}'" if d.boundary != "none" else ""
        lines.append(f"  dim {d.name}(size = {d.size}{boundary})")
    for name, value in ast.consts:
        lines.append(f"  const {name} = {_fmt_num(value)}")
    for v in ast.vars:
        dims = f"[{','.join(v.dims)}]" if v.dims else ""
        lines.append(f"  {v.role} {v.name}{dims}")
    for block in ast.blocks.values():
        lines.append("")
        _emit_block(lines, block)
    lines.append("}")
    return "\n".join(lines) + "\n"
