"""AST node types for the model description language.

All nodes are plain dataclasses with value equality; source positions are
carried for diagnostics but excluded from comparisons so that a
pretty-print -> reparse round trip yields structurally equal trees.
"""

from dataclasses import dataclass, field


BLOCK_NAMES = (
    "parameter",
    "initial",
    "transition",
    "observation",
    "proposal_parameter",
    "proposal_initial",
)

ROLES = ("param", "input", "noise", "state", "obs")

BUILTIN_FUNCTIONS = ("exp", "sqrt", "sin", "pow", "mod")


@dataclass
class IndexExpr:
    """Affine index into a dim: `n`, `n-1`, `n+2`, or a bare integer."""

    var: str | None
    offset: int = 0


@dataclass
class VarRef:
    name: str
    indices: tuple = ()
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class Num:
    value: float


@dataclass
class Unary:
    op: str  # "-"
    operand: object


@dataclass
class Binary:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass
class Call:
    name: str
    args: tuple
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class DistCall:
    name: str
    args: tuple  # positional Expr
    named: tuple  # ((name, Expr), ...)
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class Sample:
    lhs: VarRef
    dist: DistCall


@dataclass
class Assign:
    lhs: VarRef
    expr: object


@dataclass
class OdeEquation:
    lhs: VarRef  # the state being integrated, e.g. x[n] from dx[n]/dt
    expr: object


@dataclass
class OdeBlock:
    args: tuple  # ((name, Expr-or-str), ...); carries h and alg
    equations: tuple


@dataclass
class Block:
    name: str
    args: tuple  # ((name, Expr), ...); e.g. transition(delta = h)
    statements: tuple


@dataclass
class DimDecl:
    name: str
    size: int
    boundary: str = "none"  # "none" or "cyclic"


@dataclass
class VarDecl:
    name: str
    role: str
    dims: tuple = ()  # dim names, in declaration order
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass
class ModelAst:
    name: str
    dims: tuple = ()
    consts: tuple = ()  # ((name, float), ...)
    vars: tuple = ()
    blocks: dict = field(default_factory=dict)  # block name -> Block

    def vars_by_role(self, role):
        return [v for v in self.vars if v.role == role]

    def dim(self, name):
        for d in self.dims:
            if d.name == name:
                return d
        return None
