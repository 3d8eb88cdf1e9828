"""Recursive-descent parser producing a ModelAst.

The accepted language is the model description grammar: a `model` header,
`dim`/`const` declarations, role-typed variable declarations, and `sub`
blocks holding distribution statements (`lhs ~ dist(...)`), deterministic
assignments (`lhs <- expr`) and `ode(...) { d<var>/dt = expr ... }`
sub-blocks. Constructs outside this grammar are rejected with an
"unsupported construct" diagnostic rather than silently accepted.
"""

from ..errors import ModelSyntaxError
from .ast import (
    BLOCK_NAMES,
    Assign,
    Binary,
    Block,
    Call,
    DimDecl,
    DistCall,
    IndexExpr,
    ModelAst,
    Num,
    OdeBlock,
    OdeEquation,
    Sample,
    Unary,
    VarDecl,
    VarRef,
)
from .lexer import KEYWORDS, Token, tokenize

_ROLE_KEYWORDS = ("param", "input", "noise", "state", "obs")


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers ----------------------------------------------------

    def peek(self, ahead=0):
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ModelSyntaxError(f"{message} (got {tok})", line=tok.line, column=tok.column, token=tok)

    def expect(self, kind, what=None):
        tok = self.peek()
        if tok.kind != kind:
            self.error(f"expected {what or kind!r}", tok)
        return self.next()

    def expect_name(self, what="identifier"):
        tok = self.expect("IDENT", what)
        if tok.value in KEYWORDS:
            self.error(f"reserved word {tok.value!r} cannot be used as {what}", tok)
        return tok

    def skip_newlines(self):
        while self.peek().kind in ("NEWLINE", ";"):
            self.next()

    def end_of_statement(self):
        tok = self.peek()
        if tok.kind in ("NEWLINE", ";"):
            self.next()
        elif tok.kind not in ("}", "EOF"):
            self.error("expected end of statement")

    # -- top level ---------------------------------------------------------

    def parse_model(self):
        self.skip_newlines()
        tok = self.expect("IDENT", "'model'")
        if tok.value != "model":
            self.error("expected 'model'", tok)
        name = self.expect_name("model name").value
        self.skip_newlines()
        self.expect("{")
        dims, consts, vars_, blocks = [], [], [], {}
        seen = set()
        while True:
            self.skip_newlines()
            tok = self.peek()
            if tok.kind == "}":
                self.next()
                break
            if tok.kind == "EOF":
                self.error("unexpected end of input inside model body", tok)
            if tok.kind != "IDENT":
                self.error("expected declaration or block", tok)
            kw = tok.value
            if kw == "dim":
                decl = self.parse_dim()
                self._check_dup(seen, decl.name, tok)
                dims.append(decl)
            elif kw == "const":
                cname, cval = self.parse_const()
                self._check_dup(seen, cname, tok)
                consts.append((cname, cval))
            elif kw in _ROLE_KEYWORDS:
                decl = self.parse_var(kw)
                self._check_dup(seen, decl.name, tok)
                vars_.append(decl)
            elif kw == "sub":
                block = self.parse_block()
                if block.name in blocks:
                    self.error(f"duplicate block {block.name!r}", tok)
                blocks[block.name] = block
            else:
                self.error("expected declaration or block", tok)
        self.skip_newlines()
        self.expect("EOF", "end of input")
        return ModelAst(name=name, dims=tuple(dims), consts=tuple(consts), vars=tuple(vars_), blocks=blocks)

    def _check_dup(self, seen, name, tok):
        if name in seen:
            self.error(f"duplicate name {name!r}", tok)
        seen.add(name)

    def parse_dim(self):
        self.next()  # dim
        name = self.expect_name("dim name").value
        self.expect("(")
        size = None
        boundary = "none"
        while True:
            key = self.expect_name("dim argument name").value
            self.expect("=")
            if key == "size":
                tok = self.expect("NUMBER", "dim size")
                if not isinstance(tok.value, int) or tok.value < 1:
                    self.error("dim size must be a positive integer", tok)
                size = tok.value
            elif key == "boundary":
                tok = self.expect("STRING", "boundary value")
                if tok.value not in ("cyclic", "none"):
                    self.error(f"unknown boundary {tok.value!r}", tok)
                boundary = tok.value
            else:
                self.error(f"unknown dim argument {key!r}")
            if self.peek().kind == ",":
                self.next()
                continue
            break
        self.expect(")")
        if size is None:
            self.error(f"dim {name!r} missing size")
        self.end_of_statement()
        return DimDecl(name=name, size=size, boundary=boundary)

    def parse_const(self):
        self.next()  # const
        name = self.expect_name("const name").value
        self.expect("=")
        negate = False
        if self.peek().kind == "-":
            self.next()
            negate = True
        tok = self.expect("NUMBER", "numeric literal")
        value = float(tok.value)
        self.end_of_statement()
        return name, -value if negate else value

    def parse_var(self, role):
        start = self.next()  # role keyword
        name = self.expect_name("variable name").value
        dims = []
        if self.peek().kind == "[":
            self.next()
            while True:
                dims.append(self.expect_name("dim name").value)
                if self.peek().kind == ",":
                    self.next()
                    continue
                break
            self.expect("]")
        self.end_of_statement()
        return VarDecl(name=name, role=role, dims=tuple(dims), line=start.line, column=start.column)

    def parse_block(self):
        self.next()  # sub
        tok = self.expect("IDENT", "block name")
        if tok.value not in BLOCK_NAMES:
            self.error(f"unknown block name {tok.value!r}", tok)
        name = tok.value
        args = []
        if self.peek().kind == "(":
            self.next()
            while True:
                key = self.expect_name("block argument name").value
                self.expect("=")
                args.append((key, self.parse_expr()))
                if self.peek().kind == ",":
                    self.next()
                    continue
                break
            self.expect(")")
        self.skip_newlines()
        self.expect("{")
        statements = []
        while True:
            self.skip_newlines()
            if self.peek().kind == "}":
                self.next()
                break
            if self.peek().kind == "EOF":
                self.error("unexpected end of input inside block")
            statements.append(self.parse_statement())
        return Block(name=name, args=tuple(args), statements=tuple(statements))

    # -- statements ---------------------------------------------------------

    def parse_statement(self):
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value == "ode":
            return self.parse_ode()
        if tok.kind == "IDENT" and tok.value in KEYWORDS:
            self.error(f"unsupported construct: {tok.value!r} statement", tok)
        lhs = self.parse_varref()
        tok = self.peek()
        if tok.kind == "~":
            self.next()
            dist = self.parse_distcall()
            self.end_of_statement()
            return Sample(lhs=lhs, dist=dist)
        if tok.kind == "<-":
            self.next()
            expr = self.parse_expr()
            self.end_of_statement()
            return Assign(lhs=lhs, expr=expr)
        self.error("expected '~' or '<-'", tok)

    def parse_ode(self):
        self.next()  # ode
        self.expect("(")
        args = []
        while True:
            key = self.expect_name("ode argument name").value
            self.expect("=")
            if self.peek().kind == "STRING":
                args.append((key, self.next().value))
            else:
                args.append((key, self.parse_expr()))
            if self.peek().kind == ",":
                self.next()
                continue
            break
        self.expect(")")
        self.skip_newlines()
        self.expect("{")
        equations = []
        while True:
            self.skip_newlines()
            if self.peek().kind == "}":
                self.next()
                break
            if self.peek().kind == "EOF":
                self.error("unexpected end of input inside ode block")
            equations.append(self.parse_ode_equation())
        self.end_of_statement()
        return OdeBlock(args=tuple(args), equations=tuple(equations))

    def parse_ode_equation(self):
        tok = self.expect("IDENT", "ode equation (d<var>/dt = ...)")
        if len(tok.value) < 2 or not tok.value.startswith("d"):
            self.error("ode equation must have the form d<var>/dt = ...", tok)
        name = tok.value[1:]
        indices = self.parse_indices() if self.peek().kind == "[" else ()
        self.expect("/")
        dt = self.expect("IDENT", "'dt'")
        if dt.value != "dt":
            self.error("ode equation must have the form d<var>/dt = ...", dt)
        self.expect("=")
        expr = self.parse_expr()
        self.end_of_statement()
        lhs = VarRef(name=name, indices=indices, line=tok.line, column=tok.column)
        return OdeEquation(lhs=lhs, expr=expr)

    # -- expressions ----------------------------------------------------------

    def parse_varref(self):
        tok = self.expect_name("variable name")
        indices = self.parse_indices() if self.peek().kind == "[" else ()
        return VarRef(name=tok.value, indices=indices, line=tok.line, column=tok.column)

    def parse_indices(self):
        self.expect("[")
        indices = []
        while True:
            indices.append(self.parse_index_expr())
            if self.peek().kind == ",":
                self.next()
                continue
            break
        self.expect("]")
        return tuple(indices)

    def parse_index_expr(self):
        """Index form: `n`, `n-1`, `n+2`, or a bare integer literal."""
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            if not isinstance(tok.value, int):
                self.error("index literal must be an integer", tok)
            return IndexExpr(var=None, offset=tok.value)
        if tok.kind == "IDENT":
            name = self.expect_name("index variable").value
            offset = 0
            if self.peek().kind in ("+", "-"):
                sign = -1 if self.next().kind == "-" else 1
                num = self.expect("NUMBER", "integer offset")
                if not isinstance(num.value, int):
                    self.error("index offset must be an integer", num)
                offset = sign * num.value
            return IndexExpr(var=name, offset=offset)
        self.error("unsupported construct: index expression", tok)

    def parse_distcall(self):
        tok = self.expect_name("distribution name")
        self.expect("(")
        args = []
        named = []
        if self.peek().kind != ")":
            while True:
                if self.peek().kind == "IDENT" and self.peek(1).kind == "=":
                    key = self.expect_name("argument name").value
                    self.expect("=")
                    named.append((key, self.parse_expr()))
                else:
                    if named:
                        self.error("positional argument after named argument")
                    args.append(self.parse_expr())
                if self.peek().kind == ",":
                    self.next()
                    continue
                break
        self.expect(")")
        return DistCall(
            name=tok.value, args=tuple(args), named=tuple(named), line=tok.line, column=tok.column
        )

    def parse_expr(self):
        return self.parse_addsub()

    def parse_addsub(self):
        left = self.parse_muldiv()
        while self.peek().kind in ("+", "-"):
            op = self.next().kind
            left = Binary(op=op, left=left, right=self.parse_muldiv())
        return left

    def parse_muldiv(self):
        left = self.parse_unary()
        while self.peek().kind in ("*", "/"):
            op = self.next().kind
            left = Binary(op=op, left=left, right=self.parse_unary())
        return left

    def parse_unary(self):
        if self.peek().kind == "-":
            self.next()
            return Unary(op="-", operand=self.parse_unary())
        return self.parse_primary()

    def parse_primary(self):
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.next()
            return Num(value=float(tok.value))
        if tok.kind == "(":
            self.next()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if tok.kind == "IDENT":
            if tok.value in KEYWORDS:
                self.error(f"unsupported construct: {tok.value!r} in expression", tok)
            if self.peek(1).kind == "(":
                name = self.next().value
                self.next()  # (
                args = []
                if self.peek().kind != ")":
                    while True:
                        args.append(self.parse_expr())
                        if self.peek().kind == ",":
                            self.next()
                            continue
                        break
                self.expect(")")
                return Call(name=name, args=tuple(args), line=tok.line, column=tok.column)
            return self.parse_varref()
        self.error("expected expression", tok)


def parse_model(source):
    """Parse model source text into a ModelAst.

    Raises ModelSyntaxError (with line/column and the offending token) on
    any malformed input; never raises anything else.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    tokens = tokenize(source)
    return _Parser(tokens).parse_model()
